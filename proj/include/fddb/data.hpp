#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "fddb/imaging_ops.hpp"

namespace fddb {

enum class DomainLabel { kSynthetic, kReal };

struct ImageSize {
  std::int64_t height = 256;
  std::int64_t width = 256;
};

/// Lazily decoded image folder. Files are indexed recursively (png/jpg/jpeg)
/// in lexicographic order; pixels are decoded and cached on first access.
class DomainDataset {
 public:
  DomainDataset(std::filesystem::path root, std::vector<std::filesystem::path> files,
                ImageSize size, DomainLabel label);

  std::size_t size() const { return files_.size(); }
  const std::vector<std::filesystem::path>& files() const { return files_; }
  const std::filesystem::path& root() const { return root_; }
  ImageSize image_size() const { return size_; }
  DomainLabel label() const { return label_; }

  /// (3, H, W) float32 in the signed domain.
  const torch::Tensor& image(std::size_t index) const;

 private:
  std::filesystem::path root_;
  std::vector<std::filesystem::path> files_;
  ImageSize size_;
  DomainLabel label_;
  mutable std::vector<torch::Tensor> cache_;
};

/// Throws ConfigError for a missing or image-free directory.
DomainDataset load_dataset(const std::filesystem::path& root, ImageSize size,
                           DomainLabel label = DomainLabel::kSynthetic);

/// Endless sequence of shuffled epochs over [0, n). The permutation of epoch e
/// is a pure function of (seed, stream, e).
class ShuffleCycler {
 public:
  ShuffleCycler(std::size_t n, std::uint64_t seed, std::uint64_t stream);

  std::size_t next();
  std::uint64_t epoch() const { return epoch_; }
  std::size_t cursor() const { return cursor_; }
  void restore(std::uint64_t epoch, std::size_t cursor);

 private:
  void reshuffle();

  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

struct BatchPair {
  ImageBatch x_s;
  ImageBatch x_r;
  std::vector<std::size_t> synthetic_indices;
  std::vector<std::size_t> real_indices;
};

/// Draws equally sized synthetic and real batches with independent epochs.
class UnpairedSampler {
 public:
  UnpairedSampler(const DomainDataset& synthetic, const DomainDataset& real, std::uint64_t seed);

  BatchPair next_batch_pair(std::int64_t batch);

  ShuffleCycler& synthetic_cycler() { return syn_cycler_; }
  ShuffleCycler& real_cycler() { return real_cycler_; }
  const ShuffleCycler& synthetic_cycler() const { return syn_cycler_; }
  const ShuffleCycler& real_cycler() const { return real_cycler_; }

 private:
  const DomainDataset* synthetic_ds_;
  const DomainDataset* real_ds_;
  ShuffleCycler syn_cycler_;
  ShuffleCycler real_cycler_;
};

/// Stacks dataset images into a signed ImageBatch.
ImageBatch stack_images(const DomainDataset& ds, const std::vector<std::size_t>& indices);

}  // namespace fddb
