#include "fddb/data.hpp"

#include <algorithm>

#include "fddb/errors.hpp"
#include "fddb/image_io.hpp"
#include "fddb/rng.hpp"

namespace fddb {

namespace {

// splitmix64-driven generator with unbiased bounded draws; identical on every
// platform, unlike std::uniform_int_distribution.
class Shuffler {
 public:
  explicit Shuffler(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_++); }
  std::size_t below(std::size_t bound) {
    const std::uint64_t b = bound;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return static_cast<std::size_t>(v % b);
  }

 private:
  std::uint64_t state_;
};

}  // namespace

DomainDataset::DomainDataset(std::filesystem::path root, std::vector<std::filesystem::path> files,
                             ImageSize size, DomainLabel label)
    : root_(std::move(root)), files_(std::move(files)), size_(size), label_(label),
      cache_(files_.size()) {
  if (files_.empty()) throw ConfigError("dataset " + root_.string() + " contains no images");
  if (size_.height < 1 || size_.width < 1) throw ConfigError("dataset image size must be positive");
}

const torch::Tensor& DomainDataset::image(std::size_t index) const {
  if (index >= files_.size()) throw InvalidArgument("dataset index out of range");
  auto& slot = cache_[index];
  if (!slot.defined()) {
    const auto rgb = read_rgb8(files_[index]);
    slot = rgb8_to_signed(rgb, cv::Size(static_cast<int>(size_.width), static_cast<int>(size_.height)))
               .contiguous();
  }
  return slot;
}

DomainDataset load_dataset(const std::filesystem::path& root, ImageSize size, DomainLabel label) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("dataset directory " + root.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return DomainDataset(root, std::move(files), size, label);
}

ShuffleCycler::ShuffleCycler(std::size_t n, std::uint64_t seed, std::uint64_t stream)
    : n_(n), seed_(seed), stream_(stream) {
  if (n_ == 0) throw InvalidArgument("cannot cycle over an empty index set");
  reshuffle();
}

void ShuffleCycler::reshuffle() {
  order_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
  Shuffler rng(derive_seed(seed_, static_cast<RngStream>(stream_), epoch_));
  for (std::size_t i = n_ - 1; i > 0; --i) std::swap(order_[i], order_[rng.below(i + 1)]);
}

std::size_t ShuffleCycler::next() {
  if (cursor_ == n_) {
    ++epoch_;
    cursor_ = 0;
    reshuffle();
  }
  return order_[cursor_++];
}

void ShuffleCycler::restore(std::uint64_t epoch, std::size_t cursor) {
  if (cursor > n_) throw InvalidArgument("shuffle cursor beyond epoch length");
  epoch_ = epoch;
  cursor_ = cursor;
  reshuffle();
}

UnpairedSampler::UnpairedSampler(const DomainDataset& synthetic, const DomainDataset& real,
                                 std::uint64_t seed)
    : synthetic_ds_(&synthetic),
      real_ds_(&real),
      syn_cycler_(synthetic.size(), seed, static_cast<std::uint64_t>(RngStream::kSyntheticShuffle)),
      real_cycler_(real.size(), seed, static_cast<std::uint64_t>(RngStream::kRealShuffle)) {}

ImageBatch stack_images(const DomainDataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<torch::Tensor> images;
  images.reserve(indices.size());
  for (auto i : indices) images.push_back(ds.image(i));
  return {torch::stack(images), IntensityDomain::kSigned};
}

BatchPair UnpairedSampler::next_batch_pair(std::int64_t batch) {
  if (batch < 1) throw InvalidArgument("batch size must be at least 1");
  BatchPair pair;
  for (std::int64_t i = 0; i < batch; ++i) pair.synthetic_indices.push_back(syn_cycler_.next());
  for (std::int64_t i = 0; i < batch; ++i) pair.real_indices.push_back(real_cycler_.next());
  pair.x_s = stack_images(*synthetic_ds_, pair.synthetic_indices);
  pair.x_r = stack_images(*real_ds_, pair.real_indices);
  return pair;
}

}  // namespace fddb
