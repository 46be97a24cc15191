#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace fddb {

class GeneratorStage;

/// Per-sample normalization over spatial positions (no affine part). Defined
/// for any spatial size, including 1 x 1 where it returns zeros.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = 1e-5);

/// Zero-mean Gaussian (std 0.02) for every conv/linear weight, zero biases.
/// Draws come from a generator seeded with `seed`.
void init_weights(torch::nn::Module& module, std::uint64_t seed);

struct ParamPredictorConfig {
  std::int64_t in_channels = 3;
  std::vector<std::int64_t> conv_channels = {32, 64, 128};
  std::int64_t mlp_hidden = 128;
  std::int64_t out_dim = 9;
};

/// 3 x (3x3 stride-2 conv, instance norm, ReLU) -> global average pool ->
/// two-layer MLP emitting the raw editing vector.
class ParamPredictorImpl : public torch::nn::Module {
 public:
  explicit ParamPredictorImpl(ParamPredictorConfig cfg = {});

  torch::Tensor forward(const torch::Tensor& x);

  /// Zeroes the last layer's weights and sets its bias, so every input maps
  /// to `bias` at initialization.
  void reset_output_layer(const std::vector<double>& bias);

  const ParamPredictorConfig& config() const { return cfg_; }

 private:
  ParamPredictorConfig cfg_;
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(ParamPredictor);

/// Named intermediate activations tapped for the contrastive loss.
using FeatureStack = std::vector<std::pair<std::string, torch::Tensor>>;

struct FreeGeneratorConfig {
  std::int64_t channels = 3;
  std::int64_t base_width = 32;
  std::int64_t res_blocks = 9;
  // Stage names: enc0 enc1 enc2 res0..res{n-1} dec0 dec1.
  std::vector<std::string> tap_ids = {"enc0", "enc1", "enc2", "res4", "dec0"};

  /// Spatial dimensions must be multiples of this.
  static constexpr std::int64_t kDownsampling = 4;
  void validate() const;
};

/// CUT-style encoder (3 conv stages, two of them stride 2), residual blocks,
/// decoder (2 upsampling stages and a 7x7 output conv) with a tanh output.
/// All convolutions use reflection padding, so constant inputs stay constant.
class FreeGeneratorImpl : public torch::nn::Module {
 public:
  explicit FreeGeneratorImpl(FreeGeneratorConfig cfg = {});

  struct Output {
    torch::Tensor image;   // signed domain, snapped to the frequency-split grid
    FeatureStack features;  // empty unless requested
  };

  Output forward(const torch::Tensor& x, bool want_features = false);
  /// Runs only as far as the last tap and returns the tapped maps.
  FeatureStack encode_taps(const torch::Tensor& x);

  /// Channel count of each tapped map, in tap order.
  std::vector<std::int64_t> tap_channels() const;
  const FreeGeneratorConfig& config() const { return cfg_; }

 private:
  void check_input(const torch::Tensor& x) const;
  FeatureStack run(const torch::Tensor& x, bool stop_after_taps, torch::Tensor* out);

  FreeGeneratorConfig cfg_;
  std::vector<std::pair<std::string, std::shared_ptr<GeneratorStage>>> stages_;
  std::vector<std::int64_t> stage_channels_;
};
TORCH_MODULE(FreeGenerator);

struct DiscriminatorConfig {
  std::int64_t channels = 3;
  std::int64_t base_width = 32;
  double leaky_slope = 0.2;
};

/// PatchGAN: blocks of 4x4 conv + instance norm + LeakyReLU with strides
/// (2, 2, 2, 1), then a 1x1 conv to one logit channel. A 64x64 input yields a
/// 7x7 logit map. No sigmoid is applied.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorConfig cfg = {});
  torch::Tensor forward(const torch::Tensor& x);

 private:
  DiscriminatorConfig cfg_;
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Per-layer Linear -> ReLU -> Linear head applied to gathered patch features;
/// shared by the query and key paths.
class ProjectionHeadsImpl : public torch::nn::Module {
 public:
  ProjectionHeadsImpl(const std::vector<std::int64_t>& in_channels, std::int64_t dim);

  /// Gathers `patch_indices[l]` (flat spatial positions, shared across the
  /// batch) from each layer and returns L2-normalized (B, P_l, dim) embeddings.
  std::vector<torch::Tensor> forward(const FeatureStack& features,
                                     const std::vector<torch::Tensor>& patch_indices);

  std::size_t layers() const { return heads_->size(); }

 private:
  torch::nn::ModuleList heads_{nullptr};
};
TORCH_MODULE(ProjectionHeads);

/// Up to `count` distinct flat positions per tapped layer, drawn uniformly.
std::vector<torch::Tensor> sample_patch_indices(const FeatureStack& features, std::int64_t count,
                                                std::uint64_t seed);

}  // namespace fddb
