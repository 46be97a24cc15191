#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "fddb/params.hpp"

namespace fddb {

enum class IntensityDomain { kSigned, kUnit };

/// B x C x H x W image tensor tagged with its intensity domain.
struct ImageBatch {
  torch::Tensor data;
  IntensityDomain domain = IntensityDomain::kSigned;

  ImageBatch to_unit() const;
  ImageBatch to_signed() const;
  /// True when every value lies inside the domain's closed interval.
  bool in_range() const;
};

/// Gaussian low-pass settings shared by the frequency split and the
/// low-frequency anchor.
struct FrequencyConfig {
  double hp_sigma = 8.0;
  std::vector<double> anchor_sigmas = {4.0, 8.0, 16.0};
  std::vector<double> anchor_weights = {1.0, 1.0, 1.0};

  void validate() const;
  /// anchor_weights rescaled to sum to one.
  std::vector<double> normalized_weights() const;
};

inline constexpr double kMinKernelSigma = 1e-3;
inline constexpr std::array<double, 3> kLuminanceWeights = {0.299, 0.587, 0.114};

/// K = 2 * ceil(3 sigma) + 1.
std::int64_t gaussian_kernel_size(double sigma);

/// Normalized Gaussian taps. `sigma` is (B) or a 0-dim tensor; the result is
/// (B, K) or (K). Sigma is clamped to kMinKernelSigma so the formula stays
/// differentiable as it approaches zero.
torch::Tensor gaussian_kernel_1d(const torch::Tensor& sigma, std::int64_t k);
torch::Tensor gaussian_kernel_1d(double sigma, std::int64_t k);

/// Source indices for mirror padding (edge pixel not repeated); the reflection
/// folds back and forth when `pad` exceeds the extent.
std::vector<std::int64_t> reflect_indices(std::int64_t n, std::int64_t pad);

/// Separable Gaussian filter with a per-sample sigma (B) and fixed support K.
torch::Tensor gaussian_filter(const torch::Tensor& x, const torch::Tensor& sigma, std::int64_t k);

/// LP(x; sigma) with K = gaussian_kernel_size(sigma).
torch::Tensor low_pass(const torch::Tensor& x, double sigma);

// Editing operators. All act on unit-domain tensors and leave values unclipped.
torch::Tensor apply_white_balance(const torch::Tensor& x, const torch::Tensor& gain);
torch::Tensor apply_exposure(const torch::Tensor& x, const torch::Tensor& ev);
torch::Tensor apply_contrast(const torch::Tensor& x, const torch::Tensor& c);
torch::Tensor apply_saturation(const torch::Tensor& x, const torch::Tensor& s);
torch::Tensor apply_blur(const torch::Tensor& x, const torch::Tensor& blur_sigma, double sigma_max);
torch::Tensor apply_grain(const torch::Tensor& x, const torch::Tensor& amp,
                          const torch::Tensor& grain_sigma, double sigma_max,
                          const torch::Tensor& noise);

/// Standard normal grain field (B, 1, H, W), one per sample, fully determined
/// by `seed`.
torch::Tensor sample_grain_noise(std::int64_t batch, std::int64_t height, std::int64_t width,
                                 std::uint64_t seed, torch::TensorOptions options);

/// WB -> exposure -> contrast -> saturation -> blur -> grain in the unit
/// domain, clipped to [0, 1], returned in the signed domain.
ImageBatch edit_chain(const ImageBatch& x, const EditParams& params, const ParamSpecSet& specs,
                      std::uint64_t noise_seed);

/// Rounds onto the fixed-point grid on which the frequency split is exact
/// (2^-22 for float, 2^-50 for double). The backward pass is the identity.
torch::Tensor snap_to_split_grid(const torch::Tensor& x);

struct FrequencySplit {
  torch::Tensor low;   // y_L
  torch::Tensor high;  // y_H = y_free - y_L
};

/// For inputs already on the split grid, low + high reproduces y_free bit for
/// bit.
FrequencySplit decompose_high_frequency(const torch::Tensor& y_free, double hp_sigma);

/// clip(y_edit + g_res * y_H, -1, 1).
torch::Tensor recompose(const torch::Tensor& y_edit, const torch::Tensor& y_high, double g_res);

}  // namespace fddb
