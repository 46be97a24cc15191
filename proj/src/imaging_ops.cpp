#include "fddb/imaging_ops.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fddb/errors.hpp"

namespace fddb {

namespace {

torch::Tensor per_sample(const torch::Tensor& v, std::int64_t batch) {
  if (v.dim() == 0) return v.expand({batch}).view({batch, 1, 1, 1});
  if (v.dim() != 1 || v.size(0) != batch) {
    std::ostringstream msg;
    msg << "per-sample parameter has shape " << v.sizes() << ", expected (" << batch << ")";
    throw InvalidArgument(msg.str());
  }
  return v.view({batch, 1, 1, 1});
}

void require_rgb(const torch::Tensor& x, const char* op) {
  if (x.dim() != 4 || x.size(1) != 3) {
    std::ostringstream msg;
    msg << op << " expects a B x 3 x H x W batch, got " << x.sizes();
    throw InvalidArgument(msg.str());
  }
}

void require_image(const torch::Tensor& x, const char* op) {
  if (x.dim() != 4 || x.size(2) < 1 || x.size(3) < 1) {
    std::ostringstream msg;
    msg << op << " expects a B x C x H x W batch, got " << x.sizes();
    throw InvalidArgument(msg.str());
  }
}

torch::Tensor index_tensor(const std::vector<std::int64_t>& idx) {
  return torch::tensor(idx, torch::kLong);
}

}  // namespace

ImageBatch ImageBatch::to_unit() const {
  if (domain == IntensityDomain::kUnit) return *this;
  return {(data + 1.0) * 0.5, IntensityDomain::kUnit};
}

ImageBatch ImageBatch::to_signed() const {
  if (domain == IntensityDomain::kSigned) return *this;
  return {data * 2.0 - 1.0, IntensityDomain::kSigned};
}

bool ImageBatch::in_range() const {
  torch::NoGradGuard no_grad;
  const double lo = domain == IntensityDomain::kSigned ? -1.0 : 0.0;
  return data.numel() == 0 ||
         (data.min().item<double>() >= lo && data.max().item<double>() <= 1.0);
}

void FrequencyConfig::validate() const {
  if (!(hp_sigma > 0.0)) throw InvalidArgument("hp_sigma must be positive");
  if (anchor_sigmas.empty() || anchor_sigmas.size() != anchor_weights.size()) {
    throw InvalidArgument("anchor_sigmas and anchor_weights must be non-empty and equally long");
  }
  for (double s : anchor_sigmas) {
    if (!(s > 0.0)) throw InvalidArgument("anchor sigmas must be positive");
  }
  for (double w : anchor_weights) {
    if (!(w > 0.0)) throw InvalidArgument("anchor weights must be positive");
  }
}

std::vector<double> FrequencyConfig::normalized_weights() const {
  const double total = std::accumulate(anchor_weights.begin(), anchor_weights.end(), 0.0);
  std::vector<double> out;
  out.reserve(anchor_weights.size());
  for (double w : anchor_weights) out.push_back(w / total);
  return out;
}

std::int64_t gaussian_kernel_size(double sigma) {
  return 2 * static_cast<std::int64_t>(std::ceil(3.0 * sigma)) + 1;
}

torch::Tensor gaussian_kernel_1d(const torch::Tensor& sigma, std::int64_t k) {
  if (k < 1 || k % 2 == 0) throw InvalidArgument("kernel size must be odd and positive");
  const auto half = (k - 1) / 2;
  const auto options = sigma.is_floating_point() ? sigma.options() : torch::TensorOptions(torch::kFloat64);
  const auto offsets = torch::arange(-half, half + 1, options);
  const auto s = sigma.to(options.dtype()).clamp_min(kMinKernelSigma).unsqueeze(-1);
  const auto w = torch::exp(-offsets.square() / (2.0 * s.square()));
  return w / w.sum(-1, /*keepdim=*/true);
}

torch::Tensor gaussian_kernel_1d(double sigma, std::int64_t k) {
  return gaussian_kernel_1d(torch::tensor(sigma, torch::kFloat64), k);
}

std::vector<std::int64_t> reflect_indices(std::int64_t n, std::int64_t pad) {
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(n + 2 * pad));
  if (n == 1) {
    idx.assign(static_cast<std::size_t>(1 + 2 * pad), 0);
    return idx;
  }
  const std::int64_t period = 2 * (n - 1);
  for (std::int64_t j = -pad; j < n + pad; ++j) {
    std::int64_t m = ((j % period) + period) % period;
    idx.push_back(m < n ? m : period - m);
  }
  return idx;
}

torch::Tensor gaussian_filter(const torch::Tensor& x, const torch::Tensor& sigma, std::int64_t k) {
  require_image(x, "gaussian_filter");
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const auto pad = (k - 1) / 2;
  auto sig = sigma.dim() == 0 ? sigma.expand({b}) : sigma;
  if (sig.dim() != 1 || sig.size(0) != b) {
    throw InvalidArgument("gaussian_filter: sigma must hold one value per sample");
  }
  const auto taps = gaussian_kernel_1d(sig.to(x.scalar_type()), k)
                        .repeat_interleave(c, 0);  // (B*C, K)
  const auto groups = b * c;

  auto xp = x.index_select(3, index_tensor(reflect_indices(w, pad))).reshape({1, groups, h, w + 2 * pad});
  auto y = torch::conv2d(xp, taps.view({groups, 1, 1, k}), torch::Tensor(), at::IntArrayRef{1}, at::IntArrayRef{0}, at::IntArrayRef{1}, groups);
  auto yp = y.view({1, groups, h, w}).index_select(2, index_tensor(reflect_indices(h, pad)));
  y = torch::conv2d(yp, taps.view({groups, 1, k, 1}), torch::Tensor(), at::IntArrayRef{1}, at::IntArrayRef{0}, at::IntArrayRef{1}, groups);
  return y.view({b, c, h, w});
}

torch::Tensor low_pass(const torch::Tensor& x, double sigma) {
  const auto s = torch::full({x.size(0)}, sigma, x.options().requires_grad(false));
  return gaussian_filter(x, s, gaussian_kernel_size(std::max(sigma, kMinKernelSigma)));
}

torch::Tensor apply_white_balance(const torch::Tensor& x, const torch::Tensor& gain) {
  require_rgb(x, "apply_white_balance");
  if (gain.dim() != 2 || gain.size(0) != x.size(0) || gain.size(1) != 3) {
    throw InvalidArgument("white-balance gain must be shaped (B, 3)");
  }
  {
    torch::NoGradGuard no_grad;
    if ((gain <= 0).any().item<bool>()) {
      throw InvalidArgument("white-balance gains must be positive");
    }
  }
  return x * gain.view({x.size(0), 3, 1, 1});
}

torch::Tensor apply_exposure(const torch::Tensor& x, const torch::Tensor& ev) {
  return x * torch::exp2(per_sample(ev, x.size(0)));
}

torch::Tensor apply_contrast(const torch::Tensor& x, const torch::Tensor& c) {
  return (x - 0.5) * per_sample(c, x.size(0)) + 0.5;
}

torch::Tensor apply_saturation(const torch::Tensor& x, const torch::Tensor& s) {
  require_rgb(x, "apply_saturation");
  const auto w = torch::tensor({kLuminanceWeights[0], kLuminanceWeights[1], kLuminanceWeights[2]},
                               x.options().requires_grad(false))
                     .view({1, 3, 1, 1});
  const auto luma = (x * w).sum(1, /*keepdim=*/true);
  return luma + per_sample(s, x.size(0)) * (x - luma);
}

torch::Tensor apply_blur(const torch::Tensor& x, const torch::Tensor& blur_sigma, double sigma_max) {
  if (!(sigma_max > 0.0)) throw InvalidArgument("sigma_max must be positive");
  return gaussian_filter(x, blur_sigma, gaussian_kernel_size(sigma_max));
}

torch::Tensor apply_grain(const torch::Tensor& x, const torch::Tensor& amp,
                          const torch::Tensor& grain_sigma, double sigma_max,
                          const torch::Tensor& noise) {
  require_image(x, "apply_grain");
  if (noise.dim() != 4 || noise.size(0) != x.size(0) || noise.size(1) != 1 ||
      noise.size(2) != x.size(2) || noise.size(3) != x.size(3)) {
    throw InvalidArgument("grain noise must be shaped (B, 1, H, W) to match the image");
  }
  if (!(sigma_max > 0.0)) throw InvalidArgument("sigma_max must be positive");
  const auto smooth = gaussian_filter(noise.to(x.scalar_type()), grain_sigma,
                                      gaussian_kernel_size(sigma_max));
  return x + per_sample(amp, x.size(0)) * smooth;
}

torch::Tensor sample_grain_noise(std::int64_t batch, std::int64_t height, std::int64_t width,
                                 std::uint64_t seed, torch::TensorOptions options) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::randn({batch, 1, height, width}, gen, torch::kFloat64)
      .to(options.dtype())
      .requires_grad_(false);
}

ImageBatch edit_chain(const ImageBatch& x, const EditParams& params, const ParamSpecSet& specs,
                      std::uint64_t noise_seed) {
  if (x.domain != IntensityDomain::kSigned) {
    throw InvalidArgument("edit_chain expects a signed-domain batch");
  }
  require_rgb(x.data, "edit_chain");
  auto u = x.to_unit().data;
  if (specs[EditOp::kWhiteBalance].enabled) u = apply_white_balance(u, params.wb_gain);
  if (specs[EditOp::kExposure].enabled) u = apply_exposure(u, params.ev);
  if (specs[EditOp::kContrast].enabled) u = apply_contrast(u, params.contrast);
  if (specs[EditOp::kSaturation].enabled) u = apply_saturation(u, params.saturation);
  if (specs[EditOp::kBlur].enabled) u = apply_blur(u, params.blur_sigma, specs.blur_sigma_max());
  if (specs[EditOp::kGrainAmp].enabled) {
    const auto noise = sample_grain_noise(u.size(0), u.size(2), u.size(3), noise_seed, u.options());
    u = apply_grain(u, params.grain_amp, params.grain_sigma, specs.grain_sigma_max(), noise);
  }
  u = torch::clamp(u, 0.0, 1.0);
  return ImageBatch{u, IntensityDomain::kUnit}.to_signed();
}

torch::Tensor snap_to_split_grid(const torch::Tensor& x) {
  const double quantum =
      std::ldexp(1.0, x.scalar_type() == torch::kFloat64 ? -50 : -22);
  const auto snapped = torch::round(x.detach() / quantum) * quantum;
  return snapped + (x - x.detach());
}

FrequencySplit decompose_high_frequency(const torch::Tensor& y_free, double hp_sigma) {
  if (!(hp_sigma > 0.0)) throw InvalidArgument("hp_sigma must be positive");
  // float input: low-pass in double, snap onto the float grid
  const bool f64 = y_free.scalar_type() == torch::kFloat64;
  const auto lp = low_pass(f64 ? y_free : y_free.to(torch::kFloat64), hp_sigma);
  const double quantum = std::ldexp(1.0, f64 ? -50 : -22);
  const auto snapped = torch::round(lp.detach() / quantum) * quantum;
  auto low = (snapped + (lp - lp.detach())).to(y_free.scalar_type());
  auto high = y_free - low;
  return {std::move(low), std::move(high)};
}

torch::Tensor recompose(const torch::Tensor& y_edit, const torch::Tensor& y_high, double g_res) {
  if (y_edit.sizes() != y_high.sizes()) {
    std::ostringstream msg;
    msg << "recompose: shape mismatch " << y_edit.sizes() << " vs " << y_high.sizes();
    throw InvalidArgument(msg.str());
  }
  if (!(g_res >= 0.0 && g_res <= 1.0)) throw InvalidArgument("g_res must lie in [0, 1]");
  return torch::clamp(y_edit + g_res * y_high, -1.0, 1.0);
}

}  // namespace fddb
