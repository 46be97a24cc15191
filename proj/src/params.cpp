#include "fddb/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fddb/errors.hpp"

namespace fddb {

namespace {

constexpr std::array<std::string_view, 7> kOpNames = {
    "wb", "exposure", "contrast", "saturation", "blur", "grain_amp", "grain_sigma"};
constexpr std::array<std::string_view, 3> kMappingNames = {"sigmoid", "tanh", "log_tanh"};

torch::Tensor map_column(const torch::Tensor& r, const ParamSpec& spec) {
  switch (spec.mapping) {
    case Mapping::kSigmoid:
      return spec.range_lo + (spec.range_hi - spec.range_lo) * torch::sigmoid(r);
    case Mapping::kTanh: {
      const double mid = 0.5 * (spec.range_lo + spec.range_hi);
      const double half = 0.5 * (spec.range_hi - spec.range_lo);
      return mid + half * torch::tanh(r);
    }
    case Mapping::kLogTanh:
      return torch::exp(std::log(spec.range_hi) * torch::tanh(r));
  }
  throw InvalidArgument("unknown mapping");
}

}  // namespace

std::string_view to_string(EditOp op) { return kOpNames[static_cast<std::size_t>(op)]; }
std::string_view to_string(Mapping m) { return kMappingNames[static_cast<std::size_t>(m)]; }

EditOp parse_edit_op(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<EditOp>(i);
  }
  throw InvalidArgument("unknown editing operator '" + std::string(name) + "'");
}

Mapping parse_mapping(std::string_view name) {
  for (std::size_t i = 0; i < kMappingNames.size(); ++i) {
    if (kMappingNames[i] == name) return static_cast<Mapping>(i);
  }
  throw InvalidArgument("unknown mapping '" + std::string(name) + "'");
}

void ParamSpec::validate() const {
  const std::string name(to_string(op));
  if (!(range_lo < range_hi)) {
    throw InvalidArgument(name + ": range_lo must be below range_hi");
  }
  if (identity_ref < range_lo || identity_ref > range_hi) {
    throw InvalidArgument(name + ": identity_ref outside [range_lo, range_hi]");
  }
  if (mapping == Mapping::kLogTanh &&
      (range_lo <= 0.0 || std::abs(range_lo * range_hi - 1.0) > 1e-9)) {
    throw InvalidArgument(name + ": log_tanh needs range_lo = 1 / range_hi > 0");
  }
  switch (op) {
    case EditOp::kWhiteBalance:
    case EditOp::kContrast:
    case EditOp::kGrainSigma:
      if (range_lo <= 0.0) throw InvalidArgument(name + ": range must be strictly positive");
      break;
    case EditOp::kSaturation:
    case EditOp::kBlur:
    case EditOp::kGrainAmp:
      if (range_lo < 0.0) throw InvalidArgument(name + ": range must be non-negative");
      break;
    case EditOp::kExposure:
      break;
  }
}

ParamSpecSet ParamSpecSet::defaults() {
  ParamSpecSet s;
  s[EditOp::kWhiteBalance] = {EditOp::kWhiteBalance, true, Mapping::kLogTanh, 0.5, 2.0, 1.0};
  s[EditOp::kExposure] = {EditOp::kExposure, true, Mapping::kTanh, -1.5, 1.5, 0.0};
  s[EditOp::kContrast] = {EditOp::kContrast, true, Mapping::kSigmoid, 0.5, 1.5, 1.0};
  s[EditOp::kSaturation] = {EditOp::kSaturation, true, Mapping::kSigmoid, 0.0, 2.0, 1.0};
  s[EditOp::kBlur] = {EditOp::kBlur, true, Mapping::kSigmoid, 0.0, 3.0, 0.0};
  s[EditOp::kGrainAmp] = {EditOp::kGrainAmp, true, Mapping::kSigmoid, 0.0, 0.15, 0.0};
  s[EditOp::kGrainSigma] = {EditOp::kGrainSigma, true, Mapping::kSigmoid, 0.5, 3.0, 1.75};
  return s;
}

int ParamSpecSet::raw_dim() const {
  int n = 0;
  for (const auto& spec : specs_) {
    if (spec.enabled) n += spec.width();
  }
  return n;
}

void ParamSpecSet::validate() const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].op != static_cast<EditOp>(i)) {
      throw InvalidArgument("parameter spec set is out of order");
    }
    specs_[i].validate();
  }
}

std::vector<double> ParamSpecSet::identity_raw_offsets(double boundary_margin) const {
  std::vector<double> out;
  for (const auto& spec : specs_) {
    if (!spec.enabled) continue;
    double raw = 0.0;
    switch (spec.mapping) {
      case Mapping::kSigmoid: {
        double f = (spec.identity_ref - spec.range_lo) / (spec.range_hi - spec.range_lo);
        f = std::clamp(f, boundary_margin, 1.0 - boundary_margin);
        raw = std::log(f / (1.0 - f));
        break;
      }
      case Mapping::kTanh: {
        const double mid = 0.5 * (spec.range_lo + spec.range_hi);
        const double half = 0.5 * (spec.range_hi - spec.range_lo);
        const double t = std::clamp((spec.identity_ref - mid) / half, -1.0 + 2.0 * boundary_margin,
                                    1.0 - 2.0 * boundary_margin);
        raw = std::atanh(t);
        break;
      }
      case Mapping::kLogTanh: {
        const double t =
            std::clamp(std::log(spec.identity_ref) / std::log(spec.range_hi),
                       -1.0 + 2.0 * boundary_margin, 1.0 - 2.0 * boundary_margin);
        raw = std::atanh(t);
        break;
      }
    }
    out.insert(out.end(), spec.width(), raw);
  }
  return out;
}

const torch::Tensor& EditParams::field(EditOp op) const {
  switch (op) {
    case EditOp::kWhiteBalance: return wb_gain;
    case EditOp::kExposure: return ev;
    case EditOp::kContrast: return contrast;
    case EditOp::kSaturation: return saturation;
    case EditOp::kBlur: return blur_sigma;
    case EditOp::kGrainAmp: return grain_amp;
    case EditOp::kGrainSigma: return grain_sigma;
  }
  throw InvalidArgument("unknown editing operator");
}

EditParams EditParams::detach() const {
  return {wb_gain.detach(),    ev.detach(),        contrast.detach(),   saturation.detach(),
          blur_sigma.detach(), grain_amp.detach(), grain_sigma.detach()};
}

EditParams EditParams::identity(std::int64_t batch, const ParamSpecSet& specs,
                                torch::TensorOptions options) {
  auto full = [&](EditOp op) {
    return torch::full({batch}, specs[op].identity_ref, options);
  };
  return {torch::full({batch, 3}, specs[EditOp::kWhiteBalance].identity_ref, options),
          full(EditOp::kExposure),
          full(EditOp::kContrast),
          full(EditOp::kSaturation),
          full(EditOp::kBlur),
          full(EditOp::kGrainAmp),
          full(EditOp::kGrainSigma)};
}

std::array<double, 9> batch_means(const EditParams& p) {
  torch::NoGradGuard no_grad;
  const auto wb = p.wb_gain.to(torch::kFloat64).mean(0);
  return {wb[0].item<double>(),
          wb[1].item<double>(),
          wb[2].item<double>(),
          p.ev.to(torch::kFloat64).mean().item<double>(),
          p.contrast.to(torch::kFloat64).mean().item<double>(),
          p.saturation.to(torch::kFloat64).mean().item<double>(),
          p.blur_sigma.to(torch::kFloat64).mean().item<double>(),
          p.grain_amp.to(torch::kFloat64).mean().item<double>(),
          p.grain_sigma.to(torch::kFloat64).mean().item<double>()};
}

std::array<double, 9> range_widths(const ParamSpecSet& specs) {
  const auto w = [&](EditOp op) { return specs[op].range_hi - specs[op].range_lo; };
  const double wb = w(EditOp::kWhiteBalance);
  return {wb, wb, wb, w(EditOp::kExposure), w(EditOp::kContrast), w(EditOp::kSaturation),
          w(EditOp::kBlur), w(EditOp::kGrainAmp), w(EditOp::kGrainSigma)};
}

EditParams map_raw_params(const torch::Tensor& raw, const ParamSpecSet& specs) {
  const int expected = specs.raw_dim();
  if (raw.dim() != 2 || raw.size(1) != expected) {
    std::ostringstream msg;
    msg << "raw parameter vector has shape " << raw.sizes() << ", expected (B, " << expected
        << ")";
    throw InvalidArgument(msg.str());
  }
  const auto batch = raw.size(0);
  const auto options = raw.options();
  EditParams p = EditParams::identity(batch, specs, options);
  std::int64_t col = 0;
  for (EditOp op : kAllEditOps) {
    const ParamSpec& spec = specs[op];
    if (!spec.enabled) continue;
    const auto r = raw.narrow(1, col, spec.width());
    col += spec.width();
    auto mapped = map_column(r, spec);
    switch (op) {
      case EditOp::kWhiteBalance: p.wb_gain = mapped; break;
      case EditOp::kExposure: p.ev = mapped.squeeze(1); break;
      case EditOp::kContrast: p.contrast = mapped.squeeze(1); break;
      case EditOp::kSaturation: p.saturation = mapped.squeeze(1); break;
      case EditOp::kBlur: p.blur_sigma = mapped.squeeze(1); break;
      case EditOp::kGrainAmp: p.grain_amp = mapped.squeeze(1); break;
      case EditOp::kGrainSigma: p.grain_sigma = mapped.squeeze(1); break;
    }
  }
  return p;
}

}  // namespace fddb
