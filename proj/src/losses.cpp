#include "fddb/losses.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "fddb/errors.hpp"

namespace fddb {

namespace {

torch::Tensor stable_softplus(const torch::Tensor& x) { return torch::softplus(x, 1.0, 20.0); }

}  // namespace

torch::Tensor gan_loss_d(GanKind kind, const torch::Tensor& real_logits,
                         const torch::Tensor& fake_logits) {
  if (kind == GanKind::kHinge) {
    return torch::relu(1.0 - real_logits).mean() + torch::relu(1.0 + fake_logits).mean();
  }
  return stable_softplus(-real_logits).mean() + stable_softplus(fake_logits).mean();
}

torch::Tensor gan_loss_g(GanKind kind, const torch::Tensor& fake_logits) {
  if (kind == GanKind::kHinge) return -fake_logits.mean();
  return stable_softplus(-fake_logits).mean();
}

torch::Tensor patch_nce(const std::vector<torch::Tensor>& queries,
                        const std::vector<torch::Tensor>& keys, double tau) {
  if (queries.empty() || queries.size() != keys.size()) {
    throw InvalidArgument("patch_nce: query and key layer counts differ or are empty");
  }
  if (!(tau > 0.0)) throw InvalidArgument("patch_nce: tau must be positive");
  torch::Tensor total;
  for (std::size_t l = 0; l < queries.size(); ++l) {
    const auto& q = queries[l];
    const auto k = keys[l].detach();
    if (q.dim() != 3 || q.sizes() != k.sizes()) {
      std::ostringstream msg;
      msg << "patch_nce: layer " << l << " query " << q.sizes() << " vs key " << k.sizes();
      throw InvalidArgument(msg.str());
    }
    const auto p = q.size(1);
    if (p < 2) throw InvalidArgument("patch_nce: need at least 2 patches per layer");
    const auto logits = torch::bmm(q, k.transpose(1, 2)) / tau;  // (B, P, P)
    const auto log_prob = torch::log_softmax(logits, -1);
    const auto positive = log_prob.diagonal(0, 1, 2);  // (B, P)
    const auto layer_loss = -positive.mean();
    total = total.defined() ? total + layer_loss : layer_loss;
  }
  return total / static_cast<double>(queries.size());
}

torch::Tensor identity_l1(const torch::Tensor& x_real, const torch::Tensor& x_hat) {
  if (x_real.sizes() != x_hat.sizes()) {
    std::ostringstream msg;
    msg << "identity_l1: shape mismatch " << x_real.sizes() << " vs " << x_hat.sizes();
    throw InvalidArgument(msg.str());
  }
  return (x_real - x_hat).abs().mean();
}

torch::Tensor low_freq_anchor(const torch::Tensor& y, const torch::Tensor& y_edit,
                              const FrequencyConfig& cfg) {
  if (y.sizes() != y_edit.sizes()) {
    std::ostringstream msg;
    msg << "low_freq_anchor: shape mismatch " << y.sizes() << " vs " << y_edit.sizes();
    throw InvalidArgument(msg.str());
  }
  cfg.validate();
  const auto uy = (y + 1.0) * 0.5;
  const auto ue = (y_edit + 1.0) * 0.5;
  const auto w = cfg.normalized_weights();
  torch::Tensor total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto term =
        w[i] * (low_pass(uy, cfg.anchor_sigmas[i]) - low_pass(ue, cfg.anchor_sigmas[i])).abs().mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

torch::Tensor edit_reg(const EditParams& params, const ParamSpecSet& specs) {
  torch::Tensor total = torch::zeros({}, params.ev.options());
  for (EditOp op : kAllEditOps) {
    const ParamSpec& spec = specs[op];
    if (!spec.enabled) continue;
    const auto& theta = params.field(op);
    if (op == EditOp::kWhiteBalance) {
      total = total + (torch::log(theta) - std::log(spec.identity_ref)).abs().mean();
    } else {
      total = total + (theta - spec.identity_ref).abs().mean();
    }
    switch (op) {
      case EditOp::kBlur:
      case EditOp::kGrainAmp:
        total = total + theta.abs().mean();
        break;
      case EditOp::kGrainSigma:
        total = total +
                ((theta - spec.identity_ref) / (spec.range_hi - spec.range_lo)).abs().mean();
        break;
      default:
        break;
    }
  }
  return total;
}

std::pair<torch::Tensor, LossReport> total_generator_loss(const LossTerms& terms,
                                                          const LossWeights& weights,
                                                          const StageMultipliers& m) {
  const std::array<const torch::Tensor*, 5> parts = {&terms.gan, &terms.nce, &terms.id,
                                                     &terms.edit, &terms.low};
  const std::array<double, 5> scale = {weights.gan * m.gan, weights.nce * m.nce,
                                       weights.id * m.id, weights.edit * m.edit,
                                       weights.low * m.low};
  LossReport report;
  torch::Tensor total;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& t = *parts[i];
    if (!t.defined()) continue;
    const double value = t.detach().to(torch::kFloat64).item<double>();
    if (!std::isfinite(value)) {
      throw TrainingDivergence(std::string(kLossTermNames[i]),
                               "non-finite generator loss term " + std::string(kLossTermNames[i]));
    }
    report.raw[i] = value;
    report.weighted[i] = scale[i] * value;
    const auto contribution = scale[i] * t;
    total = total.defined() ? total + contribution : contribution;
  }
  if (!total.defined()) total = torch::zeros({});
  report.total = total.detach().to(torch::kFloat64).item<double>();
  if (!std::isfinite(report.total)) throw TrainingDivergence("total", "non-finite total loss");
  return {total, report};
}

}  // namespace fddb
