#include "fddb/optim.hpp"

#include <cmath>

#include "fddb/errors.hpp"

namespace fddb {

Adam::Adam(NamedParams params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
  if (!(opts_.lr > 0.0) || !(opts_.beta1 >= 0.0 && opts_.beta1 < 1.0) ||
      !(opts_.beta2 >= 0.0 && opts_.beta2 < 1.0) || !(opts_.eps > 0.0)) {
    throw InvalidArgument("Adam: lr and eps must be positive, betas in [0, 1)");
  }
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p, torch::MemoryFormat::Contiguous));
    v_.push_back(torch::zeros_like(p, torch::MemoryFormat::Contiguous));
  }
  steps_.assign(params_.size(), 0);
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) {
    if (p.grad().defined()) p.mutable_grad() = torch::Tensor();
  }
}

void Adam::step() {
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    const auto& g = p.grad();
    if (!g.defined()) continue;
    const auto t = ++steps_[i];
    m_[i].mul_(opts_.beta1).add_(g, 1.0 - opts_.beta1);
    v_[i].mul_(opts_.beta2).addcmul_(g, g, 1.0 - opts_.beta2);
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t));
    const auto denom = (v_[i].sqrt() / std::sqrt(bc2)).add_(opts_.eps);
    p.addcdiv_(m_[i], denom, -opts_.lr / bc1);
  }
}

void Adam::save_state(const std::string& prefix, Checkpoint& ckpt) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ckpt.arrays.push_back({prefix + "/m/" + params_[i].first, m_[i].clone()});
    ckpt.arrays.push_back({prefix + "/v/" + params_[i].first, v_[i].clone()});
  }
  ckpt.arrays.push_back(
      {prefix + "/step",
       torch::tensor(std::vector<std::int64_t>(steps_.begin(), steps_.end()), torch::kInt64)});
}

void Adam::load_state(const std::string& prefix, const Checkpoint& ckpt) {
  const auto& steps = ckpt.array(prefix + "/step");
  if (steps.dim() != 1 || steps.size(0) != static_cast<std::int64_t>(params_.size())) {
    throw IntegrityError("optimizer state '" + prefix + "' has the wrong parameter count");
  }
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = ckpt.array(prefix + "/m/" + params_[i].first);
    const auto& v = ckpt.array(prefix + "/v/" + params_[i].first);
    if (m.sizes() != m_[i].sizes() || v.sizes() != v_[i].sizes() ||
        m.scalar_type() != m_[i].scalar_type() || v.scalar_type() != v_[i].scalar_type()) {
      throw IntegrityError("optimizer state for '" + params_[i].first + "' does not match");
    }
    m_[i].copy_(m);
    v_[i].copy_(v);
    steps_[i] = steps[static_cast<std::int64_t>(i)].item<std::int64_t>();
  }
}

Adam::NamedParams prefixed_parameters(const torch::nn::Module& module, const std::string& prefix) {
  Adam::NamedParams out;
  for (const auto& item : module.named_parameters(true)) {
    out.emplace_back(prefix + "/" + item.key(), item.value());
  }
  return out;
}

}  // namespace fddb
