#include "fddb/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/imaging_ops.hpp"

namespace fddb {

namespace F = torch::nn::functional;

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  const auto mean = x.mean({2, 3}, /*keepdim=*/true);
  const auto centered = x - mean;
  const auto var = centered.square().mean({2, 3}, /*keepdim=*/true);
  return centered * torch::rsqrt(var + eps);
}

void init_weights(torch::nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::detail::createCPUGenerator(seed);
  for (auto& item : module.named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      p.zero_();
    } else {
      p.normal_(0.0, 0.02, gen);
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter predictor

ParamPredictorImpl::ParamPredictorImpl(ParamPredictorConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.out_dim < 1) throw InvalidArgument("parameter predictor needs out_dim >= 1");
  convs_ = register_module("convs", torch::nn::ModuleList());
  std::int64_t in = cfg_.in_channels;
  for (std::int64_t out : cfg_.conv_channels) {
    convs_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1).bias(false)));
    in = out;
  }
  fc1_ = register_module("fc1", torch::nn::Linear(in, cfg_.mlp_hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(cfg_.mlp_hidden, cfg_.out_dim));
}

torch::Tensor ParamPredictorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != cfg_.in_channels) {
    std::ostringstream msg;
    msg << "parameter predictor expects B x " << cfg_.in_channels << " x H x W, got " << x.sizes();
    throw InvalidArgument(msg.str());
  }
  auto h = x;
  for (const auto& conv : *convs_) {
    h = torch::relu(instance_norm(conv->as<torch::nn::Conv2d>()->forward(h)));
  }
  h = h.mean({2, 3});
  return fc2_->forward(torch::relu(fc1_->forward(h)));
}

void ParamPredictorImpl::reset_output_layer(const std::vector<double>& bias) {
  if (static_cast<std::int64_t>(bias.size()) != cfg_.out_dim) {
    throw InvalidArgument("output bias length must equal out_dim");
  }
  torch::NoGradGuard no_grad;
  fc2_->weight.zero_();
  fc2_->bias.copy_(torch::tensor(bias, fc2_->bias.options()));
}

// ---------------------------------------------------------------------------
// Free generator

class GeneratorStage : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
};

namespace {

torch::nn::Conv2d reflect_conv(std::int64_t in, std::int64_t out, std::int64_t k,
                               std::int64_t stride, bool bias) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k)
                               .stride(stride)
                               .padding(k / 2)
                               .padding_mode(torch::kReflect)
                               .bias(bias));
}

class ConvStage : public GeneratorStage {
 public:
  ConvStage(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride, bool upsample)
      : upsample_(upsample) {
    conv_ = register_module("conv", reflect_conv(in, out, k, stride, false));
  }
  torch::Tensor forward(const torch::Tensor& x) override {
    auto h = x;
    if (upsample_) {
      h = F::interpolate(h, F::InterpolateFuncOptions()
                                .scale_factor(std::vector<double>{2.0, 2.0})
                                .mode(torch::kNearest));
    }
    return torch::relu(instance_norm(conv_->forward(h)));
  }

 private:
  bool upsample_;
  torch::nn::Conv2d conv_{nullptr};
};

class ResStage : public GeneratorStage {
 public:
  explicit ResStage(std::int64_t width) {
    conv1_ = register_module("conv1", reflect_conv(width, width, 3, 1, false));
    conv2_ = register_module("conv2", reflect_conv(width, width, 3, 1, false));
  }
  torch::Tensor forward(const torch::Tensor& x) override {
    auto h = torch::relu(instance_norm(conv1_->forward(x)));
    return x + instance_norm(conv2_->forward(h));
  }

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};

class OutputStage : public GeneratorStage {
 public:
  OutputStage(std::int64_t in, std::int64_t out) {
    conv_ = register_module("conv", reflect_conv(in, out, 7, 1, true));
  }
  torch::Tensor forward(const torch::Tensor& x) override {
    return snap_to_split_grid(torch::tanh(conv_->forward(x)));
  }

 private:
  torch::nn::Conv2d conv_{nullptr};
};

std::vector<std::string> stage_names(std::int64_t res_blocks) {
  std::vector<std::string> names = {"enc0", "enc1", "enc2"};
  for (std::int64_t i = 0; i < res_blocks; ++i) names.push_back("res" + std::to_string(i));
  names.insert(names.end(), {"dec0", "dec1", "out"});
  return names;
}

}  // namespace

void FreeGeneratorConfig::validate() const {
  if (base_width < 1 || res_blocks < 1 || channels < 1) {
    throw InvalidArgument("free generator widths and block counts must be positive");
  }
  if (tap_ids.size() != 5) throw InvalidArgument("free generator needs exactly 5 tap ids");
  const auto names = stage_names(res_blocks);
  std::set<std::string> seen;
  for (const auto& id : tap_ids) {
    if (id == "out" || std::find(names.begin(), names.end(), id) == names.end()) {
      throw InvalidArgument("unknown generator tap '" + id + "'");
    }
    if (!seen.insert(id).second) throw InvalidArgument("duplicate generator tap '" + id + "'");
  }
}

FreeGeneratorImpl::FreeGeneratorImpl(FreeGeneratorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto w = cfg_.base_width;
  auto add = [&](std::string name, std::shared_ptr<GeneratorStage> stage, std::int64_t out_ch) {
    stages_.emplace_back(name, register_module(name, std::move(stage)));
    stage_channels_.push_back(out_ch);
  };
  add("enc0", std::make_shared<ConvStage>(cfg_.channels, w, 7, 1, false), w);
  add("enc1", std::make_shared<ConvStage>(w, 2 * w, 3, 2, false), 2 * w);
  add("enc2", std::make_shared<ConvStage>(2 * w, 4 * w, 3, 2, false), 4 * w);
  for (std::int64_t i = 0; i < cfg_.res_blocks; ++i) {
    add("res" + std::to_string(i), std::make_shared<ResStage>(4 * w), 4 * w);
  }
  add("dec0", std::make_shared<ConvStage>(4 * w, 2 * w, 3, 1, true), 2 * w);
  add("dec1", std::make_shared<ConvStage>(2 * w, w, 3, 1, true), w);
  add("out", std::make_shared<OutputStage>(w, cfg_.channels), cfg_.channels);
}

void FreeGeneratorImpl::check_input(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != cfg_.channels) {
    std::ostringstream msg;
    msg << "free generator expects B x " << cfg_.channels << " x H x W, got " << x.sizes();
    throw InvalidArgument(msg.str());
  }
  const auto m = FreeGeneratorConfig::kDownsampling;
  if (x.size(2) % m != 0 || x.size(3) % m != 0 || x.size(2) < 2 * m || x.size(3) < 2 * m) {
    std::ostringstream msg;
    msg << "free generator input " << x.size(2) << "x" << x.size(3)
        << " must have height and width that are multiples of " << m << " and at least "
        << 2 * m;
    throw InvalidArgument(msg.str());
  }
}

FeatureStack FreeGeneratorImpl::run(const torch::Tensor& x, bool stop_after_taps,
                                    torch::Tensor* out) {
  check_input(x);
  FeatureStack found;
  auto h = x;
  for (const auto& [name, stage] : stages_) {
    h = stage->forward(h);
    if (std::find(cfg_.tap_ids.begin(), cfg_.tap_ids.end(), name) != cfg_.tap_ids.end()) {
      found.emplace_back(name, h);
      if (stop_after_taps && found.size() == cfg_.tap_ids.size()) break;
    }
  }
  if (out != nullptr) *out = h;
  // Order by tap_ids rather than by depth.
  FeatureStack ordered;
  for (const auto& id : cfg_.tap_ids) {
    for (auto& f : found) {
      if (f.first == id) ordered.push_back(std::move(f));
    }
  }
  return ordered;
}

FreeGeneratorImpl::Output FreeGeneratorImpl::forward(const torch::Tensor& x, bool want_features) {
  Output result;
  auto features = run(x, false, &result.image);
  if (want_features) result.features = std::move(features);
  return result;
}

FeatureStack FreeGeneratorImpl::encode_taps(const torch::Tensor& x) { return run(x, true, nullptr); }

std::vector<std::int64_t> FreeGeneratorImpl::tap_channels() const {
  std::vector<std::int64_t> out;
  for (const auto& id : cfg_.tap_ids) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (stages_[i].first == id) out.push_back(stage_channels_[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorConfig cfg) : cfg_(cfg) {
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  std::int64_t in = cfg_.channels;
  std::int64_t out = cfg_.base_width;
  for (std::int64_t stride : {2, 2, 2, 1}) {
    blocks_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, 4).stride(stride).padding(1).bias(false)));
    in = out;
    out *= 2;
  }
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 1)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = x;
  for (const auto& block : *blocks_) {
    h = F::leaky_relu(instance_norm(block->as<torch::nn::Conv2d>()->forward(h)),
                      F::LeakyReLUFuncOptions().negative_slope(cfg_.leaky_slope));
  }
  return head_->forward(h);
}

// ---------------------------------------------------------------------------
// Projection heads

ProjectionHeadsImpl::ProjectionHeadsImpl(const std::vector<std::int64_t>& in_channels,
                                         std::int64_t dim) {
  heads_ = register_module("heads", torch::nn::ModuleList());
  for (auto c : in_channels) {
    heads_->push_back(torch::nn::Sequential(torch::nn::Linear(c, dim), torch::nn::ReLU(),
                                            torch::nn::Linear(dim, dim)));
  }
}

std::vector<torch::Tensor> ProjectionHeadsImpl::forward(
    const FeatureStack& features, const std::vector<torch::Tensor>& patch_indices) {
  if (features.size() != heads_->size() || patch_indices.size() != heads_->size()) {
    throw InvalidArgument("projection heads: layer count mismatch");
  }
  std::vector<torch::Tensor> out;
  out.reserve(features.size());
  for (std::size_t l = 0; l < features.size(); ++l) {
    const auto& f = features[l].second;
    const auto positions = f.size(2) * f.size(3);
    const auto& idx = patch_indices[l];
    if (idx.numel() == 0 || idx.min().item<std::int64_t>() < 0 ||
        idx.max().item<std::int64_t>() >= positions) {
      throw InvalidArgument("patch index out of range for layer '" + features[l].first + "'");
    }
    const auto flat = f.flatten(2).permute({0, 2, 1});  // (B, HW, C)
    const auto picked = flat.index_select(1, idx);      // (B, P, C)
    const auto z = (*heads_)[l]->as<torch::nn::Sequential>()->forward(picked);
    out.push_back(F::normalize(z, F::NormalizeFuncOptions().dim(-1).eps(1e-12)));
  }
  return out;
}

std::vector<torch::Tensor> sample_patch_indices(const FeatureStack& features, std::int64_t count,
                                                std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  std::vector<torch::Tensor> out;
  for (const auto& [name, f] : features) {
    const auto positions = f.size(2) * f.size(3);
    const auto take = std::min(count, positions);
    out.push_back(torch::randperm(positions, gen, torch::kLong).narrow(0, 0, take));
  }
  return out;
}

}  // namespace fddb
