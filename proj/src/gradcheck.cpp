#include "fddb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "fddb/errors.hpp"
#include "fddb/imaging_ops.hpp"
#include "fddb/losses.hpp"
#include "fddb/params.hpp"
#include "fddb/rng.hpp"

namespace fddb {

namespace {

using Inputs = std::vector<torch::Tensor>;

struct Problem {
  Inputs inputs;                                  // double tensors
  std::vector<bool> differentiable;               // per input
  std::function<torch::Tensor(const Inputs&)> f;  // tensor-valued
};

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : gen_(at::detail::createCPUGenerator(seed)) {}

  torch::Tensor uniform(at::IntArrayRef shape, double lo, double hi) {
    return torch::rand(shape, gen_, torch::kFloat64) * (hi - lo) + lo;
  }
  torch::Tensor normal(at::IntArrayRef shape) { return torch::randn(shape, gen_, torch::kFloat64); }
  at::Generator& gen() { return gen_; }

 private:
  at::Generator gen_;
};

constexpr std::int64_t kB = 2, kH = 8, kW = 8;

torch::Tensor unit_image(Draw& d) { return d.uniform({kB, 3, kH, kW}, 0.2, 0.8); }

EditParams params_from(const Inputs& in, std::size_t first) {
  EditParams p;
  p.wb_gain = in[first];
  p.ev = in[first + 1];
  p.contrast = in[first + 2];
  p.saturation = in[first + 3];
  p.blur_sigma = in[first + 4];
  p.grain_amp = in[first + 5];
  p.grain_sigma = in[first + 6];
  return p;
}

/// Moves every value closer than `margin` to `kink` out to kink +- margin, so
/// central differences never straddle a point where |.| or relu bends.
torch::Tensor avoid_kink(const torch::Tensor& t, double kink, double margin = 1e-3) {
  const auto d = t - kink;
  const auto sign = torch::where(d >= 0, torch::ones_like(d), -torch::ones_like(d));
  return torch::where(d.abs() < margin, kink + sign * margin, t);
}

Inputs random_params(Draw& d) {
  return {avoid_kink(d.uniform({kB, 3}, 0.8, 1.25), 1.0), avoid_kink(d.uniform({kB}, -0.4, 0.4), 0.0),
          avoid_kink(d.uniform({kB}, 0.8, 1.2), 1.0),    avoid_kink(d.uniform({kB}, 0.7, 1.3), 1.0),
          d.uniform({kB}, 0.4, 1.5),                     d.uniform({kB}, 0.01, 0.08),
          avoid_kink(d.uniform({kB}, 0.7, 2.0), 1.75)};
}

torch::Tensor unit_embeddings(Draw& d, std::int64_t p, std::int64_t dim) {
  auto e = d.normal({kB, p, dim});
  return e / e.norm(2, -1, true);
}

Problem make_problem(const std::string& op, Draw& d, std::uint64_t seed) {
  const auto specs = ParamSpecSet::defaults();
  if (op == "white_balance") {
    return {{unit_image(d), d.uniform({kB, 3}, 0.6, 1.6)}, {true, true},
            [](const Inputs& in) { return apply_white_balance(in[0], in[1]); }};
  }
  if (op == "exposure") {
    return {{unit_image(d), d.uniform({kB}, -1.0, 1.0)}, {true, true},
            [](const Inputs& in) { return apply_exposure(in[0], in[1]); }};
  }
  if (op == "contrast") {
    return {{unit_image(d), d.uniform({kB}, 0.6, 1.4)}, {true, true},
            [](const Inputs& in) { return apply_contrast(in[0], in[1]); }};
  }
  if (op == "saturation") {
    return {{unit_image(d), d.uniform({kB}, 0.2, 1.8)}, {true, true},
            [](const Inputs& in) { return apply_saturation(in[0], in[1]); }};
  }
  if (op == "blur") {
    return {{unit_image(d), d.uniform({kB}, 0.3, 2.5)}, {true, true},
            [](const Inputs& in) { return apply_blur(in[0], in[1], 3.0); }};
  }
  if (op == "grain") {
    auto noise = d.normal({kB, 1, kH, kW});
    return {{unit_image(d), d.uniform({kB}, 0.01, 0.12), d.uniform({kB}, 0.6, 2.8), noise},
            {true, true, true, false},
            [](const Inputs& in) { return apply_grain(in[0], in[1], in[2], 3.0, in[3]); }};
  }
  if (op == "edit_chain") {
    Inputs in = {d.uniform({kB, 3, kH, kW}, -0.5, 0.3)};
    const auto p = random_params(d);
    in.insert(in.end(), p.begin(), p.end());
    return {in, std::vector<bool>(in.size(), true), [specs, seed](const Inputs& v) {
              return edit_chain(ImageBatch{v[0], IntensityDomain::kSigned}, params_from(v, 1),
                                specs, seed)
                  .data;
            }};
  }
  if (op == "map_raw_params") {
    return {{d.uniform({kB, specs.raw_dim()}, -2.0, 2.0)}, {true}, [specs](const Inputs& in) {
              const auto p = map_raw_params(in[0], specs);
              return torch::cat({p.wb_gain.flatten(), p.ev, p.contrast, p.saturation,
                                 p.blur_sigma, p.grain_amp, p.grain_sigma});
            }};
  }
  if (op == "low_pass") {
    return {{d.uniform({kB, 3, kH, kW}, -1.0, 1.0), d.uniform({kB}, 0.5, 3.0)}, {true, true},
            [](const Inputs& in) { return gaussian_filter(in[0], in[1], gaussian_kernel_size(3.0)); }};
  }
  if (op == "decompose") {
    return {{d.uniform({kB, 3, kH, kW}, -1.0, 1.0)}, {true}, [](const Inputs& in) {
              const auto s = decompose_high_frequency(in[0], 2.0);
              return torch::cat({s.low.flatten(), s.high.flatten()});
            }};
  }
  if (op == "recompose") {
    return {{d.uniform({kB, 3, kH, kW}, -0.5, 0.5), d.uniform({kB, 3, kH, kW}, -0.4, 0.4)},
            {true, true}, [](const Inputs& in) { return recompose(in[0], in[1], 0.7); }};
  }
  if (op == "gan_hinge_d" || op == "gan_logistic_d") {
    const auto kind = op == "gan_hinge_d" ? GanKind::kHinge : GanKind::kLogistic;
    const auto r = avoid_kink(d.normal({kB, 1, 3, 3}) * 1.5, 1.0);
    const auto f = avoid_kink(d.normal({kB, 1, 3, 3}) * 1.5, -1.0);
    return {{r, f}, {true, true},
            [kind](const Inputs& in) { return gan_loss_d(kind, in[0], in[1]); }};
  }
  if (op == "gan_hinge_g" || op == "gan_logistic_g") {
    const auto kind = op == "gan_hinge_g" ? GanKind::kHinge : GanKind::kLogistic;
    return {{d.normal({kB, 1, 3, 3}) * 1.5}, {true},
            [kind](const Inputs& in) { return gan_loss_g(kind, in[0]); }};
  }
  if (op == "patch_nce") {
    // Two layers; keys are detached by the loss, so only queries are checked.
    return {{unit_embeddings(d, 6, 4), unit_embeddings(d, 5, 3), unit_embeddings(d, 6, 4),
             unit_embeddings(d, 5, 3)},
            {true, true, false, false}, [](const Inputs& in) {
              return patch_nce({in[0], in[1]}, {in[2], in[3]}, 0.5);
            }};
  }
  if (op == "identity_l1") {
    const auto a = d.uniform({kB, 3, kH, kW}, -1.0, 1.0);
    const auto b = a + avoid_kink(d.uniform({kB, 3, kH, kW}, -0.5, 0.5), 0.0);
    return {{a, b}, {true, true}, [](const Inputs& in) { return identity_l1(in[0], in[1]); }};
  }
  if (op == "low_freq_anchor") {
    FrequencyConfig cfg;
    cfg.anchor_sigmas = {1.0, 2.0};
    cfg.anchor_weights = {0.5, 0.5};
    return {{d.uniform({kB, 3, kH, kW}, -1.0, 1.0), d.uniform({kB, 3, kH, kW}, -1.0, 1.0)},
            {true, true}, [cfg](const Inputs& in) { return low_freq_anchor(in[0], in[1], cfg); }};
  }
  if (op == "edit_reg") {
    const auto p = random_params(d);
    return {p, std::vector<bool>(p.size(), true),
            [specs](const Inputs& in) { return edit_reg(params_from(in, 0), specs); }};
  }
  throw InvalidArgument("gradcheck: unknown operation '" + op + "'");
}

double scalarize(const torch::Tensor& y, const torch::Tensor& w) { return (y * w).sum().item<double>(); }

/// Max relative error over one instance and the number of coordinates checked.
std::pair<double, std::int64_t> check_instance(Problem& prob, Draw& d, const GradcheckOptions& o) {
  torch::Tensor w;
  {
    torch::NoGradGuard g;
    const auto y0 = prob.f(prob.inputs);
    w = d.uniform(y0.sizes(), 0.5, 1.5);
  }

  Inputs leaves;
  std::vector<torch::Tensor> wrt;
  for (std::size_t i = 0; i < prob.inputs.size(); ++i) {
    auto leaf = prob.inputs[i].clone().set_requires_grad(prob.differentiable[i]);
    if (prob.differentiable[i]) wrt.push_back(leaf);
    leaves.push_back(leaf);
  }
  const auto s = (prob.f(leaves) * w).sum();
  const auto grads = torch::autograd::grad({s}, wrt, {}, false, false, true);

  std::vector<double> analytic, numeric;
  std::size_t gi = 0;
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < prob.inputs.size(); ++i) {
    if (!prob.differentiable[i]) continue;
    const auto grad = grads[gi].defined() ? grads[gi].contiguous()
                                          : torch::zeros_like(prob.inputs[i]);
    ++gi;
    const auto n = prob.inputs[i].numel();
    std::vector<std::int64_t> coords;
    if (n <= o.coords_per_input) {
      for (std::int64_t j = 0; j < n; ++j) coords.push_back(j);
    } else {
      const auto perm = torch::randperm(n, d.gen(), torch::kInt64);
      for (std::int64_t j = 0; j < o.coords_per_input; ++j) coords.push_back(perm[j].item<std::int64_t>());
    }
    for (const auto j : coords) {
      Inputs shifted = prob.inputs;
      auto x = prob.inputs[i].clone();
      auto flat = x.view({-1});
      const double x0 = flat[j].item<double>();
      shifted[i] = x;
      flat[j] = x0 + o.step;
      const double fp = scalarize(prob.f(shifted), w);
      flat[j] = x0 - o.step;
      const double fm = scalarize(prob.f(shifted), w);
      numeric.push_back((fp - fm) / (2.0 * o.step));
      analytic.push_back(grad.view({-1})[j].item<double>());
    }
  }
  double diff = 0.0, scale = 1e-12;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
  }
  return {diff / scale, static_cast<std::int64_t>(analytic.size())};
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {
      "white_balance",  "exposure",       "contrast",   "saturation",  "blur",
      "grain",          "edit_chain",     "map_raw_params", "low_pass", "decompose",
      "recompose",      "gan_hinge_d",    "gan_hinge_g", "gan_logistic_d", "gan_logistic_g",
      "patch_nce",      "identity_l1",    "low_freq_anchor", "edit_reg"};
  return ops;
}

GradcheckEntry run_gradcheck_op(const std::string& op, const GradcheckOptions& opts) {
  const auto& ops = gradcheck_ops();
  const auto it = std::find(ops.begin(), ops.end(), op);
  if (it == ops.end()) throw InvalidArgument("gradcheck: unknown operation '" + op + "'");
  const auto index = static_cast<std::uint64_t>(it - ops.begin());
  GradcheckEntry entry{op, 0.0, 0, false};
  for (int k = 0; k < opts.instances; ++k) {
    const auto seed = derive_seed(opts.seed, RngStream::kTest, (index << 32) | static_cast<std::uint64_t>(k));
    Draw d(seed);
    auto prob = make_problem(op, d, seed);
    const auto [err, n] = check_instance(prob, d, opts);
    entry.max_rel_error = std::max(entry.max_rel_error, err);
    entry.coordinates += n;
  }
  entry.passed = entry.max_rel_error <= opts.tolerance;
  return entry;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  for (const auto& op : gradcheck_ops()) report.entries.push_back(run_gradcheck_op(op, opts));
  return report;
}

}  // namespace fddb
