#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "fddb/checkpoint.hpp"

namespace fddb {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with explicit per-parameter moment buffers and step counts, so its
/// state can be written to and read from a checkpoint bit-exactly. Parameters
/// without a gradient are left untouched, including their state.
class Adam {
 public:
  using NamedParams = std::vector<std::pair<std::string, torch::Tensor>>;

  Adam(NamedParams params, AdamOptions opts);

  void zero_grad();
  void step();

  const NamedParams& params() const { return params_; }
  const AdamOptions& options() const { return opts_; }

  /// Adds `<prefix>/m/<name>`, `<prefix>/v/<name>` and `<prefix>/step`.
  void save_state(const std::string& prefix, Checkpoint& ckpt) const;
  void load_state(const std::string& prefix, const Checkpoint& ckpt);

 private:
  NamedParams params_;
  AdamOptions opts_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  std::vector<std::int64_t> steps_;
};

/// Named parameters of a module with `<prefix>/` prepended.
Adam::NamedParams prefixed_parameters(const torch::nn::Module& module, const std::string& prefix);

}  // namespace fddb
