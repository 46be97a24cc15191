#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "fddb/imaging_ops.hpp"
#include "fddb/params.hpp"

namespace fddb {

enum class GanKind { kHinge, kLogistic };

/// Discriminator loss, averaged over batch and patch positions.
/// hinge: E[relu(1 - real)] + E[relu(1 + fake)];
/// logistic: E[softplus(-real)] + E[softplus(fake)].
torch::Tensor gan_loss_d(GanKind kind, const torch::Tensor& real_logits,
                         const torch::Tensor& fake_logits);

/// Generator loss: hinge -E[fake], logistic (non-saturating) E[softplus(-fake)].
torch::Tensor gan_loss_g(GanKind kind, const torch::Tensor& fake_logits);

/// PatchNCE over layers of (B, P, D) unit embeddings. Each query's positive is
/// the key at the same index; the other keys of the same sample and layer are
/// negatives. Keys are detached. Mean over queries, then over layers.
torch::Tensor patch_nce(const std::vector<torch::Tensor>& queries,
                        const std::vector<torch::Tensor>& keys, double tau);

/// Mean absolute difference.
torch::Tensor identity_l1(const torch::Tensor& x_real, const torch::Tensor& x_hat);

/// sum_i w_i * mean|LP(y; s_i) - LP(y_edit; s_i)| on unit-domain intensities.
torch::Tensor low_freq_anchor(const torch::Tensor& y, const torch::Tensor& y_edit,
                              const FrequencyConfig& cfg);

/// Editing regularizer: for every enabled operator the batch-mean L1 distance
/// to its identity reference (white balance in log space, averaged over
/// channels), plus extra penalties E|blur|, E|grain_amp| and
/// E|(grain_sigma - ref) / (hi - lo)|.
torch::Tensor edit_reg(const EditParams& params, const ParamSpecSet& specs);

struct LossWeights {
  double gan = 1.0;
  double nce = 1.0;
  double id = 5.0;
  double edit = 0.1;
  double low = 10.0;
};

/// Stage multipliers m_gan, m_nce, m_id, m_edit, m_low.
struct StageMultipliers {
  double gan = 1.0;
  double nce = 0.0;
  double id = 0.0;
  double edit = 1.0;
  double low = 0.0;

  bool operator==(const StageMultipliers&) const = default;
};

inline constexpr std::array<std::string_view, 5> kLossTermNames = {"L_gan", "L_nce", "L_id",
                                                                   "L_edit", "L_low"};

/// Unweighted generator terms. An undefined tensor means "not evaluated this
/// step" and contributes 0.
struct LossTerms {
  torch::Tensor gan, nce, id, edit, low;
};

struct LossReport {
  std::int64_t iteration = 0;
  std::array<double, 5> raw{};       // order of kLossTermNames
  std::array<double, 5> weighted{};  // lambda * m * raw
  double total = 0.0;
  double loss_d = 0.0;
};

/// lambda * m weighted sum of the terms; throws TrainingDivergence naming the first
/// non-finite term.
std::pair<torch::Tensor, LossReport> total_generator_loss(const LossTerms& terms,
                                                          const LossWeights& weights,
                                                          const StageMultipliers& m);

}  // namespace fddb
