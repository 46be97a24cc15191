#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "fddb/checkpoint.hpp"
#include "fddb/config.hpp"
#include "fddb/data.hpp"
#include "fddb/metrics.hpp"
#include "fddb/networks.hpp"
#include "fddb/optim.hpp"
#include "fddb/scheduler.hpp"

namespace fddb {

/// The four learnable modules.
struct Networks {
  ParamPredictor predictor{nullptr};
  FreeGenerator free_gen{nullptr};
  Discriminator disc{nullptr};
  ProjectionHeads heads{nullptr};

  /// Seeded initialization; the predictor starts at the identity edit.
  static Networks build(const TrainConfig& cfg);

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);
};

/// Forward pass of the full translator: y = clip(y_edit + g * HP(y_free)).
struct Translation {
  torch::Tensor y;       // final output, signed
  torch::Tensor y_edit;  // editing branch alone
  torch::Tensor y_high;  // high-frequency residual of the free branch
  EditParams params;
};

Translation translate_batch(Networks& nets, const TrainConfig& cfg, const torch::Tensor& x,
                            double g_res, std::uint64_t noise_seed);

class Trainer {
 public:
  /// The datasets must outlive the trainer.
  Trainer(TrainConfig cfg, const DomainDataset& synthetic, const DomainDataset& real);

  /// Draws the next batch pair and runs one step.
  MetricsRow step();
  /// One discriminator update followed by one generator update, then the
  /// scheduler observation. Throws TrainingDivergence on a non-finite loss.
  MetricsRow train_step(const BatchPair& batch);

  /// Number of completed iterations.
  std::int64_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  Networks& networks() { return nets_; }
  const StageScheduler& scheduler() const { return scheduler_; }

  Checkpoint to_checkpoint() const;
  /// Restores weights, optimizer, scheduler, sampler and iteration. A config
  /// fingerprint mismatch is reported through `warn` but does not fail.
  void restore(const Checkpoint& ckpt,
               const std::function<void(const std::string&)>& warn = nullptr);

 private:
  TrainConfig cfg_;
  Networks nets_;
  UnpairedSampler sampler_;
  StageScheduler scheduler_;
  Adam opt_edit_;
  Adam opt_free_;
  Adam opt_disc_;
  std::int64_t iteration_ = 0;
};

struct FitOptions {
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const std::string&)> log;  // progress and warnings
  std::int64_t log_every = 0;                    // 0: quiet
};

struct FitResult {
  std::filesystem::path final_checkpoint;
  std::int64_t iterations = 0;
  std::optional<std::int64_t> switch_iteration;
};

/// Trains cfg.iterations steps, writing one metrics row per iteration and a
/// checkpoint at the stage switch, every cfg.checkpoint_every iterations and
/// at the end. On a step error a final checkpoint is written before the error
/// propagates.
FitResult fit(const TrainConfig& cfg, const FitOptions& opts = {});

/// Checkpoint file name for iteration `iter`.
std::string checkpoint_name(std::int64_t iter);

/// Rebuilds the config stored in a checkpoint and its networks.
struct LoadedModel {
  TrainConfig cfg;
  Networks nets;
  double g_res = 0.0;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace fddb
