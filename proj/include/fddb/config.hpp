#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fddb/imaging_ops.hpp"
#include "fddb/losses.hpp"
#include "fddb/params.hpp"
#include "fddb/scheduler.hpp"

namespace fddb {

struct DataConfig {
  std::string synthetic_dir;
  std::string real_dir;
  std::int64_t height = 256;
  std::int64_t width = 256;
  std::int64_t batch_size = 4;
  std::uint64_t seed = 0;
};

struct NetworkConfig {
  std::int64_t gen_width = 32;
  std::int64_t res_blocks = 9;
  std::int64_t disc_width = 32;
  std::vector<std::string> tap_ids = {"enc0", "enc1", "enc2", "res4", "dec0"};
  std::int64_t nce_patches = 256;
  std::int64_t proj_dim = 256;
  double nce_tau = 0.07;
};

struct OptimConfig {
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
};

struct TrainConfig {
  DataConfig data;
  std::int64_t iterations = 1;
  std::uint64_t seed = 0;
  OptimConfig optim;
  LossWeights weights;
  FrequencyConfig freq;
  SchedulerConfig sched;
  NetworkConfig net;
  ParamSpecSet specs = ParamSpecSet::defaults();
  std::string checkpoint_dir = "checkpoints";
  std::int64_t checkpoint_every = 0;  // 0: only at the switch and at the end
  std::string metrics_path = "metrics.csv";

  void validate() const;
  /// Canonical `key = value` rendering; parse_config(to_text()) round-trips.
  std::string to_text() const;
  /// 16 hex digits identifying to_text().
  std::string fingerprint() const;
};

/// Applies `key = value` lines (dotted keys, '#' comments) on top of the
/// defaults. Unknown keys and malformed values throw ConfigError.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
/// Applies a single override, e.g. from the command line.
void apply_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

}  // namespace fddb
