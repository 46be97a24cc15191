#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fddb/losses.hpp"

namespace fddb {

enum class Stage { kEdit, kFree };

struct StageState {
  Stage stage = Stage::kEdit;
  double g_res = 0.0;
  StageMultipliers multipliers{};
  std::optional<std::int64_t> switch_iteration;
};

/// Multipliers each stage prescribes.
StageMultipliers stage_multipliers(Stage stage);

struct SchedulerConfig {
  std::int64_t window = 200;
  double eps_loss = 0.1;
  double eps_param = 0.05;
  std::int64_t min_iterations = 1000;
  std::int64_t ramp_len = 500;
  std::int64_t max_rejections = 10;
  // Floor on |mean| per parameter column; the trainer sets each parameter's range width.
  std::array<double, 9> param_scale{1.5, 1.5, 1.5, 3.0, 1.0, 2.0, 3.0, 0.15, 2.5};

  void validate() const;
};

enum class FakeSource { kEditOutput, kFinalOutput };

/// Which samples D sees as fake, which objective is used, and which generator
/// parameters receive updates.
struct UpdateAllocation {
  FakeSource fake_source = FakeSource::kEditOutput;
  GanKind gan_kind = GanKind::kHinge;
  bool train_edit_branch = true;
  bool train_free_branch = false;
};

UpdateAllocation update_allocation(const StageState& state);

/// 0 in the edit stage; linear ramp 0 -> 1 over `ramp_len` iterations after
/// the switch.
double gate_value(const StageState& state, std::int64_t iteration, std::int64_t ramp_len);

/// Fixed-capacity ring buffer of observation rows.
class StabilityWindow {
 public:
  StabilityWindow(std::size_t capacity, std::size_t width);

  void push(std::span<const double> row);
  bool full() const { return count_ == capacity_; }
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t width() const { return width_; }

  /// std / max(|mean|, floor) of column `col` over the buffered rows.
  double relative_std(std::size_t col, double floor = 1e-6) const;

  // Raw state for checkpointing.
  const std::vector<double>& storage() const { return data_; }
  std::size_t head() const { return head_; }
  void restore(std::vector<double> storage, std::size_t head, std::size_t count);

 private:
  std::size_t capacity_;
  std::size_t width_;
  std::vector<double> data_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Two-stage controller. Column 0 of the window is the generator loss, the
/// remaining columns are the editing-parameter batch means.
class StageScheduler {
 public:
  static constexpr std::size_t kParamColumns = 9;

  explicit StageScheduler(SchedulerConfig cfg);

  /// Records one iteration. May switch edit -> free (once). Non-finite
  /// observations are rejected; `max_rejections` in a row throw
  /// TrainingDivergence.
  const StageState& observe(std::int64_t iteration, double g_loss,
                            std::span<const double> param_means);

  /// State with g_res evaluated for `iteration`.
  StageState at(std::int64_t iteration) const;
  const StageState& state() const { return state_; }
  const SchedulerConfig& config() const { return cfg_; }
  const StabilityWindow& window() const { return window_; }
  std::int64_t consecutive_rejections() const { return rejections_; }
  std::int64_t total_rejections() const { return total_rejections_; }

  void restore(const StageState& state, StabilityWindow window, std::int64_t rejections,
               std::int64_t total_rejections);

 private:
  bool stable() const;

  SchedulerConfig cfg_;
  StageState state_;
  StabilityWindow window_;
  std::int64_t rejections_ = 0;
  std::int64_t total_rejections_ = 0;
};

}  // namespace fddb
