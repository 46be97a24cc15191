#include "fddb/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "fddb/errors.hpp"

namespace fddb {

StageMultipliers stage_multipliers(Stage stage) {
  if (stage == Stage::kEdit) return {1.0, 0.0, 0.0, 1.0, 0.0};
  return {1.0, 1.0, 1.0, 0.0, 1.0};
}

void SchedulerConfig::validate() const {
  if (window < 2) throw ConfigError("scheduler window must hold at least 2 observations");
  if (!(eps_loss >= 0.0) || !(eps_param >= 0.0)) {
    throw ConfigError("scheduler thresholds must be non-negative");
  }
  if (min_iterations < 0) throw ConfigError("min_iterations must be non-negative");
  if (ramp_len < 1) throw ConfigError("ramp_len must be at least 1");
  if (max_rejections < 1) throw ConfigError("max_rejections must be at least 1");
  for (double v : param_scale) {
    if (!(v > 0.0)) throw ConfigError("scheduler parameter scales must be positive");
  }
}

UpdateAllocation update_allocation(const StageState& state) {
  if (state.stage == Stage::kEdit) {
    return {FakeSource::kEditOutput, GanKind::kHinge, true, false};
  }
  return {FakeSource::kFinalOutput, GanKind::kLogistic, false, true};
}

double gate_value(const StageState& state, std::int64_t iteration, std::int64_t ramp_len) {
  if (state.stage == Stage::kEdit || !state.switch_iteration) return 0.0;
  const double t = static_cast<double>(iteration - *state.switch_iteration) /
                   static_cast<double>(std::max<std::int64_t>(ramp_len, 1));
  return std::clamp(t, 0.0, 1.0);
}

StabilityWindow::StabilityWindow(std::size_t capacity, std::size_t width)
    : capacity_(capacity), width_(width), data_(capacity * width, 0.0) {
  if (capacity == 0 || width == 0) throw InvalidArgument("stability window must be non-empty");
}

void StabilityWindow::push(std::span<const double> row) {
  if (row.size() != width_) throw InvalidArgument("stability window row has the wrong width");
  std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * width_));
  head_ = (head_ + 1) % capacity_;
  count_ = std::min(count_ + 1, capacity_);
}

double StabilityWindow::relative_std(std::size_t col, double floor) const {
  if (count_ == 0) return INFINITY;
  double mean = 0.0;
  for (std::size_t r = 0; r < count_; ++r) mean += data_[r * width_ + col];
  mean /= static_cast<double>(count_);
  double var = 0.0;
  for (std::size_t r = 0; r < count_; ++r) {
    const double d = data_[r * width_ + col] - mean;
    var += d * d;
  }
  var /= static_cast<double>(count_);
  return std::sqrt(var) / std::max(std::abs(mean), floor);
}

void StabilityWindow::restore(std::vector<double> storage, std::size_t head, std::size_t count) {
  if (storage.size() != capacity_ * width_ || head >= capacity_ || count > capacity_) {
    throw InvalidArgument("stability window state does not match its capacity");
  }
  data_ = std::move(storage);
  head_ = head;
  count_ = count;
}

StageScheduler::StageScheduler(SchedulerConfig cfg)
    : cfg_(cfg),
      window_(static_cast<std::size_t>(std::max<std::int64_t>(cfg.window, 1)), 1 + kParamColumns) {
  cfg_.validate();
  state_.multipliers = stage_multipliers(Stage::kEdit);
}

bool StageScheduler::stable() const {
  if (!window_.full()) return false;
  if (window_.relative_std(0) > cfg_.eps_loss) return false;
  for (std::size_t c = 1; c < window_.width(); ++c) {
    if (window_.relative_std(c, cfg_.param_scale[c - 1]) > cfg_.eps_param) return false;
  }
  return true;
}

const StageState& StageScheduler::observe(std::int64_t iteration, double g_loss,
                                          std::span<const double> param_means) {
  if (param_means.size() != kParamColumns) {
    throw InvalidArgument("scheduler expects 9 editing-parameter means");
  }
  bool finite = std::isfinite(g_loss);
  for (double v : param_means) finite = finite && std::isfinite(v);
  if (!finite) {
    ++rejections_;
    ++total_rejections_;
    if (rejections_ >= cfg_.max_rejections) {
      throw TrainingDivergence("observation", "scheduler rejected " +
                                                  std::to_string(rejections_) +
                                                  " consecutive non-finite observations");
    }
    state_.g_res = gate_value(state_, iteration, cfg_.ramp_len);
    return state_;
  }
  rejections_ = 0;
  std::array<double, 1 + kParamColumns> row{};
  row[0] = g_loss;
  std::copy(param_means.begin(), param_means.end(), row.begin() + 1);
  window_.push(row);

  if (state_.stage == Stage::kEdit && iteration >= cfg_.min_iterations && stable()) {
    state_.stage = Stage::kFree;
    state_.multipliers = stage_multipliers(Stage::kFree);
    state_.switch_iteration = iteration;
  }
  state_.g_res = gate_value(state_, iteration, cfg_.ramp_len);
  return state_;
}

StageState StageScheduler::at(std::int64_t iteration) const {
  StageState s = state_;
  s.g_res = gate_value(s, iteration, cfg_.ramp_len);
  return s;
}

void StageScheduler::restore(const StageState& state, StabilityWindow window,
                             std::int64_t rejections, std::int64_t total_rejections) {
  if (window.capacity() != window_.capacity() || window.width() != window_.width()) {
    throw InvalidArgument("restored stability window has a different shape");
  }
  state_ = state;
  window_ = std::move(window);
  rejections_ = rejections;
  total_rejections_ = total_rejections;
}

}  // namespace fddb
