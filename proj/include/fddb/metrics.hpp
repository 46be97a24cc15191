#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fddb/losses.hpp"
#include "fddb/scheduler.hpp"

namespace fddb {

struct MetricsRow {
  LossReport report;
  Stage stage = Stage::kEdit;
  double g_res = 0.0;
  std::array<double, 9> param_means{};  // see batch_means()
  double low_open = 0.0;                // anchor loss with the gate fully open
  std::string event;                    // "stage_switch" or empty
};

/// Column names in file order.
const std::vector<std::string>& metrics_columns();
std::string format_metrics_row(const MetricsRow& row);

/// Streams rows into `<path>.tmp` and renames it onto `path` on close(). With
/// `resume_after`, rows of an existing file up to that iteration are kept.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::filesystem::path path, std::int64_t resume_after = -1);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const MetricsRow& row);
  void close();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
};

}  // namespace fddb
