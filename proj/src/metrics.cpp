#include "fddb/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace fddb {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "iter",   "stage",  "g_res",      "L_gan",        "L_nce",  "L_id",      "L_edit",
      "L_low",  "total_G", "loss_D",    "p_wb",         "p_ev",   "p_contrast", "p_saturation",
      "p_blur", "p_grain_amp", "p_grain_sigma", "L_low_open", "event"};
  return cols;
}

std::string format_metrics_row(const MetricsRow& row) {
  const auto& r = row.report;
  const auto& p = row.param_means;
  const double wb = (p[0] + p[1] + p[2]) / 3.0;
  std::ostringstream o;
  o << r.iteration << ',' << (row.stage == Stage::kEdit ? "edit" : "free") << ','
    << num(row.g_res);
  for (double v : r.raw) o << ',' << num(v);
  o << ',' << num(r.total) << ',' << num(r.loss_d) << ',' << num(wb);
  for (std::size_t i = 3; i < p.size(); ++i) o << ',' << num(p[i]);
  o << ',' << num(row.low_open) << ',' << row.event;
  return o.str();
}

MetricsWriter::MetricsWriter(std::filesystem::path path, std::int64_t resume_after)
    : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  tmp_ = path_;
  tmp_ += ".tmp";
  std::vector<std::string> kept;
  if (resume_after >= 0 && std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::int64_t iter = 0;
      const auto comma = line.find(',');
      const auto [ptr, ec] = std::from_chars(line.data(), line.data() + comma, iter);
      if (ec == std::errc() && iter <= resume_after) kept.push_back(line);
    }
  }
  out_.open(tmp_, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open metrics file " + tmp_.string());
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
  out_ << '\n';
  for (const auto& line : kept) out_ << line << '\n';
  out_.flush();
}

MetricsWriter::~MetricsWriter() {
  try {
    close();
  } catch (...) {
  }
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
}

void MetricsWriter::close() {
  if (!out_.is_open()) return;
  out_.close();
  std::filesystem::rename(tmp_, path_);
}

}  // namespace fddb
