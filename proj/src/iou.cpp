#include "fddb/iou.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/image_io.hpp"

namespace fddb {

namespace fs = std::filesystem;

IouAccumulator::IouAccumulator(int num_classes) {
  if (num_classes < 1) throw InvalidArgument("eval_iou: number of classes must be positive");
  inter_.assign(static_cast<std::size_t>(num_classes), 0);
  union_.assign(static_cast<std::size_t>(num_classes), 0);
}

void IouAccumulator::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt) {
  if (pred.size() != gt.size()) throw InvalidArgument("eval_iou: mask sizes differ");
  const auto c = static_cast<std::int32_t>(inter_.size());
  std::vector<std::int64_t> pc(inter_.size(), 0), gc(inter_.size(), 0), ic(inter_.size(), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred[i], g = gt[i];
    if (p < 0 || p >= c || g < 0 || g >= c) {
      throw InvalidArgument("eval_iou: label outside [0, " + std::to_string(c) + ")");
    }
    ++pc[static_cast<std::size_t>(p)];
    ++gc[static_cast<std::size_t>(g)];
    if (p == g) ++ic[static_cast<std::size_t>(p)];
  }
  for (std::size_t k = 0; k < inter_.size(); ++k) {
    inter_[k] += ic[k];
    union_[k] += pc[k] + gc[k] - ic[k];
  }
}

std::vector<double> IouAccumulator::iou() const {
  std::vector<double> out(inter_.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < inter_.size(); ++k) {
    if (union_[k] > 0) out[k] = static_cast<double>(inter_[k]) / static_cast<double>(union_[k]);
  }
  return out;
}

double IouAccumulator::miou() const {
  double sum = 0.0;
  int n = 0;
  for (double v : iou()) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

std::set<fs::path> mask_files(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("mask directory not found: " + root.string());
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.insert(fs::relative(e.path(), root));
  }
  return out;
}

}  // namespace

IouDirResult eval_iou_dirs(const fs::path& pred_dir, const fs::path& gt_dir, int num_classes) {
  const auto preds = mask_files(pred_dir);
  const auto gts = mask_files(gt_dir);
  for (const auto& p : preds) {
    if (!gts.count(p)) throw ConfigError("no ground-truth mask for " + p.string());
  }
  for (const auto& g : gts) {
    if (!preds.count(g)) throw ConfigError("no predicted mask for " + g.string());
  }
  IouDirResult result{IouAccumulator(num_classes), 0, {}};
  for (const auto& rel : preds) {
    try {
      const auto p = read_label_mask(pred_dir / rel);
      const auto g = read_label_mask(gt_dir / rel);
      if (p.rows != g.rows || p.cols != g.cols) {
        throw InvalidArgument("mask sizes differ (" + std::to_string(p.cols) + "x" +
                              std::to_string(p.rows) + " vs " + std::to_string(g.cols) + "x" +
                              std::to_string(g.rows) + ")");
      }
      const auto n = static_cast<std::size_t>(p.total());
      result.acc.add({p.ptr<std::int32_t>(), n}, {g.ptr<std::int32_t>(), n});
      ++result.pairs;
    } catch (const std::exception& e) {
      result.errors.push_back({rel.string(), e.what()});
    }
  }
  return result;
}

std::string format_iou_csv(const IouAccumulator& acc) {
  std::ostringstream o;
  char buf[40];
  o << "class,intersection,union,iou\n";
  const auto iou = acc.iou();
  for (std::size_t k = 0; k < iou.size(); ++k) {
    o << k << ',' << acc.intersection()[k] << ',' << acc.union_counts()[k] << ',';
    if (!std::isnan(iou[k])) {
      std::snprintf(buf, sizeof(buf), "%.17g", iou[k]);
      o << buf;
    }
    o << '\n';
  }
  const double m = acc.miou();
  o << "mIoU,,,";
  if (!std::isnan(m)) {
    std::snprintf(buf, sizeof(buf), "%.17g", m);
    o << buf;
  }
  o << '\n';
  return o.str();
}

}  // namespace fddb
