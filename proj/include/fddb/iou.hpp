#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fddb {

/// Per-class intersection and union pixel counts accumulated over a mask set.
class IouAccumulator {
 public:
  explicit IouAccumulator(int num_classes);

  /// Adds one prediction/ground-truth pair of equal length. Labels outside
  /// [0, num_classes) throw InvalidArgument.
  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt);

  int num_classes() const { return static_cast<int>(inter_.size()); }
  const std::vector<std::int64_t>& intersection() const { return inter_; }
  const std::vector<std::int64_t>& union_counts() const { return union_; }

  /// IoU per class; NaN for classes whose union is empty.
  std::vector<double> iou() const;
  /// Mean over classes with a non-empty union; NaN when there are none.
  double miou() const;

 private:
  std::vector<std::int64_t> inter_;
  std::vector<std::int64_t> union_;
};

struct IouPairError {
  std::string file;
  std::string message;
};

struct IouDirResult {
  IouAccumulator acc;
  std::size_t pairs = 0;
  std::vector<IouPairError> errors;  // skipped pairs
};

/// Pairs masks by relative path. A prediction without a ground-truth
/// counterpart (or vice versa) throws ConfigError; undecodable or
/// size-mismatched pairs are recorded in `errors` and skipped.
IouDirResult eval_iou_dirs(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& gt_dir, int num_classes);

/// CSV with one row per class (class, intersection, union, iou) and a final
/// `mIoU` row. Excluded classes have an empty iou cell.
std::string format_iou_csv(const IouAccumulator& acc);

}  // namespace fddb
