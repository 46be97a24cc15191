#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace fddb {

enum class EditOp { kWhiteBalance, kExposure, kContrast, kSaturation, kBlur, kGrainAmp, kGrainSigma };
enum class Mapping { kSigmoid, kTanh, kLogTanh };

inline constexpr std::array<EditOp, 7> kAllEditOps = {
    EditOp::kWhiteBalance, EditOp::kExposure, EditOp::kContrast, EditOp::kSaturation,
    EditOp::kBlur,         EditOp::kGrainAmp, EditOp::kGrainSigma};

std::string_view to_string(EditOp op);
std::string_view to_string(Mapping m);
EditOp parse_edit_op(std::string_view name);
Mapping parse_mapping(std::string_view name);

/// How one raw network output is turned into a physical editing parameter.
struct ParamSpec {
  EditOp op = EditOp::kExposure;
  bool enabled = true;
  Mapping mapping = Mapping::kTanh;
  double range_lo = 0.0;
  double range_hi = 1.0;
  double identity_ref = 0.0;  // value at which the operator is a no-op

  /// Raw entries consumed from the predictor output (3 for white balance).
  int width() const { return op == EditOp::kWhiteBalance ? 3 : 1; }
  void validate() const;
};

/// The seven specs, indexed by EditOp, in chain order.
class ParamSpecSet {
 public:
  static ParamSpecSet defaults();

  const ParamSpec& operator[](EditOp op) const { return specs_[static_cast<std::size_t>(op)]; }
  ParamSpec& operator[](EditOp op) { return specs_[static_cast<std::size_t>(op)]; }

  /// Total raw vector length over enabled specs.
  int raw_dim() const;
  double blur_sigma_max() const { return (*this)[EditOp::kBlur].range_hi; }
  double grain_sigma_max() const { return (*this)[EditOp::kGrainSigma].range_hi; }
  void validate() const;

  /// Per-raw-entry bias that puts the mapped value at (or, for ranges whose
  /// identity sits on a sigmoid bound, near) the identity reference.
  std::vector<double> identity_raw_offsets(double boundary_margin = 0.01) const;

 private:
  std::array<ParamSpec, 7> specs_{};
};

/// Per-sample physical editing parameters. Scalars are shaped (B), gains (B, 3).
struct EditParams {
  torch::Tensor wb_gain;
  torch::Tensor ev;
  torch::Tensor contrast;
  torch::Tensor saturation;
  torch::Tensor blur_sigma;
  torch::Tensor grain_amp;
  torch::Tensor grain_sigma;

  std::int64_t batch() const { return ev.size(0); }
  const torch::Tensor& field(EditOp op) const;
  EditParams detach() const;

  static EditParams identity(std::int64_t batch, const ParamSpecSet& specs,
                             torch::TensorOptions options = torch::kFloat32);
};

/// Batch means in the order (wb_r, wb_g, wb_b, ev, contrast, saturation, blur,
/// grain_amp, grain_sigma).
std::array<double, 9> batch_means(const EditParams& p);
/// Range width per batch_means column.
std::array<double, 9> range_widths(const ParamSpecSet& specs);

/// Maps raw predictor outputs (B, raw_dim) onto physical parameters. Disabled
/// specs produce their identity reference.
EditParams map_raw_params(const torch::Tensor& raw, const ParamSpecSet& specs);

}  // namespace fddb
