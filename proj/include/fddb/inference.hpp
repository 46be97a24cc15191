#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fddb/trainer.hpp"

namespace fddb {

struct PadPlan {
  std::int64_t top = 0, bottom = 0, left = 0, right = 0;
  std::int64_t max_side() const;
};

/// Smallest padding that makes the size a multiple of 4 and at least 8 per
/// axis, split as evenly as possible (extra pixel at the bottom/right).
PadPlan divisibility_padding(std::int64_t height, std::int64_t width);
/// Pads a (B, C, H, W) tensor by mirroring without repeating the border
/// pixel, folding when the pad exceeds the image.
torch::Tensor reflect_pad(const torch::Tensor& x, const PadPlan& plan);
torch::Tensor crop(const torch::Tensor& x, const PadPlan& plan);

inline constexpr std::int64_t kPaddingWarnThreshold = 16;

struct FileError {
  std::filesystem::path file;
  std::string message;
};

struct BatchSummary {
  std::size_t written = 0;
  std::vector<FileError> errors;
};

using LogFn = std::function<void(const std::string&)>;

/// Translates one signed (3, H, W) image at its own resolution.
torch::Tensor translate_image(LoadedModel& model, const torch::Tensor& image, double g_res);

/// Translates every image below `input_dir` and writes PNGs with the same
/// relative path (extension replaced by .png) below `output_dir`. Unreadable
/// inputs are reported and skipped.
BatchSummary translate_dir(LoadedModel& model, const std::filesystem::path& input_dir,
                           const std::filesystem::path& output_dir,
                           std::optional<double> gate_override, const LogFn& warn = nullptr);

inline const std::vector<double> kDefaultSweepSigmas = {1, 2, 4, 8, 16, 32};

struct ResidualStats {
  double mean_abs = 0.0;
  double l2 = 0.0;
};

/// y_H of a single signed (3, H, W) image for each sigma. The free branch
/// output is used when a model is given, otherwise the image itself.
std::vector<torch::Tensor> residuals_for_sigmas(LoadedModel* model, const torch::Tensor& image,
                                                const std::vector<double>& sigmas);
ResidualStats residual_stats(const torch::Tensor& y_high);

/// Writes `<stem>_sigma<s>.png` residual visualizations (y_H / 2 + 0.5) and
/// `hp_sweep.csv` with columns image, sigma, mean_abs, l2.
BatchSummary hp_sweep_dir(LoadedModel* model, const std::filesystem::path& input_dir,
                          const std::vector<double>& sigmas,
                          const std::filesystem::path& output_dir, const LogFn& warn = nullptr);

}  // namespace fddb
