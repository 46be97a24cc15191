#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace fddb {

/// Decodes any 8-bit PNG/JPEG as RGB. Throws DecodeError naming the file.
cv::Mat read_rgb8(const std::filesystem::path& path);

/// Single-channel label image (8 or 16 bit) as CV_32S.
cv::Mat read_label_mask(const std::filesystem::path& path);

/// 8-bit RGB -> (3, H, W) float32 in [-1, 1]; optional bilinear resize first.
torch::Tensor rgb8_to_signed(const cv::Mat& rgb, std::optional<cv::Size> size = std::nullopt);

/// (3, H, W) signed tensor -> 8-bit RGB, rounding to nearest.
cv::Mat signed_to_rgb8(const torch::Tensor& chw);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// PNG-encodes an RGB (or single-channel) image and writes it atomically.
void write_png_atomic(const std::filesystem::path& path, const cv::Mat& image);

bool is_image_file(const std::filesystem::path& path);

}  // namespace fddb
