#include "fddb/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fddb/errors.hpp"

namespace fddb {

cv::Mat read_rgb8(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DecodeError(path.string(), "cannot decode image " + path.string());
  if (raw.depth() != CV_8U) {
    throw DecodeError(path.string(), "image is not 8-bit: " + path.string());
  }
  cv::Mat rgb;
  switch (raw.channels()) {
    case 1: cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
    default:
      throw DecodeError(path.string(), "unsupported channel count in " + path.string());
  }
  return rgb;
}

cv::Mat read_label_mask(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DecodeError(path.string(), "cannot decode mask " + path.string());
  if (raw.channels() != 1 || (raw.depth() != CV_8U && raw.depth() != CV_16U)) {
    throw DecodeError(path.string(),
                      "mask must be a single-channel 8/16-bit image: " + path.string());
  }
  cv::Mat labels;
  raw.convertTo(labels, CV_32S);
  return labels;
}

torch::Tensor rgb8_to_signed(const cv::Mat& rgb, std::optional<cv::Size> size) {
  cv::Mat src = rgb;
  if (size && (size->width != rgb.cols || size->height != rgb.rows)) {
    cv::resize(rgb, src, *size, 0.0, 0.0, cv::INTER_LINEAR);
  }
  cv::Mat contiguous = src.isContinuous() ? src : src.clone();
  auto t = torch::from_blob(contiguous.data, {contiguous.rows, contiguous.cols, 3}, torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kFloat32);
  return (t / 255.0f) * 2.0f - 1.0f;
}

cv::Mat signed_to_rgb8(const torch::Tensor& chw) {
  torch::NoGradGuard no_grad;
  const auto u8 = torch::round((chw.detach().to(torch::kFloat64).clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0)
                      .to(torch::kUInt8)
                      .permute({1, 2, 0})
                      .contiguous();
  cv::Mat out(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3);
  std::memcpy(out.data, u8.data_ptr<std::uint8_t>(), static_cast<std::size_t>(u8.numel()));
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_png_atomic(const std::filesystem::path& path, const cv::Mat& image) {
  cv::Mat bgr;
  if (image.channels() == 3) {
    cv::cvtColor(image, bgr, cv::COLOR_RGB2BGR);
  } else {
    bgr = image;
  }
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", bgr, buf)) {
    throw std::runtime_error("PNG encoding failed for " + path.string());
  }
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace fddb
