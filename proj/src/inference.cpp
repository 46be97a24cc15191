#include "fddb/inference.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/image_io.hpp"
#include "fddb/imaging_ops.hpp"
#include "fddb/rng.hpp"

namespace fddb {

namespace fs = std::filesystem;

namespace {

std::int64_t padded_extent(std::int64_t n) {
  const auto k = FreeGeneratorConfig::kDownsampling;
  return std::max<std::int64_t>(2 * k, (n + k - 1) / k * k);
}

torch::Tensor mirror_index(std::int64_t n, std::int64_t before, std::int64_t after) {
  // reflect_indices pads symmetrically; take the asymmetric slice we need.
  const auto pad = std::max(before, after);
  const auto full = reflect_indices(n, pad);
  std::vector<std::int64_t> idx(full.begin() + (pad - before), full.end() - (pad - after));
  return torch::tensor(idx, torch::kInt64);
}

std::vector<fs::path> list_images(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("input directory not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void warn_padding(const PadPlan& plan, const fs::path& file, const LogFn& warn) {
  if (warn && plan.max_side() > kPaddingWarnThreshold) {
    warn("padding " + std::to_string(plan.max_side()) + " px exceeds " +
         std::to_string(kPaddingWarnThreshold) + " px per side for " + file.string());
  }
}

std::string sigma_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", s);
  return buf;
}

}  // namespace

std::int64_t PadPlan::max_side() const { return std::max({top, bottom, left, right}); }

PadPlan divisibility_padding(std::int64_t height, std::int64_t width) {
  if (height < 1 || width < 1) throw InvalidArgument("image must be non-empty");
  const auto ph = padded_extent(height) - height;
  const auto pw = padded_extent(width) - width;
  return {ph / 2, ph - ph / 2, pw / 2, pw - pw / 2};
}

torch::Tensor reflect_pad(const torch::Tensor& x, const PadPlan& p) {
  if (x.dim() != 4) throw InvalidArgument("reflect_pad expects (B, C, H, W)");
  auto y = x;
  if (p.top || p.bottom) y = y.index_select(2, mirror_index(x.size(2), p.top, p.bottom));
  if (p.left || p.right) y = y.index_select(3, mirror_index(x.size(3), p.left, p.right));
  return y;
}

torch::Tensor crop(const torch::Tensor& x, const PadPlan& p) {
  return x.slice(2, p.top, x.size(2) - p.bottom).slice(3, p.left, x.size(3) - p.right);
}

torch::Tensor translate_image(LoadedModel& model, const torch::Tensor& image, double g_res) {
  const auto plan = divisibility_padding(image.size(1), image.size(2));
  const auto x = reflect_pad(image.unsqueeze(0), plan);
  const auto seed = derive_seed(model.cfg.seed, RngStream::kGrain, 0);
  const auto t = translate_batch(model.nets, model.cfg, x, g_res, seed);
  return crop(t.y, plan).squeeze(0).contiguous();
}

BatchSummary translate_dir(LoadedModel& model, const fs::path& input_dir, const fs::path& output_dir,
                           std::optional<double> gate_override, const LogFn& warn) {
  const double g = gate_override.value_or(model.g_res);
  if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("gate must lie in [0, 1]");
  BatchSummary summary;
  for (const auto& file : list_images(input_dir)) {
    try {
      const auto rgb = read_rgb8(file);
      const auto image = rgb8_to_signed(rgb);
      warn_padding(divisibility_padding(image.size(1), image.size(2)), file, warn);
      const auto y = translate_image(model, image, g);
      auto out = output_dir / fs::relative(file, input_dir);
      out.replace_extension(".png");
      fs::create_directories(out.parent_path());
      write_png_atomic(out, signed_to_rgb8(y));
      ++summary.written;
    } catch (const std::exception& e) {
      summary.errors.push_back({file, e.what()});
      if (warn) warn("skipping " + file.string() + ": " + e.what());
    }
  }
  return summary;
}

std::vector<torch::Tensor> residuals_for_sigmas(LoadedModel* model, const torch::Tensor& image,
                                                const std::vector<double>& sigmas) {
  torch::NoGradGuard guard;
  const auto plan = divisibility_padding(image.size(1), image.size(2));
  torch::Tensor y_free;
  PadPlan used{};
  if (model) {
    y_free = model->nets.free_gen->forward(reflect_pad(image.unsqueeze(0), plan)).image;
    used = plan;
  } else {
    y_free = snap_to_split_grid(image.unsqueeze(0));
  }
  std::vector<torch::Tensor> out;
  for (double s : sigmas) {
    out.push_back(crop(decompose_high_frequency(y_free, s).high, used).squeeze(0).contiguous());
  }
  return out;
}

ResidualStats residual_stats(const torch::Tensor& y_high) {
  const auto d = y_high.to(torch::kFloat64);
  return {d.abs().mean().item<double>(), d.pow(2).sum().sqrt().item<double>()};
}

BatchSummary hp_sweep_dir(LoadedModel* model, const fs::path& input_dir,
                          const std::vector<double>& sigmas, const fs::path& output_dir,
                          const LogFn& warn) {
  if (sigmas.empty()) throw InvalidArgument("hp-sweep needs at least one sigma");
  for (double s : sigmas) {
    if (!(s > 0.0)) throw InvalidArgument("hp-sweep sigmas must be positive");
  }
  fs::create_directories(output_dir);
  BatchSummary summary;
  std::ostringstream csv;
  csv << "image,sigma,mean_abs,l2\n";
  for (const auto& file : list_images(input_dir)) {
    try {
      const auto image = rgb8_to_signed(read_rgb8(file));
      if (model) warn_padding(divisibility_padding(image.size(1), image.size(2)), file, warn);
      const auto res = residuals_for_sigmas(model, image, sigmas);
      const auto rel = fs::relative(file, input_dir);
      std::ostringstream rows;
      for (std::size_t i = 0; i < sigmas.size(); ++i) {
        auto png = output_dir / rel;
        png.replace_filename(rel.stem().string() + "_sigma" + sigma_tag(sigmas[i]) + ".png");
        fs::create_directories(png.parent_path());
        // y_H / 2 + 0.5 in the unit domain equals y_H in the signed domain.
        write_png_atomic(png, signed_to_rgb8(res[i]));
        const auto st = residual_stats(res[i]);
        char buf[96];
        std::snprintf(buf, sizeof(buf), ",%s,%.17g,%.17g\n", sigma_tag(sigmas[i]).c_str(),
                      st.mean_abs, st.l2);
        rows << rel.generic_string() << buf;
      }
      csv << rows.str();
      ++summary.written;
    } catch (const std::exception& e) {
      summary.errors.push_back({file, e.what()});
      if (warn) warn("skipping " + file.string() + ": " + e.what());
    }
  }
  write_file_atomic(output_dir / "hp_sweep.csv", csv.str());
  return summary;
}

}  // namespace fddb
