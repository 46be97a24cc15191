#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>

#include <torch/torch.h>

#include "fddb/config.hpp"
#include "fddb/errors.hpp"
#include "fddb/gradcheck.hpp"
#include "fddb/imaging_ops.hpp"
#include "fddb/inference.hpp"
#include "fddb/iou.hpp"
#include "fddb/losses.hpp"
#include "fddb/params.hpp"
#include "fddb/scheduler.hpp"
#include "fddb/trainer.hpp"

namespace py = pybind11;

namespace {

// Copies a numpy array into a tensor. float32 stays float32; everything else
// becomes float64.
torch::Tensor to_tensor(const py::array& arr) {
  std::vector<std::int64_t> shape(arr.shape(), arr.shape() + arr.ndim());
  if (arr.dtype().is(py::dtype::of<float>())) {
    auto a = py::array_t<float, py::array::c_style | py::array::forcecast>::ensure(arr);
    return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
  }
  auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
  if (!a) throw fddb::InvalidArgument("expected a numeric array");
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

py::array to_numpy(const torch::Tensor& t) {
  const auto c = t.detach().cpu().contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  if (c.scalar_type() == torch::kFloat32) {
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), c.data_ptr<float>(), c.numel() * sizeof(float));
    return out;
  }
  if (c.scalar_type() == torch::kInt64) {
    py::array_t<std::int64_t> out(shape);
    std::memcpy(out.mutable_data(), c.data_ptr<std::int64_t>(), c.numel() * sizeof(std::int64_t));
    return out;
  }
  const auto d = c.to(torch::kFloat64);
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), d.data_ptr<double>(), d.numel() * sizeof(double));
  return out;
}

double scalar(const torch::Tensor& t) { return t.item<double>(); }

fddb::EditParams params_from_dict(const py::dict& d) {
  fddb::EditParams p;
  p.wb_gain = to_tensor(d["wb_gain"]);
  p.ev = to_tensor(d["ev"]);
  p.contrast = to_tensor(d["contrast"]);
  p.saturation = to_tensor(d["saturation"]);
  p.blur_sigma = to_tensor(d["blur_sigma"]);
  p.grain_amp = to_tensor(d["grain_amp"]);
  p.grain_sigma = to_tensor(d["grain_sigma"]);
  return p;
}

py::dict params_to_dict(const fddb::EditParams& p) {
  py::dict d;
  d["wb_gain"] = to_numpy(p.wb_gain);
  d["ev"] = to_numpy(p.ev);
  d["contrast"] = to_numpy(p.contrast);
  d["saturation"] = to_numpy(p.saturation);
  d["blur_sigma"] = to_numpy(p.blur_sigma);
  d["grain_amp"] = to_numpy(p.grain_amp);
  d["grain_sigma"] = to_numpy(p.grain_sigma);
  return d;
}

fddb::GanKind gan_kind(const std::string& s) {
  if (s == "hinge") return fddb::GanKind::kHinge;
  if (s == "logistic") return fddb::GanKind::kLogistic;
  throw fddb::InvalidArgument("gan kind must be 'hinge' or 'logistic'");
}

fddb::Stage stage_of(const std::string& s) {
  if (s == "edit") return fddb::Stage::kEdit;
  if (s == "free") return fddb::Stage::kFree;
  throw fddb::InvalidArgument("stage must be 'edit' or 'free'");
}

py::dict state_to_dict(const fddb::StageState& s) {
  py::dict d;
  d["stage"] = s.stage == fddb::Stage::kEdit ? "edit" : "free";
  d["g_res"] = s.g_res;
  d["multipliers"] = std::vector<double>{s.multipliers.gan, s.multipliers.nce, s.multipliers.id,
                                         s.multipliers.edit, s.multipliers.low};
  d["switch_iteration"] = s.switch_iteration ? py::cast(*s.switch_iteration) : py::none();
  return d;
}

std::vector<torch::Tensor> tensors(const std::vector<py::array>& arrs) {
  std::vector<torch::Tensor> out;
  for (const auto& a : arrs) out.push_back(to_tensor(a));
  return out;
}

fddb::FrequencyConfig freq_config(const std::vector<double>& sigmas, const std::vector<double>& weights) {
  fddb::FrequencyConfig cfg;
  cfg.anchor_sigmas = sigmas;
  cfg.anchor_weights = weights.empty() ? std::vector<double>(sigmas.size(), 1.0) : weights;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_fddb, m) {
  m.doc() = "Frequency-decoupled dual-branch synthetic-to-real translation";

  py::register_exception<fddb::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<fddb::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<fddb::IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);
  py::register_exception<fddb::TrainingDivergence>(m, "TrainingDivergence", PyExc_RuntimeError);

  // Imaging operators (unit domain unless noted).
  m.def("apply_white_balance", [](py::array x, py::array g) {
    return to_numpy(fddb::apply_white_balance(to_tensor(x), to_tensor(g)));
  });
  m.def("apply_exposure", [](py::array x, py::array ev) {
    return to_numpy(fddb::apply_exposure(to_tensor(x), to_tensor(ev)));
  });
  m.def("apply_contrast", [](py::array x, py::array c) {
    return to_numpy(fddb::apply_contrast(to_tensor(x), to_tensor(c)));
  });
  m.def("apply_saturation", [](py::array x, py::array s) {
    return to_numpy(fddb::apply_saturation(to_tensor(x), to_tensor(s)));
  });
  m.def("apply_blur", [](py::array x, py::array sigma, double sigma_max) {
    return to_numpy(fddb::apply_blur(to_tensor(x), to_tensor(sigma), sigma_max));
  }, py::arg("x"), py::arg("sigma"), py::arg("sigma_max") = 3.0);
  m.def("apply_grain", [](py::array x, py::array amp, py::array sigma, py::array noise, double sigma_max) {
    return to_numpy(fddb::apply_grain(to_tensor(x), to_tensor(amp), to_tensor(sigma), sigma_max,
                                      to_tensor(noise)));
  }, py::arg("x"), py::arg("amp"), py::arg("grain_sigma"), py::arg("noise"), py::arg("sigma_max") = 3.0);
  m.def("sample_grain_noise", [](std::int64_t b, std::int64_t h, std::int64_t w, std::uint64_t seed) {
    return to_numpy(fddb::sample_grain_noise(b, h, w, seed, torch::kFloat64));
  });
  m.def("map_raw_params", [](py::array raw) {
    return params_to_dict(fddb::map_raw_params(to_tensor(raw), fddb::ParamSpecSet::defaults()));
  }, "Raw predictor outputs (B, 9) -> dict of physical parameters (default specs).");
  m.def("identity_params", [](std::int64_t b) {
    return params_to_dict(fddb::EditParams::identity(b, fddb::ParamSpecSet::defaults(), torch::kFloat64));
  });
  m.def("edit_chain", [](py::array x, py::dict params, std::uint64_t noise_seed) {
    const fddb::ImageBatch in{to_tensor(x), fddb::IntensityDomain::kSigned};
    return to_numpy(fddb::edit_chain(in, params_from_dict(params), fddb::ParamSpecSet::defaults(),
                                     noise_seed).data);
  }, py::arg("x"), py::arg("params"), py::arg("noise_seed") = 0, "Signed-domain in and out.");

  // Frequency split.
  m.def("gaussian_kernel_1d", [](double sigma) {
    return to_numpy(fddb::gaussian_kernel_1d(sigma, fddb::gaussian_kernel_size(sigma)));
  });
  m.def("low_pass", [](py::array x, double sigma) { return to_numpy(fddb::low_pass(to_tensor(x), sigma)); });
  m.def("snap_to_split_grid", [](py::array x) { return to_numpy(fddb::snap_to_split_grid(to_tensor(x))); });
  m.def("decompose_high_frequency", [](py::array y_free, double hp_sigma) {
    const auto s = fddb::decompose_high_frequency(to_tensor(y_free), hp_sigma);
    return py::make_tuple(to_numpy(s.low), to_numpy(s.high));
  });
  m.def("recompose", [](py::array y_edit, py::array y_high, double g) {
    return to_numpy(fddb::recompose(to_tensor(y_edit), to_tensor(y_high), g));
  });

  // Losses.
  m.def("gan_loss_d", [](const std::string& kind, py::array real, py::array fake) {
    return scalar(fddb::gan_loss_d(gan_kind(kind), to_tensor(real), to_tensor(fake)));
  });
  m.def("gan_loss_g", [](const std::string& kind, py::array fake) {
    return scalar(fddb::gan_loss_g(gan_kind(kind), to_tensor(fake)));
  });
  m.def("patch_nce", [](std::vector<py::array> q, std::vector<py::array> k, double tau) {
    return scalar(fddb::patch_nce(tensors(q), tensors(k), tau));
  }, py::arg("queries"), py::arg("keys"), py::arg("tau") = 0.07);
  m.def("identity_l1", [](py::array x, py::array x_hat) {
    return scalar(fddb::identity_l1(to_tensor(x), to_tensor(x_hat)));
  });
  m.def("low_freq_anchor", [](py::array y, py::array y_edit, std::vector<double> sigmas, std::vector<double> weights) {
    return scalar(fddb::low_freq_anchor(to_tensor(y), to_tensor(y_edit), freq_config(sigmas, weights)));
  }, py::arg("y"), py::arg("y_edit"), py::arg("sigmas") = std::vector<double>{4, 8, 16},
     py::arg("weights") = std::vector<double>{});
  m.def("edit_reg", [](py::dict params) {
    return scalar(fddb::edit_reg(params_from_dict(params), fddb::ParamSpecSet::defaults()));
  });

  // Scheduler.
  m.def("stage_multipliers", [](const std::string& stage) {
    const auto s = fddb::stage_multipliers(stage_of(stage));
    return std::vector<double>{s.gan, s.nce, s.id, s.edit, s.low};
  });
  py::class_<fddb::StageScheduler>(m, "StageScheduler")
      .def(py::init([](std::int64_t window, double eps_loss, double eps_param, std::int64_t min_iterations,
                       std::int64_t ramp_len, std::optional<std::vector<double>> param_scale) {
             fddb::SchedulerConfig cfg;
             if (param_scale) {
               if (param_scale->size() != cfg.param_scale.size()) {
                 throw fddb::InvalidArgument("param_scale expects 9 values");
               }
               std::copy(param_scale->begin(), param_scale->end(), cfg.param_scale.begin());
             }
             cfg.window = window;
             cfg.eps_loss = eps_loss;
             cfg.eps_param = eps_param;
             cfg.min_iterations = min_iterations;
             cfg.ramp_len = ramp_len;
             cfg.validate();
             return fddb::StageScheduler(cfg);
           }),
           py::arg("window") = 200, py::arg("eps_loss") = 0.1, py::arg("eps_param") = 0.05,
           py::arg("min_iterations") = 1000, py::arg("ramp_len") = 500, py::arg("param_scale") = py::none())
      .def("observe", [](fddb::StageScheduler& s, std::int64_t it, double g_loss, std::vector<double> means) {
        if (means.size() != fddb::StageScheduler::kParamColumns) {
          throw fddb::InvalidArgument("observe expects 9 parameter means");
        }
        return state_to_dict(s.observe(it, g_loss, means));
      })
      .def("at", [](const fddb::StageScheduler& s, std::int64_t it) { return state_to_dict(s.at(it)); });

  // Metric and diagnostics.
  m.def("eval_iou", [](py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> pred,
                       py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> gt, int classes) {
    fddb::IouAccumulator acc(classes);
    acc.add({pred.data(), static_cast<std::size_t>(pred.size())}, {gt.data(), static_cast<std::size_t>(gt.size())});
    return py::make_tuple(acc.iou(), acc.miou());
  }, "Per-class IoU (NaN for empty unions) and mIoU for one mask pair.");
  m.def("eval_iou_dirs", [](const std::filesystem::path& pred, const std::filesystem::path& gt, int classes) {
    const auto r = fddb::eval_iou_dirs(pred, gt, classes);
    return py::make_tuple(r.acc.iou(), r.acc.miou(), r.pairs);
  });
  m.def("gradcheck", [](double tolerance, std::uint64_t seed, int instances) {
    fddb::GradcheckOptions o;
    o.tolerance = tolerance;
    o.seed = seed;
    o.instances = instances;
    py::list out;
    for (const auto& e : fddb::run_gradcheck(o).entries) {
      py::dict d;
      d["op"] = e.op;
      d["max_rel_error"] = e.max_rel_error;
      d["passed"] = e.passed;
      out.append(d);
    }
    return out;
  }, py::arg("tolerance") = 1e-4, py::arg("seed") = 0, py::arg("instances") = 10);

  // Training and inference.
  m.def("canonical_config", [](const std::string& text) { return fddb::parse_config(text).to_text(); });
  m.def("train", [](const std::string& config_text, std::optional<std::filesystem::path> resume) {
    fddb::FitOptions opts;
    opts.resume_from = resume;
    const auto r = fddb::fit(fddb::parse_config(config_text), opts);
    py::dict d;
    d["checkpoint"] = r.final_checkpoint;
    d["iterations"] = r.iterations;
    d["switch_iteration"] = r.switch_iteration ? py::cast(*r.switch_iteration) : py::none();
    return d;
  }, py::arg("config_text"), py::arg("resume") = py::none());
  m.def("translate_dir", [](const std::filesystem::path& ckpt, const std::filesystem::path& in,
                            const std::filesystem::path& out, std::optional<double> gate) {
    auto model = fddb::load_model(ckpt);
    const auto s = fddb::translate_dir(model, in, out, gate);
    return s.written;
  }, py::arg("checkpoint"), py::arg("input_dir"), py::arg("output_dir"), py::arg("gate") = py::none());
  m.def("hp_sweep_dir", [](const std::filesystem::path& in, const std::filesystem::path& out,
                           std::vector<double> sigmas, std::optional<std::filesystem::path> ckpt) {
    std::optional<fddb::LoadedModel> model;
    if (ckpt) model = fddb::load_model(*ckpt);
    return fddb::hp_sweep_dir(model ? &*model : nullptr, in, sigmas, out).written;
  }, py::arg("input_dir"), py::arg("output_dir"), py::arg("sigmas") = fddb::kDefaultSweepSigmas,
     py::arg("checkpoint") = py::none());
}
