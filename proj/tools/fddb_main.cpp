// fddb command-line entry point.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fddb/config.hpp"
#include "fddb/errors.hpp"
#include "fddb/gradcheck.hpp"
#include "fddb/image_io.hpp"
#include "fddb/inference.hpp"
#include "fddb/iou.hpp"
#include "fddb/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void log_line(const std::string& msg) { std::cerr << "fddb: " << msg << '\n'; }

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string resume;
  std::int64_t log_every = 100;
};

struct TranslateArgs {
  std::string checkpoint, input, output;
  std::optional<double> gate;
};

struct SweepArgs {
  std::string checkpoint, input, output;
  std::vector<double> sigmas = fddb::kDefaultSweepSigmas;
};

struct GradcheckArgs {
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  int instances = 50;
  std::vector<std::string> ops;
};

struct IouArgs {
  std::string pred, gt, output;
  int classes = 0;
};

int run_train(const TrainArgs& a) {
  fddb::TrainConfig cfg = a.config.empty() ? fddb::TrainConfig{} : fddb::load_config(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fddb::ConfigError("--set expects key=value, got '" + kv + "'");
    fddb::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  fddb::FitOptions opts;
  if (!a.resume.empty()) opts.resume_from = a.resume;
  opts.log = log_line;
  opts.log_every = a.log_every;
  const auto r = fddb::fit(cfg, opts);
  std::cout << "iterations " << r.iterations << '\n'
            << "switch_iteration " << (r.switch_iteration ? std::to_string(*r.switch_iteration) : "none") << '\n'
            << "checkpoint " << r.final_checkpoint.string() << '\n';
  return kExitOk;
}

int report_file_errors(const fddb::BatchSummary& s) {
  for (const auto& e : s.errors) std::cerr << "error: " << e.file.string() << ": " << e.message << '\n';
  return s.errors.empty() ? kExitOk : kExitValidation;
}

int run_translate(const TranslateArgs& a) {
  auto model = fddb::load_model(a.checkpoint);
  const auto s = fddb::translate_dir(model, a.input, a.output, a.gate, log_line);
  std::cout << "translated " << s.written << " image(s)\n";
  return report_file_errors(s);
}

int run_hp_sweep(const SweepArgs& a) {
  std::optional<fddb::LoadedModel> model;
  if (!a.checkpoint.empty()) model = fddb::load_model(a.checkpoint);
  const auto s = fddb::hp_sweep_dir(model ? &*model : nullptr, a.input, a.sigmas, a.output, log_line);
  std::cout << "swept " << s.written << " image(s) over " << a.sigmas.size() << " sigma(s)\n";
  return report_file_errors(s);
}

int run_gradcheck(const GradcheckArgs& a) {
  fddb::GradcheckOptions opts;
  opts.tolerance = a.tolerance;
  opts.seed = a.seed;
  opts.instances = a.instances;
  std::vector<fddb::GradcheckEntry> entries;
  if (a.ops.empty()) {
    entries = fddb::run_gradcheck(opts).entries;
  } else {
    for (const auto& op : a.ops) entries.push_back(fddb::run_gradcheck_op(op, opts));
  }
  bool ok = true;
  std::printf("%-16s %-14s %-8s %s\n", "op", "max_rel_error", "coords", "result");
  for (const auto& e : entries) {
    std::printf("%-16s %-14.3e %-8lld %s\n", e.op.c_str(), e.max_rel_error,
                static_cast<long long>(e.coordinates), e.passed ? "PASS" : "FAIL");
    ok = ok && e.passed;
  }
  std::printf("tolerance %.3e: %s\n", a.tolerance, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitValidation;
}

int run_eval_iou(const IouArgs& a) {
  const auto r = fddb::eval_iou_dirs(a.pred, a.gt, a.classes);
  const auto csv = fddb::format_iou_csv(r.acc);
  if (a.output.empty()) {
    std::cout << csv;
  } else {
    fddb::write_file_atomic(a.output, csv);
  }
  for (const auto& e : r.errors) std::cerr << "error: " << e.file << ": " << e.message << '\n';
  return r.errors.empty() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-decoupled dual-branch synthetic-to-real image translation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train both branches with the two-stage schedule");
  if (const char* env = std::getenv("FDDB_CONFIG")) train.config = env;
  train_cmd->add_option("-c,--config", train.config, "Config file (default: $FDDB_CONFIG)");
  train_cmd->add_option("--set", train.overrides, "Override a config key, e.g. --set train.iterations=10");
  train_cmd->add_option("--resume", train.resume, "Resume from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--log-every", train.log_every, "Progress line interval (0: quiet)")->capture_default_str();

  TranslateArgs tr;
  auto* tr_cmd = app.add_subcommand("translate", "Translate a folder of images with a checkpoint");
  tr_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("-i,--input", tr.input, "Input image directory")->required()->check(CLI::ExistingDirectory);
  tr_cmd->add_option("-o,--output", tr.output, "Output directory")->required();
  tr_cmd->add_option("--gate", tr.gate, "Residual gate override in [0, 1]")->check(CLI::Range(0.0, 1.0));

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("hp-sweep", "High-pass residual energy for several sigmas");
  sw_cmd->add_option("--checkpoint", sw.checkpoint,
                     "Checkpoint whose free branch is split (default: split the input itself)")
      ->check(CLI::ExistingFile);
  sw_cmd->add_option("-i,--input", sw.input, "Input image directory")->required()->check(CLI::ExistingDirectory);
  sw_cmd->add_option("-o,--output", sw.output, "Output directory")->required();
  sw_cmd->add_option("--sigmas", sw.sigmas, "High-pass sigmas")->capture_default_str()->delimiter(',');

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  gc_cmd->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "Seed for the random instances")->capture_default_str();
  gc_cmd->add_option("--instances", gc.instances, "Random instances per op")->capture_default_str()->check(CLI::PositiveNumber);
  gc_cmd->add_option("--op", gc.ops, "Restrict to these ops");

  IouArgs iou;
  auto* iou_cmd = app.add_subcommand("eval-iou", "Per-class IoU and mIoU over two mask folders");
  iou_cmd->add_option("--pred", iou.pred, "Predicted mask directory")->required()->check(CLI::ExistingDirectory);
  iou_cmd->add_option("--gt", iou.gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
  iou_cmd->add_option("-C,--classes", iou.classes, "Number of classes")->required()->check(CLI::PositiveNumber);
  iou_cmd->add_option("-o,--output", iou.output, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*tr_cmd) return run_translate(tr);
    if (*sw_cmd) return run_hp_sweep(sw);
    if (*gc_cmd) return run_gradcheck(gc);
    if (*iou_cmd) return run_eval_iou(iou);
  } catch (const fddb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fddb::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fddb::TrainingDivergence& e) {
    std::cerr << "training diverged (" << e.term() << "): " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
