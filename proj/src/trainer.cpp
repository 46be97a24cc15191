#include "fddb/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/imaging_ops.hpp"
#include "fddb/losses.hpp"
#include "fddb/rng.hpp"

namespace fddb {

namespace {

constexpr int kCheckpointVersion = 1;

const TrainConfig& validated(const TrainConfig& cfg) {
  cfg.validate();
  return cfg;
}

SchedulerConfig scheduler_config(const TrainConfig& cfg) {
  SchedulerConfig s = cfg.sched;
  s.param_scale = range_widths(cfg.specs);
  return s;
}

void save_module(const torch::nn::Module& m, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& p : m.named_parameters(true)) {
    ckpt.arrays.push_back({prefix + "/" + p.key(), p.value().detach().clone()});
  }
  for (const auto& b : m.named_buffers(true)) {
    ckpt.arrays.push_back({prefix + "/" + b.key(), b.value().detach().clone()});
  }
}

void load_tensor(torch::Tensor& dst, const Checkpoint& ckpt, const std::string& name) {
  const auto& src = ckpt.array(name);
  if (src.sizes() != dst.sizes() || src.scalar_type() != dst.scalar_type()) {
    throw IntegrityError("checkpoint array '" + name + "' does not match the network");
  }
  dst.copy_(src);
}

void load_module(torch::nn::Module& m, const std::string& prefix, const Checkpoint& ckpt) {
  torch::NoGradGuard guard;
  for (auto& p : m.named_parameters(true)) load_tensor(p.value(), ckpt, prefix + "/" + p.key());
  for (auto& b : m.named_buffers(true)) load_tensor(b.value(), ckpt, prefix + "/" + b.key());
}

Adam::NamedParams free_branch_parameters(const Networks& nets) {
  auto params = prefixed_parameters(*nets.free_gen, "free_gen");
  auto heads = prefixed_parameters(*nets.heads, "heads");
  params.insert(params.end(), heads.begin(), heads.end());
  return params;
}

AdamOptions adam_options(const OptimConfig& o, double lr) {
  return AdamOptions{lr, o.beta1, o.beta2, 1e-8};
}

std::string stage_name(Stage s) { return s == Stage::kEdit ? "edit" : "free"; }

Stage parse_stage(const std::string& s) {
  if (s == "edit") return Stage::kEdit;
  if (s == "free") return Stage::kFree;
  throw IntegrityError("checkpoint names unknown stage '" + s + "'");
}

StageState stage_state_from(const nlohmann::json& meta) {
  StageState s;
  s.stage = parse_stage(meta.at("stage").get<std::string>());
  s.multipliers = stage_multipliers(s.stage);
  if (!meta.at("switch_iteration").is_null()) {
    s.switch_iteration = meta.at("switch_iteration").get<std::int64_t>();
  }
  return s;
}

double finite_or_throw(const torch::Tensor& t, const char* term) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw TrainingDivergence(term, std::string(term) + " is not finite");
  return v;
}

}  // namespace

Networks Networks::build(const TrainConfig& cfg) {
  Networks n;
  const auto seed = [&](std::uint64_t k) {
    return derive_seed(cfg.seed, RngStream::kWeightInit, k);
  };

  ParamPredictorConfig pc;
  pc.out_dim = cfg.specs.raw_dim();
  n.predictor = ParamPredictor(pc);
  init_weights(*n.predictor, seed(0));
  n.predictor->reset_output_layer(cfg.specs.identity_raw_offsets());

  n.free_gen = FreeGenerator(FreeGeneratorConfig{3, cfg.net.gen_width, cfg.net.res_blocks, cfg.net.tap_ids});
  init_weights(*n.free_gen, seed(1));

  n.disc = Discriminator(DiscriminatorConfig{3, cfg.net.disc_width, 0.2});
  init_weights(*n.disc, seed(2));

  n.heads = ProjectionHeads(n.free_gen->tap_channels(), cfg.net.proj_dim);
  init_weights(*n.heads, seed(3));
  return n;
}

void Networks::save(Checkpoint& ckpt) const {
  save_module(*predictor, "predictor", ckpt);
  save_module(*free_gen, "free_gen", ckpt);
  save_module(*disc, "disc", ckpt);
  save_module(*heads, "heads", ckpt);
}

void Networks::load(const Checkpoint& ckpt) {
  load_module(*predictor, "predictor", ckpt);
  load_module(*free_gen, "free_gen", ckpt);
  load_module(*disc, "disc", ckpt);
  load_module(*heads, "heads", ckpt);
}

Translation translate_batch(Networks& nets, const TrainConfig& cfg, const torch::Tensor& x,
                            double g_res, std::uint64_t noise_seed) {
  torch::NoGradGuard guard;
  Translation t;
  t.params = map_raw_params(nets.predictor->forward(x), cfg.specs);
  t.y_edit = edit_chain(ImageBatch{x, IntensityDomain::kSigned}, t.params, cfg.specs, noise_seed).data;
  const auto y_free = nets.free_gen->forward(x).image;
  t.y_high = decompose_high_frequency(y_free, cfg.freq.hp_sigma).high;
  t.y = recompose(t.y_edit, t.y_high, g_res);
  return t;
}

Trainer::Trainer(TrainConfig cfg, const DomainDataset& synthetic, const DomainDataset& real)
    : cfg_(validated(cfg)),
      nets_(Networks::build(cfg_)),
      sampler_(synthetic, real, cfg_.data.seed),
      scheduler_(scheduler_config(cfg_)),
      opt_edit_(prefixed_parameters(*nets_.predictor, "predictor"),
                adam_options(cfg_.optim, cfg_.optim.lr_g)),
      opt_free_(free_branch_parameters(nets_), adam_options(cfg_.optim, cfg_.optim.lr_g)),
      opt_disc_(prefixed_parameters(*nets_.disc, "disc"), adam_options(cfg_.optim, cfg_.optim.lr_d)) {}

MetricsRow Trainer::step() { return train_step(sampler_.next_batch_pair(cfg_.data.batch_size)); }

MetricsRow Trainer::train_step(const BatchPair& batch) {
  const std::int64_t t = iteration_ + 1;
  const StageState state = scheduler_.at(t);
  const UpdateAllocation alloc = update_allocation(state);
  const auto& x_s = batch.x_s.data;
  const auto& x_r = batch.x_r.data;
  if (x_s.sizes() != x_r.sizes()) throw InvalidArgument("train_step: batch shapes differ");
  const auto noise_seed = derive_seed(cfg_.seed, RngStream::kGrain,
                                      static_cast<std::uint64_t>(t));

  EditParams params;
  torch::Tensor y_edit;
  {
    std::optional<torch::NoGradGuard> frozen;
    if (!alloc.train_edit_branch) frozen.emplace();
    params = map_raw_params(nets_.predictor->forward(x_s), cfg_.specs);
    y_edit = edit_chain(ImageBatch{x_s, IntensityDomain::kSigned}, params, cfg_.specs, noise_seed).data;
  }

  torch::Tensor y_free, y_high, y;
  FeatureStack src_features;
  if (alloc.train_free_branch) {
    auto out = nets_.free_gen->forward(x_s, true);
    y_free = out.image;
    src_features = std::move(out.features);
    y_high = decompose_high_frequency(y_free, cfg_.freq.hp_sigma).high;
    y = recompose(y_edit, y_high, state.g_res);
  } else {
    y = y_edit;
  }
  const auto& fake = alloc.fake_source == FakeSource::kEditOutput ? y_edit : y;

  // Discriminator update.
  opt_disc_.zero_grad();
  const auto loss_d = gan_loss_d(alloc.gan_kind, nets_.disc->forward(x_r),
                                 nets_.disc->forward(fake.detach()));
  const double loss_d_value = finite_or_throw(loss_d, "loss_D");
  loss_d.backward();
  opt_disc_.step();

  // Generator update.
  LossTerms terms;
  terms.gan = gan_loss_g(alloc.gan_kind, nets_.disc->forward(fake));
  double low_open = 0.0;
  if (alloc.train_edit_branch) terms.edit = edit_reg(params, cfg_.specs);
  if (alloc.train_free_branch) {
    const auto idx = sample_patch_indices(
        src_features, cfg_.net.nce_patches,
        derive_seed(cfg_.seed, RngStream::kNcePatches,
                    static_cast<std::uint64_t>(t)));
    const auto keys = nets_.heads->forward(src_features, idx);
    const auto queries = nets_.heads->forward(nets_.free_gen->encode_taps(y_free), idx);
    auto real_out = nets_.free_gen->forward(x_r, true);
    const auto keys_r = nets_.heads->forward(real_out.features, idx);
    const auto queries_r = nets_.heads->forward(nets_.free_gen->encode_taps(real_out.image), idx);
    terms.nce = 0.5 * (patch_nce(queries, keys, cfg_.net.nce_tau) +
                       patch_nce(queries_r, keys_r, cfg_.net.nce_tau));
    terms.id = identity_l1(x_r, real_out.image);
    terms.low = low_freq_anchor(y, y_edit, cfg_.freq);
    torch::NoGradGuard guard;
    low_open = low_freq_anchor(recompose(y_edit, y_high, 1.0), y_edit, cfg_.freq).item<double>();
  }
  auto [total, report] = total_generator_loss(terms, cfg_.weights, state.multipliers);
  report.iteration = t;
  report.loss_d = loss_d_value;

  opt_edit_.zero_grad();
  opt_free_.zero_grad();
  total.backward();
  if (alloc.train_edit_branch) opt_edit_.step();
  if (alloc.train_free_branch) opt_free_.step();
  opt_disc_.zero_grad();

  MetricsRow row;
  row.param_means = batch_means(params);
  const bool was_edit = scheduler_.state().stage == Stage::kEdit;
  const auto& after = scheduler_.observe(t, report.total, row.param_means);
  row.report = report;
  row.stage = state.stage;
  row.g_res = state.g_res;
  row.low_open = low_open;
  if (was_edit && after.stage == Stage::kFree) row.event = "stage_switch";
  iteration_ = t;
  return row;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ckpt;
  nets_.save(ckpt);
  opt_edit_.save_state("opt/edit", ckpt);
  opt_free_.save_state("opt/free", ckpt);
  opt_disc_.save_state("opt/disc", ckpt);
  const auto& win = scheduler_.window();
  ckpt.arrays.push_back(
      {"scheduler/window",
       torch::tensor(win.storage(), torch::TensorOptions().dtype(torch::kFloat64))});
  const auto& st = scheduler_.state();
  ckpt.meta = {
      {"version", kCheckpointVersion},
      {"iteration", iteration_},
      {"seed", cfg_.seed},
      {"config_fingerprint", cfg_.fingerprint()},
      {"config", cfg_.to_text()},
      {"stage", stage_name(st.stage)},
      {"switch_iteration", st.switch_iteration ? nlohmann::json(*st.switch_iteration)
                                               : nlohmann::json(nullptr)},
      {"scheduler",
       {{"head", win.head()},
        {"count", win.size()},
        {"rejections", scheduler_.consecutive_rejections()},
        {"total_rejections", scheduler_.total_rejections()}}},
      {"sampler",
       {{"synthetic_epoch", sampler_.synthetic_cycler().epoch()},
        {"synthetic_cursor", sampler_.synthetic_cycler().cursor()},
        {"real_epoch", sampler_.real_cycler().epoch()},
        {"real_cursor", sampler_.real_cycler().cursor()}}}};
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt, const std::function<void(const std::string&)>& warn) {
  try {
    const auto& meta = ckpt.meta;
    if (meta.at("version").get<int>() != kCheckpointVersion) {
      throw IntegrityError("unsupported checkpoint version");
    }
    const auto fp = meta.at("config_fingerprint").get<std::string>();
    if (fp != cfg_.fingerprint() && warn) {
      warn("checkpoint config fingerprint " + fp + " differs from the current config " +
           cfg_.fingerprint());
    }
    nets_.load(ckpt);
    opt_edit_.load_state("opt/edit", ckpt);
    opt_free_.load_state("opt/free", ckpt);
    opt_disc_.load_state("opt/disc", ckpt);

    const auto& sm = meta.at("scheduler");
    const auto& wt = ckpt.array("scheduler/window");
    StabilityWindow win(static_cast<std::size_t>(cfg_.sched.window),
                        1 + StageScheduler::kParamColumns);
    if (wt.scalar_type() != torch::kFloat64 ||
        static_cast<std::size_t>(wt.numel()) != win.storage().size()) {
      throw IntegrityError("scheduler window does not match sched.window");
    }
    const auto* w = wt.data_ptr<double>();
    win.restore(std::vector<double>(w, w + wt.numel()), sm.at("head").get<std::size_t>(),
                sm.at("count").get<std::size_t>());
    scheduler_.restore(stage_state_from(meta), std::move(win),
                       sm.at("rejections").get<std::int64_t>(),
                       sm.at("total_rejections").get<std::int64_t>());

    const auto& sp = meta.at("sampler");
    sampler_.synthetic_cycler().restore(sp.at("synthetic_epoch").get<std::uint64_t>(),
                                        sp.at("synthetic_cursor").get<std::size_t>());
    sampler_.real_cycler().restore(sp.at("real_epoch").get<std::uint64_t>(),
                                   sp.at("real_cursor").get<std::size_t>());
    iteration_ = meta.at("iteration").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

std::string checkpoint_name(std::int64_t iter) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "ckpt_%08lld.fddb", static_cast<long long>(iter));
  return buf;
}

FitResult fit(const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  const ImageSize size{cfg.data.height, cfg.data.width};
  const auto synthetic = load_dataset(cfg.data.synthetic_dir, size, DomainLabel::kSynthetic);
  const auto real = load_dataset(cfg.data.real_dir, size, DomainLabel::kReal);
  Trainer trainer(cfg, synthetic, real);
  if (opts.resume_from) trainer.restore(load_checkpoint(*opts.resume_from), opts.log);

  MetricsWriter writer(cfg.metrics_path, opts.resume_from ? trainer.iteration() : -1);
  const std::filesystem::path dir(cfg.checkpoint_dir);
  std::filesystem::create_directories(dir);
  FitResult result;
  std::int64_t saved_at = -1;
  const auto save = [&] {
    result.final_checkpoint = dir / checkpoint_name(trainer.iteration());
    if (saved_at != trainer.iteration()) save_checkpoint(result.final_checkpoint, trainer.to_checkpoint());
    saved_at = trainer.iteration();
  };

  try {
    while (trainer.iteration() < cfg.iterations) {
      const auto row = trainer.step();
      writer.write(row);
      const auto it = trainer.iteration();
      if (!row.event.empty()) {
        save();
        if (opts.log) opts.log("stage switch after iteration " + std::to_string(it));
      } else if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
        save();
      }
      if (opts.log && opts.log_every > 0 && it % opts.log_every == 0) {
        std::ostringstream o;
        o << "iter " << it << " total_G " << row.report.total << " loss_D " << row.report.loss_d;
        opts.log(o.str());
      }
    }
  } catch (...) {
    writer.close();
    save();
    throw;
  }
  writer.close();
  save();
  result.iterations = trainer.iteration();
  result.switch_iteration = trainer.scheduler().state().switch_iteration;
  return result;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  const auto ckpt = load_checkpoint(checkpoint);
  try {
    LoadedModel m{parse_config(ckpt.meta.at("config").get<std::string>()), {}, 0.0};
    m.nets = Networks::build(m.cfg);
    m.nets.load(ckpt);
    m.g_res = gate_value(stage_state_from(ckpt.meta), ckpt.meta.at("iteration").get<std::int64_t>(),
                         m.cfg.sched.ramp_len);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

}  // namespace fddb
