#include "fddb/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fddb/errors.hpp"
#include "fddb/networks.hpp"

namespace fddb {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                    "' as " + expected);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<double> to_doubles(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>) {
      out += fmt(items[i]);
    } else {
      out += items[i];
    }
  }
  return out;
}

void apply_edit_key(TrainConfig& cfg, std::string_view key, std::string_view rest,
                    std::string_view value) {
  const auto dot = rest.find('.');
  if (dot == std::string_view::npos) throw ConfigError("unknown config key '" + std::string(key) + "'");
  EditOp op{};
  try {
    op = parse_edit_op(rest.substr(0, dot));
  } catch (const InvalidArgument&) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  const auto field = rest.substr(dot + 1);
  ParamSpec& spec = cfg.specs[op];
  if (field == "enabled") {
    spec.enabled = to_bool(key, value);
  } else if (field == "mapping") {
    try {
      spec.mapping = parse_mapping(value);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  } else if (field == "lo") {
    spec.range_lo = to_double(key, value);
  } else if (field == "hi") {
    spec.range_hi = to_double(key, value);
  } else if (field == "identity") {
    spec.identity_ref = to_double(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

}  // namespace

void apply_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "data.synthetic_dir") cfg.data.synthetic_dir = std::string(value);
  else if (key == "data.real_dir") cfg.data.real_dir = std::string(value);
  else if (key == "data.height") cfg.data.height = to_int(key, value);
  else if (key == "data.width") cfg.data.width = to_int(key, value);
  else if (key == "data.batch_size") cfg.data.batch_size = to_int(key, value);
  else if (key == "data.seed") cfg.data.seed = to_uint(key, value);
  else if (key == "train.iterations") cfg.iterations = to_int(key, value);
  else if (key == "train.seed") cfg.seed = to_uint(key, value);
  else if (key == "train.checkpoint_dir") cfg.checkpoint_dir = std::string(value);
  else if (key == "train.checkpoint_every") cfg.checkpoint_every = to_int(key, value);
  else if (key == "train.metrics_path") cfg.metrics_path = std::string(value);
  else if (key == "optim.lr_g") cfg.optim.lr_g = to_double(key, value);
  else if (key == "optim.lr_d") cfg.optim.lr_d = to_double(key, value);
  else if (key == "optim.beta1") cfg.optim.beta1 = to_double(key, value);
  else if (key == "optim.beta2") cfg.optim.beta2 = to_double(key, value);
  else if (key == "loss.lambda_gan") cfg.weights.gan = to_double(key, value);
  else if (key == "loss.lambda_nce") cfg.weights.nce = to_double(key, value);
  else if (key == "loss.lambda_id") cfg.weights.id = to_double(key, value);
  else if (key == "loss.lambda_edit") cfg.weights.edit = to_double(key, value);
  else if (key == "loss.lambda_low") cfg.weights.low = to_double(key, value);
  else if (key == "loss.nce_tau") cfg.net.nce_tau = to_double(key, value);
  else if (key == "freq.hp_sigma") cfg.freq.hp_sigma = to_double(key, value);
  else if (key == "freq.anchor_sigmas") cfg.freq.anchor_sigmas = to_doubles(key, value);
  else if (key == "freq.anchor_weights") cfg.freq.anchor_weights = to_doubles(key, value);
  else if (key == "sched.window") cfg.sched.window = to_int(key, value);
  else if (key == "sched.eps_loss") cfg.sched.eps_loss = to_double(key, value);
  else if (key == "sched.eps_param") cfg.sched.eps_param = to_double(key, value);
  else if (key == "sched.min_iterations") cfg.sched.min_iterations = to_int(key, value);
  else if (key == "sched.ramp_len") cfg.sched.ramp_len = to_int(key, value);
  else if (key == "sched.max_rejections") cfg.sched.max_rejections = to_int(key, value);
  else if (key == "net.gen_width") cfg.net.gen_width = to_int(key, value);
  else if (key == "net.res_blocks") cfg.net.res_blocks = to_int(key, value);
  else if (key == "net.disc_width") cfg.net.disc_width = to_int(key, value);
  else if (key == "net.tap_ids") cfg.net.tap_ids = split_list(value);
  else if (key == "net.nce_patches") cfg.net.nce_patches = to_int(key, value);
  else if (key == "net.proj_dim") cfg.net.proj_dim = to_int(key, value);
  else if (key.starts_with("edit.")) apply_edit_key(cfg, key, key.substr(5), value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train.iterations must be at least 1");
  if (data.batch_size < 1) throw ConfigError("data.batch_size must be at least 1");
  if (data.height < 8 || data.width < 8 || data.height % FreeGeneratorConfig::kDownsampling != 0 ||
      data.width % FreeGeneratorConfig::kDownsampling != 0) {
    throw ConfigError("data.height/width must be multiples of 4 and at least 8");
  }
  if (!(optim.lr_g > 0.0) || !(optim.lr_d > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw ConfigError("momentum coefficients must lie in [0, 1)");
  }
  for (double w : {weights.gan, weights.nce, weights.id, weights.edit, weights.low}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and non-negative");
  }
  if (!(net.nce_tau > 0.0)) throw ConfigError("loss.nce_tau must be positive");
  if (net.nce_patches < 2) throw ConfigError("net.nce_patches must be at least 2");
  if (net.proj_dim < 1 || net.gen_width < 1 || net.disc_width < 1 || net.res_blocks < 1) {
    throw ConfigError("network sizes must be positive");
  }
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
  sched.validate();
  try {
    freq.validate();
    specs.validate();
    FreeGeneratorConfig{3, net.gen_width, net.res_blocks, net.tap_ids}.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  o << "data.synthetic_dir = " << data.synthetic_dir << "\n"
    << "data.real_dir = " << data.real_dir << "\n"
    << "data.height = " << data.height << "\n"
    << "data.width = " << data.width << "\n"
    << "data.batch_size = " << data.batch_size << "\n"
    << "data.seed = " << data.seed << "\n"
    << "train.iterations = " << iterations << "\n"
    << "train.seed = " << seed << "\n"
    << "train.checkpoint_dir = " << checkpoint_dir << "\n"
    << "train.checkpoint_every = " << checkpoint_every << "\n"
    << "train.metrics_path = " << metrics_path << "\n"
    << "optim.lr_g = " << fmt(optim.lr_g) << "\n"
    << "optim.lr_d = " << fmt(optim.lr_d) << "\n"
    << "optim.beta1 = " << fmt(optim.beta1) << "\n"
    << "optim.beta2 = " << fmt(optim.beta2) << "\n"
    << "loss.lambda_gan = " << fmt(weights.gan) << "\n"
    << "loss.lambda_nce = " << fmt(weights.nce) << "\n"
    << "loss.lambda_id = " << fmt(weights.id) << "\n"
    << "loss.lambda_edit = " << fmt(weights.edit) << "\n"
    << "loss.lambda_low = " << fmt(weights.low) << "\n"
    << "loss.nce_tau = " << fmt(net.nce_tau) << "\n"
    << "freq.hp_sigma = " << fmt(freq.hp_sigma) << "\n"
    << "freq.anchor_sigmas = " << join(freq.anchor_sigmas) << "\n"
    << "freq.anchor_weights = " << join(freq.anchor_weights) << "\n"
    << "sched.window = " << sched.window << "\n"
    << "sched.eps_loss = " << fmt(sched.eps_loss) << "\n"
    << "sched.eps_param = " << fmt(sched.eps_param) << "\n"
    << "sched.min_iterations = " << sched.min_iterations << "\n"
    << "sched.ramp_len = " << sched.ramp_len << "\n"
    << "sched.max_rejections = " << sched.max_rejections << "\n"
    << "net.gen_width = " << net.gen_width << "\n"
    << "net.res_blocks = " << net.res_blocks << "\n"
    << "net.disc_width = " << net.disc_width << "\n"
    << "net.tap_ids = " << join(net.tap_ids) << "\n"
    << "net.nce_patches = " << net.nce_patches << "\n"
    << "net.proj_dim = " << net.proj_dim << "\n";
  for (EditOp op : kAllEditOps) {
    const auto& s = specs[op];
    const std::string p = "edit." + std::string(to_string(op)) + ".";
    o << p << "enabled = " << (s.enabled ? "true" : "false") << "\n"
      << p << "mapping = " << to_string(s.mapping) << "\n"
      << p << "lo = " << fmt(s.range_lo) << "\n"
      << p << "hi = " << fmt(s.range_hi) << "\n"
      << p << "identity = " << fmt(s.identity_ref) << "\n";
  }
  return o.str();
}

std::string TrainConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fddb
