#include "snapflow/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "snapflow/errors.hpp"

namespace snapflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value for config key '" + key + "': '" + value + "'");
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  bad_value(key, value);
}

std::vector<double> parse_reals(const std::string& key, const std::string& value, char sep) {
  std::vector<double> out;
  for (const auto& tok : split(value, sep)) {
    if (tok.empty()) bad_value(key, value);
    out.push_back(parse_real(key, tok));
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& tok : split(value, ',')) {
    if (tok.empty()) bad_value(key, value);
    out.push_back(static_cast<int>(parse_int(key, tok)));
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_reals(const std::vector<double>& vs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += sep;
    out += fmt_real(vs[i]);
  }
  return out;
}

std::string fmt_ints(const std::vector<int>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(vs[i]);
  }
  return out;
}

}  // namespace

TrainConfig default_pretrain_config() {
  TrainConfig c;
  c.alpha = 1.0;
  c.lambda = 0.0;
  c.lr_peak = 2e-3;
  c.warmup_steps = 300;
  c.total_steps = 30000;
  c.batch_size = 64;
  return c;
}

TrainConfig default_distill_config() {
  TrainConfig c;
  c.alpha = 0.5;
  c.lambda = 3.0;
  c.lr_peak = 1e-3;
  c.warmup_steps = 500;
  c.total_steps = 15000;
  c.batch_size = 64;
  return c;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value': '" +
                        line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    kv[key] = value;
  }

  ExperimentConfig cfg;
  auto take = [&kv](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    return &it->second;
  };
  auto real_opt = [&](const char* key, double& dst) {
    if (const auto* v = take(key)) {
      dst = parse_real(key, *v);
      kv.erase(key);
    }
  };
  auto int_opt = [&](const char* key, int& dst) {
    if (const auto* v = take(key)) {
      dst = static_cast<int>(parse_int(key, *v));
      kv.erase(key);
    }
  };
  auto bool_opt = [&](const char* key, bool& dst) {
    if (const auto* v = take(key)) {
      dst = parse_bool(key, *v);
      kv.erase(key);
    }
  };

  if (const auto* v = take("seed")) {
    const long long s = parse_int("seed", *v);
    if (s < 0) bad_value("seed", *v);
    cfg.seed = static_cast<std::uint64_t>(s);
    kv.erase("seed");
  }
  if (const auto* v = take("out_dir")) {
    cfg.out_dir = *v;
    kv.erase("out_dir");
  }
  if (const auto* v = take("data.kind")) {
    if (*v != "toy" && *v != "mixture") bad_value("data.kind", *v);
    cfg.data_kind = *v;
    kv.erase("data.kind");
  }

  int_opt("toy.train_samples", cfg.toy_train);
  int_opt("toy.heldout_samples", cfg.toy_heldout);
  int_opt("toy.horizon", cfg.expert.horizon);
  real_opt("toy.step_len", cfg.expert.step_len);
  real_opt("toy.jitter", cfg.expert.jitter);
  real_opt("toy.action_bound", cfg.env.action_bound);
  int_opt("toy.step_budget", cfg.env.step_budget);
  real_opt("toy.success_radius", cfg.env.success_radius);
  real_opt("toy.arena", cfg.env.arena);
  real_opt("toy.min_goal_dist", cfg.env.min_goal_dist);
  real_opt("toy.max_goal_dist", cfg.env.max_goal_dist);

  if (const auto* v = take("mixture.weights")) {
    cfg.mix_weights = parse_reals("mixture.weights", *v, ';');
    kv.erase("mixture.weights");
  }
  if (const auto* v = take("mixture.means")) {
    cfg.mix_means.clear();
    for (const auto& comp : split(*v, ';')) {
      if (comp.empty()) bad_value("mixture.means", *v);
      cfg.mix_means.push_back(parse_reals("mixture.means", comp, ','));
    }
    if (cfg.mix_means.empty()) bad_value("mixture.means", *v);
    kv.erase("mixture.means");
  }
  if (const auto* v = take("mixture.sigmas")) {
    cfg.mix_sigmas = parse_reals("mixture.sigmas", *v, ';');
    kv.erase("mixture.sigmas");
  }
  int_opt("mixture.horizon", cfg.mixture_horizon);
  int_opt("mixture.train_samples", cfg.mixture_train);
  int_opt("mixture.heldout_samples", cfg.mixture_heldout);

  if (const auto* v = take("net.hidden")) {
    cfg.net.hidden = parse_ints("net.hidden", *v);
    kv.erase("net.hidden");
  }
  int_opt("net.n_freq", cfg.net.n_freq);
  int_opt("net.time_embed", cfg.net.time_embed);
  int_opt("net.ctx_embed", cfg.net.ctx_embed);
  real_opt("net.lipschitz_bound", cfg.net.lipschitz_bound);

  auto train_keys = [&](const char* prefix, TrainConfig& tc, bool mix_knobs) {
    const std::string p(prefix);
    if (mix_knobs) {
      real_opt((p + ".alpha").c_str(), tc.alpha);
      real_opt((p + ".lambda").c_str(), tc.lambda);
      real_opt((p + ".clamp_lo").c_str(), tc.clamp_lo);
      real_opt((p + ".clamp_hi").c_str(), tc.clamp_hi);
    }
    real_opt((p + ".lr_peak").c_str(), tc.lr_peak);
    int_opt((p + ".warmup_steps").c_str(), tc.warmup_steps);
    int_opt((p + ".total_steps").c_str(), tc.total_steps);
    real_opt((p + ".grad_clip_norm").c_str(), tc.grad_clip_norm);
    int_opt((p + ".batch_size").c_str(), tc.batch_size);
    real_opt((p + ".weight_decay").c_str(), tc.weight_decay);
    int_opt((p + ".log_every").c_str(), tc.log_every);
  };
  train_keys("pretrain", cfg.pretrain, /*mix_knobs=*/false);
  train_keys("distill", cfg.distill, /*mix_knobs=*/true);

  if (const auto* v = take("eval.k_grid")) {
    cfg.eval.k_grid = parse_ints("eval.k_grid", *v);
    kv.erase("eval.k_grid");
  }
  if (const auto* v = take("eval.nact_grid")) {
    cfg.eval.nact_grid = parse_ints("eval.nact_grid", *v);
    kv.erase("eval.nact_grid");
  }
  int_opt("eval.noise_per_sample", cfg.eval.noise_per_sample);
  int_opt("eval.episodes", cfg.eval.episodes);
  int_opt("eval.teacher_k", cfg.eval.teacher_k);
  bool_opt("eval.timing", cfg.eval.timing);

  int_opt("verify.n_mc", cfg.verify.n_mc);
  int_opt("verify.quad_steps", cfg.verify.quad_steps);
  if (const auto* v = take("verify.t_grid")) {
    cfg.verify.t_grid = parse_reals("verify.t_grid", *v, ',');
    kv.erase("verify.t_grid");
  }

  if (!kv.empty()) {
    throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  }

  // Net dims follow the data section; they are not directly settable.
  if (cfg.data_kind == "toy") {
    cfg.net.horizon = cfg.expert.horizon;
    cfg.net.dim = 2;
    cfg.net.ctx_dim = 4;
  } else {
    cfg.net.horizon = cfg.mixture_horizon;
    cfg.net.dim = cfg.mix_means.empty() ? 0 : static_cast<int>(cfg.mix_means[0].size());
    cfg.net.ctx_dim = 0;
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

MixtureSpec ExperimentConfig::mixture() const {
  if (mix_weights.size() != mix_means.size() || mix_weights.size() != mix_sigmas.size()) {
    throw ConfigError(
        "mixture.weights, mixture.means, and mixture.sigmas must list the same number of "
        "components");
  }
  std::vector<MixtureComponent> comps;
  for (std::size_t i = 0; i < mix_weights.size(); ++i) {
    comps.push_back({mix_weights[i], mix_means[i], mix_sigmas[i]});
  }
  try {
    return MixtureSpec(std::move(comps));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("mixture.*: ") + e.what());
  }
}

std::string ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> rows;
  auto put = [&rows](const std::string& k, const std::string& v) { rows.emplace_back(k, v); };

  put("seed", std::to_string(seed));
  put("data.kind", data_kind);

  put("toy.train_samples", std::to_string(toy_train));
  put("toy.heldout_samples", std::to_string(toy_heldout));
  put("toy.horizon", std::to_string(expert.horizon));
  put("toy.step_len", fmt_real(expert.step_len));
  put("toy.jitter", fmt_real(expert.jitter));
  put("toy.action_bound", fmt_real(env.action_bound));
  put("toy.step_budget", std::to_string(env.step_budget));
  put("toy.success_radius", fmt_real(env.success_radius));
  put("toy.arena", fmt_real(env.arena));
  put("toy.min_goal_dist", fmt_real(env.min_goal_dist));
  put("toy.max_goal_dist", fmt_real(env.max_goal_dist));

  put("mixture.weights", fmt_reals(mix_weights, ';'));
  {
    std::string means;
    for (std::size_t i = 0; i < mix_means.size(); ++i) {
      if (i) means += ';';
      means += fmt_reals(mix_means[i], ',');
    }
    put("mixture.means", means);
  }
  put("mixture.sigmas", fmt_reals(mix_sigmas, ';'));
  put("mixture.horizon", std::to_string(mixture_horizon));
  put("mixture.train_samples", std::to_string(mixture_train));
  put("mixture.heldout_samples", std::to_string(mixture_heldout));

  put("net.horizon", std::to_string(net.horizon));
  put("net.dim", std::to_string(net.dim));
  put("net.ctx_dim", std::to_string(net.ctx_dim));
  put("net.hidden", fmt_ints(net.hidden));
  put("net.n_freq", std::to_string(net.n_freq));
  put("net.time_embed", std::to_string(net.time_embed));
  put("net.ctx_embed", std::to_string(net.ctx_embed));
  put("net.lipschitz_bound", fmt_real(net.lipschitz_bound));

  auto train_rows = [&](const std::string& p, const TrainConfig& tc, bool mix_knobs) {
    if (mix_knobs) {
      put(p + ".alpha", fmt_real(tc.alpha));
      put(p + ".lambda", fmt_real(tc.lambda));
      put(p + ".clamp_lo", fmt_real(tc.clamp_lo));
      put(p + ".clamp_hi", fmt_real(tc.clamp_hi));
    }
    put(p + ".lr_peak", fmt_real(tc.lr_peak));
    put(p + ".warmup_steps", std::to_string(tc.warmup_steps));
    put(p + ".total_steps", std::to_string(tc.total_steps));
    put(p + ".grad_clip_norm", fmt_real(tc.grad_clip_norm));
    put(p + ".batch_size", std::to_string(tc.batch_size));
    put(p + ".weight_decay", fmt_real(tc.weight_decay));
    put(p + ".log_every", std::to_string(tc.log_every));
  };
  train_rows("pretrain", pretrain, /*mix_knobs=*/false);
  train_rows("distill", distill, /*mix_knobs=*/true);

  put("eval.k_grid", fmt_ints(eval.k_grid));
  put("eval.nact_grid", fmt_ints(eval.nact_grid));
  put("eval.noise_per_sample", std::to_string(eval.noise_per_sample));
  put("eval.episodes", std::to_string(eval.episodes));
  put("eval.teacher_k", std::to_string(eval.teacher_k));
  put("eval.timing", eval.timing ? "1" : "0");

  put("verify.n_mc", std::to_string(verify.n_mc));
  put("verify.quad_steps", std::to_string(verify.quad_steps));
  put("verify.t_grid", fmt_reals(verify.t_grid, ','));

  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [k, v] : rows) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(data_kind == "toy" || data_kind == "mixture",
          "data.kind must be 'toy' or 'mixture'");
  require(toy_train >= 1 && toy_heldout >= 1, "toy sample counts must be >= 1");
  require(mixture_train >= 1 && mixture_heldout >= 1, "mixture sample counts must be >= 1");
  require(mixture_horizon >= 1, "mixture.horizon must be >= 1");
  require(expert.horizon >= 1, "toy.horizon must be >= 1");
  require(expert.step_len > 0.0, "toy.step_len must be positive");
  require(expert.jitter >= 0.0, "toy.jitter must be >= 0");
  require(env.action_bound > 0.0, "toy.action_bound must be positive");
  require(env.step_budget >= 1, "toy.step_budget must be >= 1");
  require(env.success_radius > 0.0, "toy.success_radius must be positive");
  require(env.arena > 0.0, "toy.arena must be positive");
  require(env.min_goal_dist > 0.0 && env.max_goal_dist > env.min_goal_dist,
          "toy goal distance range must satisfy 0 < min < max");

  mixture();  // validates the mixture keys jointly

  try {
    net.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("net.*: ") + e.what());
  }
  try {
    pretrain.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("pretrain.*: ") + e.what());
  }
  try {
    distill.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("distill.*: ") + e.what());
  }

  require(!eval.k_grid.empty(), "eval.k_grid must be nonempty");
  for (int k : eval.k_grid) require(k >= 1, "eval.k_grid entries must be >= 1");
  require(!eval.nact_grid.empty(), "eval.nact_grid must be nonempty");
  for (int n : eval.nact_grid) {
    require(n >= 1 && n <= net.horizon,
            "eval.nact_grid entries must lie in [1, toy.horizon]");
  }
  require(eval.noise_per_sample >= 1, "eval.noise_per_sample must be >= 1");
  require(eval.episodes >= 1, "eval.episodes must be >= 1");
  require(eval.teacher_k >= 1, "eval.teacher_k must be >= 1");

  require(verify.n_mc >= 10000, "verify.n_mc must be >= 10000");
  require(verify.quad_steps >= 1000, "verify.quad_steps must be >= 1000");
  require(!verify.t_grid.empty(), "verify.t_grid must be nonempty");
  for (double t : verify.t_grid) {
    require(t > 0.0 && t < 1.0, "verify.t_grid entries must lie in (0, 1)");
  }
}

}  // namespace snapflow
