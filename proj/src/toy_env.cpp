#include "snapflow/toy_env.hpp"

#include <cmath>

namespace snapflow {

bool ToyEnv::at_goal() const {
  const double dx = p[0] - g[0];
  const double dy = p[1] - g[1];
  return std::sqrt(dx * dx + dy * dy) < cfg.success_radius;
}

void ToyEnv::step(double ax, double ay) {
  const double n = std::sqrt(ax * ax + ay * ay);
  if (n > cfg.action_bound && n > 0.0) {
    const double s = cfg.action_bound / n;
    ax *= s;
    ay *= s;
  }
  p[0] += ax;
  p[1] += ay;
}

ToyEnv sample_env(const ToyEnvConfig& cfg, Rng& rng) {
  ToyEnv env;
  env.cfg = cfg;
  for (int tries = 0; tries < 1000; ++tries) {
    env.p = {rng.uniform(-cfg.arena, cfg.arena), rng.uniform(-cfg.arena, cfg.arena)};
    env.g = {rng.uniform(-cfg.arena, cfg.arena), rng.uniform(-cfg.arena, cfg.arena)};
    const double dx = env.g[0] - env.p[0];
    const double dy = env.g[1] - env.p[1];
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d >= cfg.min_goal_dist && d <= cfg.max_goal_dist) return env;
  }
  throw std::runtime_error("sample_env: could not draw a valid episode (check distance bounds)");
}

Mat expert_chunk(const Vec2& p, const Vec2& g, const ExpertConfig& cfg, Rng& rng) {
  Mat chunk(cfg.horizon, 2);
  const double dx = g[0] - p[0];
  const double dy = g[1] - p[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double ux = dist > 0.0 ? dx / dist : 0.0;
  const double uy = dist > 0.0 ? dy / dist : 0.0;
  double remaining = dist;
  for (int i = 0; i < cfg.horizon; ++i) {
    const double len = std::min(cfg.step_len, std::max(0.0, remaining));
    chunk(i, 0) = ux * len + cfg.jitter * rng.gauss();
    chunk(i, 1) = uy * len + cfg.jitter * rng.gauss();
    remaining -= len;
  }
  return chunk;
}

Dataset make_toy_dataset(const ToyEnvConfig& env_cfg, const ExpertConfig& cfg, std::size_t n,
                         Rng& rng) {
  Dataset ds;
  ds.chunks.reserve(n);
  ds.contexts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ToyEnv env = sample_env(env_cfg, rng);
    ds.chunks.push_back(expert_chunk(env.p, env.g, cfg, rng));
    ds.contexts.push_back(ContextVec{env.p[0], env.p[1], env.g[0], env.g[1]});
  }
  return ds;
}

Dataset make_mixture_dataset(const MixtureSpec& spec, std::size_t horizon, std::size_t n,
                             Rng& rng) {
  Dataset ds;
  ds.chunks.reserve(n);
  ds.contexts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Mat rows = spec.sample(rng, horizon);
    ds.chunks.push_back(std::move(rows));
    ds.contexts.emplace_back();
  }
  return ds;
}

}  // namespace snapflow
