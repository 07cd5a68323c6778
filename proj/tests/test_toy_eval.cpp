#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "snapflow/eval.hpp"
#include "snapflow/toy_env.hpp"

using namespace snapflow;

namespace {

NetConfig policy_net_cfg() {
  NetConfig c;
  c.horizon = 8;
  c.dim = 2;
  c.ctx_dim = 4;
  c.n_freq = 3;
  c.time_embed = 8;
  c.ctx_embed = 8;
  c.hidden = {12, 12};
  return c;
}

}  // namespace

TEST_CASE("episode draws respect the arena and the goal-distance band") {
  ToyEnvConfig cfg;
  Rng rng(7, 0);
  for (int i = 0; i < 300; ++i) {
    ToyEnv env = sample_env(cfg, rng);
    CHECK(std::abs(env.p[0]) <= cfg.arena);
    CHECK(std::abs(env.p[1]) <= cfg.arena);
    CHECK(std::abs(env.g[0]) <= cfg.arena);
    CHECK(std::abs(env.g[1]) <= cfg.arena);
    const double d = std::hypot(env.g[0] - env.p[0], env.g[1] - env.p[1]);
    CHECK(d >= cfg.min_goal_dist);
    CHECK(d <= cfg.max_goal_dist);
    CHECK(!env.at_goal());
  }
}

TEST_CASE("steps are clipped to the action bound") {
  ToyEnv env;
  env.cfg = ToyEnvConfig{};
  env.p = {0.0, 0.0};
  env.g = {1.0, 0.0};
  env.step(10.0, 0.0);
  CHECK(env.p[0] == doctest::Approx(env.cfg.action_bound).epsilon(1e-12));
  env.step(0.0, -0.001);
  CHECK(env.p[1] == doctest::Approx(-0.001).epsilon(1e-12));
}

TEST_CASE("noise-free expert heads straight at the goal") {
  ExpertConfig ec;
  ec.jitter = 0.0;
  Rng rng(1, 0);
  Vec2 p{0.0, 0.0}, g{1.0, 0.0};
  Mat chunk = expert_chunk(p, g, ec, rng);
  REQUIRE(chunk.rows() == static_cast<std::size_t>(ec.horizon));
  REQUIRE(chunk.cols() == 2);
  CHECK(chunk(0, 0) == doctest::Approx(ec.step_len).epsilon(1e-12));
  CHECK(std::abs(chunk(0, 1)) < 1e-12);
  // step lengths never exceed step_len and never overshoot the goal
  double travelled = 0.0;
  for (std::size_t i = 0; i < chunk.rows(); ++i) {
    const double len = std::hypot(chunk(i, 0), chunk(i, 1));
    CHECK(len <= ec.step_len + 1e-12);
    travelled += chunk(i, 0);
  }
  CHECK(travelled <= 1.0 + 1e-12);
}

TEST_CASE("scripted controller succeeds, do-nothing fails") {
  ToyEnvConfig cfg;
  ExpertConfig ec;
  Rng rng(11, 0);
  ToyEnv env = sample_env(cfg, rng);

  Rng prng(12, 0);
  RolloutResult ok = rollout(scripted_policy(ec), env, 4, prng);
  CHECK(ok.success);
  CHECK(ok.steps <= cfg.step_budget);
  CHECK(ok.nfe == 0);  // no model involved

  Rng zrng(13, 0);
  RolloutResult bad = rollout(zero_policy(ec.horizon), env, 4, zrng);
  CHECK(!bad.success);
  CHECK(bad.steps == cfg.step_budget);
}

TEST_CASE("latched episodes pin the replan count") {
  ToyEnvConfig cfg;
  ExpertConfig ec;
  Rng rng(21, 0);
  ToyEnv env = sample_env(cfg, rng);

  for (int n_act : {1, 2, 4, 8}) {
    Rng prng(22, 0);
    RolloutResult r = rollout(scripted_policy(ec), env, n_act, prng, true);
    CHECK(r.success);
    const int want = (cfg.step_budget + n_act - 1) / n_act;
    CHECK(r.replans == want);
    // success moment is still the first crossing, not the episode end
    CHECK(r.steps < cfg.step_budget);
  }
}

TEST_CASE("model policies report one evaluation per sampler step") {
  Rng init(31, 0);
  VelocityNet net(policy_net_cfg(), init);
  ToyEnvConfig cfg;
  Rng rng(32, 0);
  ToyEnv env = sample_env(cfg, rng);

  Rng prng(33, 0);
  RolloutResult r = rollout(net_policy(net, SamplerKind::Instantaneous, 3), env, 4, prng, true);
  const int replans = (cfg.step_budget + 3) / 4;
  CHECK(r.replans == replans);
  CHECK(r.nfe == static_cast<long long>(replans) * 3);

  Rng prng2(34, 0);
  RolloutResult r1 = rollout(net_policy(net, SamplerKind::FlowMap, 1), env, 4, prng2, true);
  CHECK(r1.nfe == replans);
}

TEST_CASE("offline metrics: aggregates are consistent and reruns identical") {
  Rng init(41, 0);
  VelocityNet net(policy_net_cfg(), init);
  ToyEnvConfig env_cfg;
  ExpertConfig ec;
  Rng drng(42, 0);
  Dataset held = make_toy_dataset(env_cfg, ec, 64, drng);

  MetricsReport a = offline_metrics(make_field(net), SamplerKind::Instantaneous, 2, held, 1, Rng(43, 0));
  MetricsReport b = offline_metrics(make_field(net), SamplerKind::Instantaneous, 2, held, 1, Rng(43, 0));
  CHECK(a.n_samples == 64);
  CHECK(a.n_diverged == 0);
  CHECK(a.nfe_per_action == 2);
  CHECK(a.avg_mse == b.avg_mse);
  CHECK(a.p95_mse == b.p95_mse);

  CHECK(a.median_mse <= a.p90_mse);
  CHECK(a.p90_mse <= a.p95_mse);
  CHECK(a.avg_mse > 0.0);
  REQUIRE(a.per_sample_mse.size() == 64);

  // aggregate columns are recomputable from the per-sample column
  double s = 0.0;
  for (double v : a.per_sample_mse) s += v;
  CHECK(a.avg_mse == doctest::Approx(s / 64.0).epsilon(1e-12));
}

TEST_CASE("paired noise makes the two samplers identical on a fresh model") {
  // with the target-time pathway at zero, a K=1 instantaneous step and a K=1
  // flow-map jump are the same function of the same noise
  Rng init(51, 0);
  VelocityNet net(policy_net_cfg(), init);
  ToyEnvConfig env_cfg;
  ExpertConfig ec;
  Rng drng(52, 0);
  Dataset held = make_toy_dataset(env_cfg, ec, 32, drng);

  MetricsReport inst = offline_metrics(make_field(net), SamplerKind::Instantaneous, 1, held, 1, Rng(53, 0));
  MetricsReport jump = offline_metrics(make_field(net), SamplerKind::FlowMap, 1, held, 1, Rng(53, 0));
  REQUIRE(inst.per_sample_mse.size() == jump.per_sample_mse.size());
  for (std::size_t i = 0; i < inst.per_sample_mse.size(); ++i)
    CHECK(inst.per_sample_mse[i] == jump.per_sample_mse[i]);
}

TEST_CASE("step sweep reports both models across the grid with paired baselines") {
  Rng i1(61, 0), i2(61, 0);  // same seed: student == teacher
  VelocityNet teacher(policy_net_cfg(), i1);
  VelocityNet student(policy_net_cfg(), i2);
  ToyEnvConfig env_cfg;
  ExpertConfig ec;
  Rng drng(62, 0);
  Dataset held = make_toy_dataset(env_cfg, ec, 24, drng);

  SweepResult sw = step_sweep(teacher, student, {1, 2, 4}, held, 1, Rng(63, 0), false);
  REQUIRE(sw.rows.size() == 6);
  for (const SweepRow& row : sw.rows) {
    CHECK(row.metrics.nfe_per_action == row.K);
    if (row.K == 1) CHECK(row.delta_mse_vs_1 == 0.0);
    CHECK(row.metrics.n_samples == 24);
  }
  // identical parameters plus a zero target-time pathway: the K=1 rows of the
  // two methods coincide exactly
  const SweepRow* t1 = nullptr;
  const SweepRow* s1 = nullptr;
  for (const SweepRow& row : sw.rows) {
    if (row.K == 1 && row.method == "teacher") t1 = &row;
    if (row.K == 1 && row.method == "student") s1 = &row;
  }
  REQUIRE(t1 != nullptr);
  REQUIRE(s1 != nullptr);
  CHECK(t1->metrics.avg_mse == s1->metrics.avg_mse);
}

TEST_CASE("closed-loop sweep pins the exact evaluation budget per cell") {
  Rng i1(71, 0);
  VelocityNet teacher(policy_net_cfg(), i1);
  VelocityNet student = teacher;
  ToyEnvConfig env_cfg;

  NactSweepResult r = nact_sweep(teacher, 10, student, env_cfg, {1, 4}, 6, Rng(72, 0), false);
  REQUIRE(r.cells.size() == 4);
  for (const NactCell& c : r.cells) {
    CHECK(c.episodes == 6);
    CHECK(c.success_rate >= 0.0);
    CHECK(c.success_rate <= 1.0);
    const int replans = (env_cfg.step_budget + c.n_act - 1) / c.n_act;
    const int k = c.method == "teacher" ? 10 : 1;
    CHECK(c.mean_episode_nfe == doctest::Approx(static_cast<double>(replans) * k).epsilon(1e-12));
    CHECK(c.total_nfe == static_cast<long long>(replans) * k * 6);
  }
}

TEST_CASE("offline metrics count and exclude diverged samples") {
  ToyEnvConfig env_cfg;
  ExpertConfig ec;
  Rng drng(81, 0);
  Dataset held = make_toy_dataset(env_cfg, ec, 16, drng);

  // diverge whenever the sample's noise draw starts in the upper tail
  VelocityFn sometimes = [](const Mat& x, double, double, const ContextVec&) {
    Mat v(x.rows(), x.cols(), 0.0);
    if (x[0] > 1.5) v[0] = std::numeric_limits<double>::quiet_NaN();
    return v;
  };
  MetricsReport m = offline_metrics(sometimes, SamplerKind::Instantaneous, 1, held, 1, Rng(82, 0));
  // diverged draws are excluded from the scored set but still accounted for
  CHECK(m.n_samples + m.n_diverged == 16);
  CHECK(m.n_diverged >= 1);
  CHECK(m.n_samples >= 1);
  CHECK(m.per_sample_mse.size() == static_cast<std::size_t>(m.n_samples));
  for (double v : m.per_sample_mse) CHECK(std::isfinite(v));
}
