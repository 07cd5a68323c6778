#include "snapflow/eval.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "snapflow/errors.hpp"
#include "snapflow/stats.hpp"

namespace snapflow {

namespace {

SampleResult run_sampler(const VelocityFn& field, SamplerKind kind, int K, const Mat& x1,
                         const ContextVec& ctx) {
  if (kind == SamplerKind::Instantaneous) return euler_sample(field, x1, K, ctx);
  return consistency_sample(field, x1, K, ctx);
}

}  // namespace

MetricsReport offline_metrics(const VelocityFn& field, SamplerKind kind, int K,
                              const Dataset& heldout, int n_noise, Rng rng, bool measure_time) {
  if (heldout.size() == 0) throw std::invalid_argument("offline_metrics: empty held-out set");
  if (n_noise < 1) throw std::invalid_argument("offline_metrics: n_noise must be >= 1");

  MetricsReport rep;
  rep.k_steps = K;
  rep.nfe_per_action = K;

  double elapsed = 0.0;
  long long timed_calls = 0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const Mat& x0 = heldout.chunks[i];
    const ContextVec& ctx = heldout.contexts[i];
    for (int j = 0; j < n_noise; ++j) {
      // One sub-stream per (sample, noise index): pairing across methods.
      Rng sub = rng.substream(i * static_cast<std::size_t>(n_noise) + j);
      const Mat x1 = gauss_sample(sub, x0.rows(), x0.cols());
      Mat xhat;
      try {
        if (measure_time) {
          const auto t0 = std::chrono::steady_clock::now();
          xhat = run_sampler(field, kind, K, x1, ctx).x;
          const auto t1 = std::chrono::steady_clock::now();
          elapsed += std::chrono::duration<double>(t1 - t0).count();
          ++timed_calls;
        } else {
          xhat = run_sampler(field, kind, K, x1, ctx).x;
        }
      } catch (const DivergenceError&) {
        ++rep.n_diverged;
        continue;
      }
      const Mat err = xhat - x0;
      rep.per_sample_mse.push_back(sq_norm(err) / static_cast<double>(x0.size()));
      rep.per_sample_cos.push_back(cosine_similarity(xhat, x0));
      ++rep.n_samples;
    }
  }
  if (rep.n_samples == 0) throw std::runtime_error("offline_metrics: every sample diverged");

  rep.avg_mse = mean(rep.per_sample_mse);
  rep.median_mse = percentile(rep.per_sample_mse, 0.5);
  rep.std_mse = rep.per_sample_mse.size() > 1 ? sample_stddev(rep.per_sample_mse) : 0.0;
  rep.p90_mse = percentile(rep.per_sample_mse, 0.9);
  rep.p95_mse = percentile(rep.per_sample_mse, 0.95);
  rep.avg_cos = mean(rep.per_sample_cos);
  if (timed_calls > 0) rep.seconds_per_action = elapsed / static_cast<double>(timed_calls);
  return rep;
}

SweepResult step_sweep(const VelocityNet& teacher, const VelocityNet& student,
                       const std::vector<int>& k_grid, const Dataset& heldout, int n_noise,
                       Rng rng, bool timing) {
  SweepResult out;
  const VelocityFn tf = make_field(teacher);
  const VelocityFn sf = make_field(student);
  struct MethodSpec {
    const char* name;
    const VelocityFn* field;
    SamplerKind kind;
  };
  const MethodSpec methods[] = {
      {"teacher", &tf, SamplerKind::Instantaneous},
      {"student", &sf, SamplerKind::FlowMap},
  };
  for (const auto& m : methods) {
    double mse_at_1 = 0.0;
    bool have_1 = false;
    for (int K : k_grid) {
      SweepRow row;
      row.method = m.name;
      row.K = K;
      row.metrics = offline_metrics(*m.field, m.kind, K, heldout, n_noise, rng, timing);
      if (K == 1) {
        mse_at_1 = row.metrics.avg_mse;
        have_1 = true;
      }
      out.rows.push_back(std::move(row));
    }
    if (have_1) {
      for (auto& row : out.rows) {
        if (row.method == m.name) row.delta_mse_vs_1 = row.metrics.avg_mse - mse_at_1;
      }
    }
  }
  return out;
}

Policy net_policy(const VelocityNet& net, SamplerKind kind, int K) {
  const NetConfig& cfg = net.config();
  return [&net, cfg, kind, K](const Vec2& p, const Vec2& g, Rng& rng) {
    const ContextVec ctx{p[0], p[1], g[0], g[1]};
    const Mat x1 = gauss_sample(rng, cfg.horizon, cfg.dim);
    const SampleResult r = run_sampler(make_field(net), kind, K, x1, ctx);
    return PolicyResult{r.x, r.nfe};
  };
}

Policy scripted_policy(const ExpertConfig& cfg) {
  ExpertConfig noiseless = cfg;
  noiseless.jitter = 0.0;
  return [noiseless](const Vec2& p, const Vec2& g, Rng& rng) {
    return PolicyResult{expert_chunk(p, g, noiseless, rng), 0};
  };
}

Policy zero_policy(int horizon) {
  return [horizon](const Vec2&, const Vec2&, Rng&) {
    return PolicyResult{Mat(static_cast<std::size_t>(horizon), 2), 0};
  };
}

RolloutResult rollout(const Policy& policy, ToyEnv env, int n_act, Rng& rng,
                      bool latch_full_budget) {
  if (n_act < 1) throw std::invalid_argument("rollout: n_act must be >= 1");
  RolloutResult res;
  int tick = 0;
  bool latched = env.at_goal();
  int steps_to_success = latched ? 0 : -1;
  while (tick < env.cfg.step_budget) {
    if (!latch_full_budget && latched) break;
    const auto t0 = std::chrono::steady_clock::now();
    const PolicyResult pr = policy(env.p, env.g, rng);
    const auto t1 = std::chrono::steady_clock::now();
    res.policy_seconds += std::chrono::duration<double>(t1 - t0).count();
    res.nfe += pr.nfe;
    ++res.replans;
    const int rows = static_cast<int>(pr.chunk.rows());
    for (int i = 0; i < n_act && i < rows && tick < env.cfg.step_budget; ++i) {
      env.step(pr.chunk(i, 0), pr.chunk(i, 1));
      ++tick;
      if (!latched && env.at_goal()) {
        latched = true;
        steps_to_success = tick;
      }
      if (!latch_full_budget && latched) break;
    }
  }
  res.success = latched;
  res.steps = latched ? steps_to_success : tick;
  return res;
}

NactSweepResult nact_sweep(const VelocityNet& teacher, int teacher_k, const VelocityNet& student,
                           const ToyEnvConfig& env_cfg, const std::vector<int>& nact_grid,
                           int episodes, Rng rng, bool timing) {
  (void)timing;  // wall-clock is always collected; writers decide where it goes
  NactSweepResult out;
  const Policy teacher_pi = net_policy(teacher, SamplerKind::Instantaneous, teacher_k);
  const Policy student_pi = net_policy(student, SamplerKind::FlowMap, 1);
  struct MethodSpec {
    const char* name;
    const Policy* pi;
  };
  const MethodSpec methods[] = {{"teacher", &teacher_pi}, {"student", &student_pi}};

  Rng env_stream = rng.substream(1);
  Rng noise_stream = rng.substream(2);
  for (const auto& m : methods) {
    for (int n_act : nact_grid) {
      NactCell cell;
      cell.method = m.name;
      cell.n_act = n_act;
      cell.episodes = episodes;
      std::vector<double> steps, nfes, secs;
      int wins = 0;
      for (int e = 0; e < episodes; ++e) {
        // Same episode seed and same policy-noise stream for every method
        // and every n_act: strictly paired comparisons.
        Rng env_rng = env_stream.substream(e);
        Rng pol_rng = noise_stream.substream(e);
        const ToyEnv env = sample_env(env_cfg, env_rng);
        const RolloutResult r = rollout(*m.pi, env, n_act, pol_rng, /*latch_full_budget=*/true);
        wins += r.success ? 1 : 0;
        steps.push_back(static_cast<double>(r.steps));
        nfes.push_back(static_cast<double>(r.nfe));
        secs.push_back(r.policy_seconds);
        cell.total_nfe += r.nfe;
      }
      cell.success_rate = static_cast<double>(wins) / static_cast<double>(episodes);
      cell.mean_steps = mean(steps);
      cell.mean_episode_nfe = mean(nfes);
      cell.mean_policy_seconds = mean(secs);
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace snapflow
