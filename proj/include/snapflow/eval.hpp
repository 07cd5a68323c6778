#pragma once

#include <string>
#include <vector>

#include "snapflow/flow.hpp"
#include "snapflow/net.hpp"
#include "snapflow/toy_env.hpp"
#include "snapflow/train.hpp"

namespace snapflow {

// How a sampler walks the time grid. Instantaneous: classic Euler with
// s == t at every call (how a stage-one model is meant to be used). FlowMap:
// each call receives the next grid time as the jump target (how a distilled
// model is meant to be used; with K == 1 it is the single-jump sampler).
enum class SamplerKind { Instantaneous, FlowMap };

struct MetricsReport {
  int k_steps = 0;
  long long nfe_per_action = 0;
  int n_samples = 0;
  int n_diverged = 0;
  double avg_mse = 0.0;
  double median_mse = 0.0;
  double std_mse = 0.0;
  double p90_mse = 0.0;
  double p95_mse = 0.0;
  double avg_cos = 0.0;
  double seconds_per_action = 0.0;  // measured; excluded from deterministic artifacts
  std::vector<double> per_sample_mse;
  std::vector<double> per_sample_cos;
};

// Regenerates every held-out chunk from noise and scores it against the
// ground-truth chunk: per-sample MSE over all H*D entries, cosine similarity
// per sample then averaged. Noise is drawn from per-sample sub-streams of
// the given generator, so two calls with equal seeds consume identical noise
// regardless of sampler or K (paired comparisons). Diverged samples are
// excluded and counted.
MetricsReport offline_metrics(const VelocityFn& field, SamplerKind kind, int K,
                              const Dataset& heldout, int n_noise, Rng rng,
                              bool measure_time = false);

struct SweepRow {
  std::string method;
  int K = 0;
  MetricsReport metrics;
  double delta_mse_vs_1 = 0.0;  // avg MSE minus the same method's K=1 value
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Offline quality versus step count for the stage-one model (instantaneous
// stepping) and the distilled model (flow-map stepping), on identical
// held-out data and identical noise.
SweepResult step_sweep(const VelocityNet& teacher, const VelocityNet& student,
                       const std::vector<int>& k_grid, const Dataset& heldout, int n_noise,
                       Rng rng, bool timing);

struct PolicyResult {
  Mat chunk;
  long long nfe = 0;
};
using Policy = std::function<PolicyResult(const Vec2& p, const Vec2& g, Rng& rng)>;

// Chunk policy from a model: draw a noise chunk, run the sampler, emit the
// generated chunk. NFE per call equals K.
Policy net_policy(const VelocityNet& net, SamplerKind kind, int K);

// Straight-line oracle controller (zero NFE), and a do-nothing policy.
Policy scripted_policy(const ExpertConfig& cfg);
Policy zero_policy(int horizon);

struct RolloutResult {
  bool success = false;
  int steps = 0;     // ticks until first success, or the full budget
  int replans = 0;
  long long nfe = 0;
  double policy_seconds = 0.0;
};

// Receding-horizon execution: every n_act ticks the policy is queried and the
// first n_act rows of its chunk are executed. With latch_full_budget the
// episode always runs all T ticks and success is a latched predicate, which
// pins the replan count (and hence episode NFE) to ceil(T / n_act) for every
// policy; otherwise the episode stops at the first success.
RolloutResult rollout(const Policy& policy, ToyEnv env, int n_act, Rng& rng,
                      bool latch_full_budget = false);

struct NactCell {
  std::string method;
  int n_act = 0;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;
  double mean_episode_nfe = 0.0;
  long long total_nfe = 0;
  double mean_policy_seconds = 0.0;
};

struct NactSweepResult {
  std::vector<NactCell> cells;
};

// Closed-loop comparison across replanning intervals. Episodes are paired:
// cell (method, n_act, episode e) uses the same start, goal, and policy noise
// stream for every method. Episodes run the full budget with latched success
// so episode NFE is exactly ceil(T / n_act) * K for a K-step sampler.
NactSweepResult nact_sweep(const VelocityNet& teacher, int teacher_k, const VelocityNet& student,
                           const ToyEnvConfig& env_cfg, const std::vector<int>& nact_grid,
                           int episodes, Rng rng, bool timing);

}  // namespace snapflow
