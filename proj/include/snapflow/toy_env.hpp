#pragma once

#include <array>
#include <functional>

#include "snapflow/mat.hpp"
#include "snapflow/mixture.hpp"
#include "snapflow/rng.hpp"
#include "snapflow/train.hpp"

namespace snapflow {

using Vec2 = std::array<double, 2>;

// Planar point-mass reaching task. The agent observes its position and a
// goal, and moves by bounded displacement actions. Deterministic dynamics;
// all stochasticity lives in the episode draw and the policy.
struct ToyEnvConfig {
  double action_bound = 0.12;   // max per-step displacement norm
  int step_budget = 60;         // T
  double success_radius = 0.07; // within this of the goal counts as success
  double arena = 0.8;           // positions drawn uniformly from [-arena, arena]^2
  double min_goal_dist = 0.5;
  double max_goal_dist = 1.6;
};

struct ToyEnv {
  ToyEnvConfig cfg;
  Vec2 p{0.0, 0.0};
  Vec2 g{0.0, 0.0};

  bool at_goal() const;
  // Applies one displacement row, clipped to the action bound.
  void step(double ax, double ay);
};

// Fresh episode: start and goal drawn from the arena with a goal distance
// inside [min_goal_dist, max_goal_dist].
ToyEnv sample_env(const ToyEnvConfig& cfg, Rng& rng);

struct ExpertConfig {
  int horizon = 8;
  double step_len = 0.1;   // expert per-step displacement norm
  double jitter = 0.05;    // Gaussian noise added to every chunk entry
};

// Straight-line expert: H steps of length min(step_len, remaining distance)
// straight toward the goal, plus entrywise jitter. The regression target for
// stage-one training.
Mat expert_chunk(const Vec2& p, const Vec2& g, const ExpertConfig& cfg, Rng& rng);

// (chunk, context) pairs with context = (p, g). Fresh episode per sample.
Dataset make_toy_dataset(const ToyEnvConfig& env_cfg, const ExpertConfig& cfg, std::size_t n,
                         Rng& rng);

// Unconditional rows drawn from a mixture; context vectors are empty.
Dataset make_mixture_dataset(const MixtureSpec& spec, std::size_t horizon, std::size_t n,
                             Rng& rng);

}  // namespace snapflow
