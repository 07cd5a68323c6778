#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "snapflow/flow.hpp"
#include "snapflow/mat.hpp"
#include "snapflow/net.hpp"
#include "snapflow/rng.hpp"

namespace snapflow {

struct TrainConfig {
  double alpha = 0.5;   // probability of the regression branch per sample
  double lambda = 0.1;  // weight on the self-distillation branch
  double lr_peak = 1e-3;
  int warmup_steps = 500;
  int total_steps = 2000;
  double grad_clip_norm = 1.0;
  double clamp_lo = -20.0;
  double clamp_hi = 20.0;
  int batch_size = 64;
  std::uint64_t seed = 7;
  double weight_decay = 0.0;
  int log_every = 50;

  void validate() const;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double fm_loss = 0.0;        // mean over regression-branch samples, 0 if none
  double shortcut_loss = 0.0;  // mean over distillation-branch samples (pre-weight), 0 if none
  double grad_norm = 0.0;      // global norm before clipping
  double lr = 0.0;
};
using TrainLog = std::vector<TrainLogRow>;

struct Dataset {
  std::vector<Mat> chunks;
  std::vector<ContextVec> contexts;  // parallel to chunks; entries may be empty
  std::size_t size() const { return chunks.size(); }
};

struct Sample {
  const Mat* x0 = nullptr;
  const ContextVec* ctx = nullptr;
};
using Batch = std::vector<Sample>;

// Linear warmup to lr_peak over warmup_steps, then cosine decay to exactly
// zero at total_steps. lr(0) = lr_peak / warmup_steps.
double lr_schedule(const TrainConfig& cfg, int step);

struct LossResult {
  double loss = 0.0;      // combined objective, mean over the batch
  double fm = 0.0;        // per-branch diagnostics
  double shortcut = 0.0;
  int fm_n = 0;
  int sc_n = 0;
  std::vector<double> grads;
};

// Velocity regression on noised data: per sample draw t ~ U[0,1) and a fresh
// noise chunk, then match F(x_t, t, t | c) to eps - x0 in mean squared error
// over all chunk entries. RNG use per sample is one uniform (t) followed by
// H*D normals (eps).
LossResult fm_loss(const VelocityNet& net, const Batch& batch, Rng& rng);

// Two-evaluation self-distillation target from pure noise x1: average of the
// instantaneous velocities at t=1 and at the half-way Euler midpoint, clamped
// elementwise. No gradients flow through this value.
Mat shortcut_target(const VelocityFn& field, const Mat& x1, const ContextVec& ctx,
                    double clamp_lo, double clamp_hi);

// Squared error of the one-jump prediction F(x1, 0, 1 | c) against the
// detached target, mean over chunk entries, with its parameter gradient.
LossResult shortcut_loss(const VelocityNet& net, const Mat& x1, const ContextVec& ctx,
                         const TrainConfig& cfg);

// Per-sample stochastic branch mix: with probability alpha a sample
// contributes the regression loss, otherwise lambda times the distillation
// loss. RNG use per sample: one uniform (branch), one uniform (t), H*D
// normals. The distillation branch reuses the drawn noise as x1.
LossResult mixed_batch_loss(const VelocityNet& net, const Batch& batch, const TrainConfig& cfg,
                            Rng& rng);

// Owns the model, the trainability mask, and the AdamW state. step() is one
// optimiser update; run() is the full loop with uniform-with-replacement
// batch sampling and cadence logging (every log_every steps plus the final
// step). Throws DivergenceError on non-finite losses or gradients.
class Trainer {
 public:
  Trainer(VelocityNet net, const TrainConfig& cfg, const TrainableSelector& sel);

  TrainLogRow step(const Batch& batch, Rng& rng);
  TrainLog run(const Dataset& data, Rng& rng);

  const VelocityNet& net() const { return net_; }
  VelocityNet take_net() { return std::move(net_); }
  int steps_done() const { return step_; }

 private:
  VelocityNet net_;
  TrainConfig cfg_;
  std::vector<std::uint8_t> mask_;
  std::vector<double> m_, v_;
  int step_ = 0;
};

// Stage one: pure velocity regression (alpha forced to 1). The target-time
// pathway stays frozen at zero so the later distillation stage starts from a
// model whose one-jump behaviour matches the teacher exactly.
std::pair<VelocityNet, TrainLog> pretrain_fm(VelocityNet net, const Dataset& data,
                                             TrainConfig cfg, Rng& rng);

// Stage two: branch-mixed self-distillation on top of a converged stage-one
// model. The context encoder is frozen; trunk, clock-time and target-time
// pathways train.
std::pair<VelocityNet, TrainLog> distill(VelocityNet pretrained, const Dataset& data,
                                         const TrainConfig& cfg, Rng& rng);

}  // namespace snapflow
