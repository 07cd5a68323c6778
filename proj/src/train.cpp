#include "snapflow/train.hpp"

#include <cmath>
#include <stdexcept>

#include "snapflow/errors.hpp"

namespace snapflow {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kPi = 3.141592653589793238462643383279;
}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("TrainConfig: alpha outside [0, 1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
  if (!(lr_peak > 0.0)) throw std::invalid_argument("TrainConfig: lr_peak must be > 0");
  if (warmup_steps < 1) throw std::invalid_argument("TrainConfig: warmup_steps must be >= 1");
  if (total_steps < 0) throw std::invalid_argument("TrainConfig: total_steps must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: grad_clip_norm must be > 0");
  if (!(clamp_lo < clamp_hi)) throw std::invalid_argument("TrainConfig: clamp range empty");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
}

double lr_schedule(const TrainConfig& cfg, int step) {
  if (step < cfg.warmup_steps) {
    return cfg.lr_peak * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  const int span = cfg.total_steps - cfg.warmup_steps;
  if (span <= 0) return cfg.lr_peak;
  const double frac = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(span);
  return cfg.lr_peak * 0.5 * (1.0 + std::cos(kPi * std::min(frac, 1.0)));
}

namespace {

// Accumulates one sample's contribution. upstream_scale multiplies the plain
// d(mean squared error)/d(prediction).
void accumulate(const VelocityNet& net, const Mat& x_in, double s, double t,
                const ContextVec& ctx, const Mat& resid, double upstream_scale,
                std::vector<double>& grads) {
  Mat upstream = resid;
  upstream *= upstream_scale;
  const std::vector<double> g = net.backward(x_in, s, t, ctx, upstream);
  for (std::size_t k = 0; k < g.size(); ++k) grads[k] += g[k];
}

}  // namespace

LossResult fm_loss(const VelocityNet& net, const Batch& batch, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("fm_loss: empty batch");
  LossResult r;
  r.grads.assign(net.n_params(), 0.0);
  const double hd = static_cast<double>(net.config().chunk_size());
  const double bsz = static_cast<double>(batch.size());
  for (const Sample& smp : batch) {
    const double t = rng.uniform();
    const Mat eps = gauss_sample(rng, smp.x0->rows(), smp.x0->cols());
    const FlowSample fs = interpolate(*smp.x0, eps, t);
    const Mat pred = net.forward(fs.xt, t, t, *smp.ctx);
    const Mat resid = pred - fs.v_cond;
    const double l = sq_norm(resid) / hd;
    r.loss += l / bsz;
    r.fm += l;
    ++r.fm_n;
    accumulate(net, fs.xt, t, t, *smp.ctx, resid, 2.0 / (hd * bsz), r.grads);
  }
  r.fm /= static_cast<double>(r.fm_n);
  return r;
}

Mat shortcut_target(const VelocityFn& field, const Mat& x1, const ContextVec& ctx,
                    double clamp_lo, double clamp_hi) {
  // Trapezoid estimate of the average velocity over [0, 1]: evaluate at the
  // endpoint, Euler-step to the midpoint, evaluate again, average.
  const Mat v1 = field(x1, 1.0, 1.0, ctx);
  Mat xm = x1;
  axpy(xm, -0.5, v1);
  const Mat vm = field(xm, 0.5, 0.5, ctx);
  Mat target = 0.5 * (v1 + vm);
  target.clamp(clamp_lo, clamp_hi);
  return target;
}

LossResult shortcut_loss(const VelocityNet& net, const Mat& x1, const ContextVec& ctx,
                         const TrainConfig& cfg) {
  LossResult r;
  r.grads.assign(net.n_params(), 0.0);
  const double hd = static_cast<double>(net.config().chunk_size());
  const Mat target = shortcut_target(make_field(net), x1, ctx, cfg.clamp_lo, cfg.clamp_hi);
  const Mat student = net.forward(x1, 0.0, 1.0, ctx);
  const Mat resid = student - target;
  r.loss = sq_norm(resid) / hd;
  r.shortcut = r.loss;
  r.sc_n = 1;
  // Only the one-jump prediction carries gradient; the target is a constant.
  accumulate(net, x1, 0.0, 1.0, ctx, resid, 2.0 / hd, r.grads);
  return r;
}

LossResult mixed_batch_loss(const VelocityNet& net, const Batch& batch, const TrainConfig& cfg,
                            Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("mixed_batch_loss: empty batch");
  LossResult r;
  r.grads.assign(net.n_params(), 0.0);
  const double hd = static_cast<double>(net.config().chunk_size());
  const double bsz = static_cast<double>(batch.size());
  for (const Sample& smp : batch) {
    // Fixed per-sample draw order (branch, t, noise) regardless of the
    // branch taken, so trajectories with different alpha stay comparable.
    const double branch = rng.uniform();
    const double t = rng.uniform();
    const Mat eps = gauss_sample(rng, smp.x0->rows(), smp.x0->cols());
    if (branch < cfg.alpha) {
      const FlowSample fs = interpolate(*smp.x0, eps, t);
      const Mat pred = net.forward(fs.xt, t, t, *smp.ctx);
      const Mat resid = pred - fs.v_cond;
      const double l = sq_norm(resid) / hd;
      r.loss += l / bsz;
      r.fm += l;
      ++r.fm_n;
      accumulate(net, fs.xt, t, t, *smp.ctx, resid, 2.0 / (hd * bsz), r.grads);
    } else {
      // The drawn noise chunk doubles as the pure-noise start x1.
      const Mat& x1 = eps;
      const Mat target = shortcut_target(make_field(net), x1, *smp.ctx, cfg.clamp_lo, cfg.clamp_hi);
      const Mat student = net.forward(x1, 0.0, 1.0, *smp.ctx);
      const Mat resid = student - target;
      const double l = sq_norm(resid) / hd;
      r.loss += cfg.lambda * l / bsz;
      r.shortcut += l;
      ++r.sc_n;
      accumulate(net, x1, 0.0, 1.0, *smp.ctx, resid, 2.0 * cfg.lambda / (hd * bsz), r.grads);
    }
  }
  if (r.fm_n > 0) r.fm /= static_cast<double>(r.fm_n);
  if (r.sc_n > 0) r.shortcut /= static_cast<double>(r.sc_n);
  return r;
}

Trainer::Trainer(VelocityNet net, const TrainConfig& cfg, const TrainableSelector& sel)
    : net_(std::move(net)), cfg_(cfg) {
  cfg_.validate();
  mask_ = freeze_mask(net_, sel);
  m_.assign(net_.n_params(), 0.0);
  v_.assign(net_.n_params(), 0.0);
}

TrainLogRow Trainer::step(const Batch& batch, Rng& rng) {
  LossResult r = mixed_batch_loss(net_, batch, cfg_, rng);

  // Frozen parameters contribute nothing to the norm, the clip, or the update.
  double norm2 = 0.0;
  for (std::size_t k = 0; k < r.grads.size(); ++k) {
    if (!mask_[k]) {
      r.grads[k] = 0.0;
      continue;
    }
    norm2 += r.grads[k] * r.grads[k];
  }
  const double grad_norm = std::sqrt(norm2);
  if (!std::isfinite(r.loss) || !std::isfinite(grad_norm)) {
    throw DivergenceError(step_, "training diverged at step " + std::to_string(step_));
  }
  if (grad_norm > cfg_.grad_clip_norm && grad_norm > 0.0) {
    const double scale = cfg_.grad_clip_norm / grad_norm;
    for (double& g : r.grads) g *= scale;
  }

  const double lr = lr_schedule(cfg_, step_);
  const double t_adam = static_cast<double>(step_ + 1);
  const double bc1 = 1.0 - std::pow(kBeta1, t_adam);
  const double bc2 = 1.0 - std::pow(kBeta2, t_adam);
  auto& p = net_.params();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!mask_[k]) continue;
    m_[k] = kBeta1 * m_[k] + (1.0 - kBeta1) * r.grads[k];
    v_[k] = kBeta2 * v_[k] + (1.0 - kBeta2) * r.grads[k] * r.grads[k];
    const double mhat = m_[k] / bc1;
    const double vhat = v_[k] / bc2;
    p[k] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + cfg_.weight_decay * p[k]);
  }

  TrainLogRow row;
  row.step = step_;
  row.loss = r.loss;
  row.fm_loss = r.fm;
  row.shortcut_loss = r.shortcut;
  row.grad_norm = grad_norm;
  row.lr = lr;
  ++step_;
  return row;
}

TrainLog Trainer::run(const Dataset& data, Rng& rng) {
  if (cfg_.total_steps == 0) return {};
  if (data.size() == 0) throw std::invalid_argument("Trainer::run: empty dataset");
  TrainLog log;
  for (int s = 0; s < cfg_.total_steps; ++s) {
    Batch batch;
    batch.reserve(cfg_.batch_size);
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const std::size_t i = rng.below(data.size());
      batch.push_back(Sample{&data.chunks[i], &data.contexts[i]});
    }
    const TrainLogRow row = step(batch, rng);
    if (row.step % cfg_.log_every == 0 || row.step == cfg_.total_steps - 1) {
      log.push_back(row);
    }
  }
  return log;
}

std::pair<VelocityNet, TrainLog> pretrain_fm(VelocityNet net, const Dataset& data, TrainConfig cfg,
                                             Rng& rng) {
  cfg.alpha = 1.0;
  TrainableSelector sel;
  sel.phi_s = false;  // keep the target-time pathway at its zero init
  Trainer tr(std::move(net), cfg, sel);
  TrainLog log = tr.run(data, rng);
  return {tr.take_net(), std::move(log)};
}

std::pair<VelocityNet, TrainLog> distill(VelocityNet pretrained, const Dataset& data,
                                         const TrainConfig& cfg, Rng& rng) {
  TrainableSelector sel;
  sel.context = false;  // conditioning encoder is frozen after stage one
  Trainer tr(std::move(pretrained), cfg, sel);
  TrainLog log = tr.run(data, rng);
  return {tr.take_net(), std::move(log)};
}

}  // namespace snapflow
