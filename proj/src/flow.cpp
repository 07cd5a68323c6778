#include "snapflow/flow.hpp"

#include <cmath>
#include <string>

#include "snapflow/errors.hpp"

namespace snapflow {

FlowSample interpolate(const Mat& x0, const Mat& eps, double t) {
  x0.require_same_shape(eps);
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t outside [0, 1]");
  FlowSample s;
  s.x0 = x0;
  s.eps = eps;
  s.t = t;
  s.xt = (1.0 - t) * x0 + t * eps;
  s.v_cond = eps - x0;
  return s;
}

SampleResult euler_sample(const VelocityFn& field, const Mat& x1, int K, const ContextVec& ctx) {
  if (K < 1) throw std::invalid_argument("euler_sample: K must be >= 1");
  SampleResult r;
  r.x = x1;
  const double dt = 1.0 / static_cast<double>(K);
  for (int k = 0; k < K; ++k) {
    const double t = 1.0 - static_cast<double>(k) * dt;
    Mat v = field(r.x, t, t, ctx);
    ++r.nfe;
    axpy(r.x, -dt, v);
    if (!r.x.all_finite()) {
      throw DivergenceError(k, "euler_sample: diverged at step " + std::to_string(k));
    }
  }
  return r;
}

SampleResult consistency_sample(const VelocityFn& field, const Mat& x1, int K,
                                const ContextVec& ctx) {
  if (K < 1) throw std::invalid_argument("consistency_sample: K must be >= 1");
  SampleResult r;
  r.x = x1;
  const double dt = 1.0 / static_cast<double>(K);
  for (int k = 0; k < K; ++k) {
    const double t = 1.0 - static_cast<double>(k) * dt;
    const double s = t - dt;
    Mat v = field(r.x, s, t, ctx);
    ++r.nfe;
    axpy(r.x, -(t - s), v);
    if (!r.x.all_finite()) {
      throw DivergenceError(k, "consistency_sample: diverged at step " + std::to_string(k));
    }
  }
  return r;
}

Mat flow_map(const VelocityFn& field, const Mat& xt, double s, double t, const ContextVec& ctx) {
  if (s > t) throw std::invalid_argument("flow_map: s > t");
  Mat out = xt;
  Mat v = field(xt, s, t, ctx);
  axpy(out, -(t - s), v);
  return out;
}

SampleResult one_nfe_sample(const VelocityFn& field, const Mat& x1, const ContextVec& ctx) {
  SampleResult r;
  r.x = x1;
  Mat v = field(x1, 0.0, 1.0, ctx);
  r.nfe = 1;
  axpy(r.x, -1.0, v);
  if (!r.x.all_finite()) throw DivergenceError(0, "one_nfe_sample: diverged at step 0");
  return r;
}

}  // namespace snapflow
