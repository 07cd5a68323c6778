#pragma once

#include <functional>
#include <vector>

#include "snapflow/mat.hpp"

namespace snapflow {

// Conditioning vector handed to a velocity field (may be empty for
// unconditional data).
using ContextVec = std::vector<double>;

// A velocity field F(x, s, t | c). s is the target time of an average
// velocity; instantaneous fields simply ignore s or receive s == t.
using VelocityFn = std::function<Mat(const Mat& x, double s, double t, const ContextVec& ctx)>;

using ActionChunk = Mat;

// One point on the noising path x_t = (1 - t) x0 + t eps together with the
// conditional velocity target v = eps - x0.
struct FlowSample {
  Mat x0;
  Mat eps;
  double t = 0.0;
  Mat xt;
  Mat v_cond;
};

FlowSample interpolate(const Mat& x0, const Mat& eps, double t);

struct SampleResult {
  Mat x;
  long long nfe = 0;  // exact number of field evaluations this invocation
};

// K backward Euler steps from x at t=1 down to t=0 on the uniform grid
// t_k = 1 - k/K: x <- x - (1/K) F(x, t, t). The final field evaluation
// happens at t = 1/K. Throws DivergenceError on non-finite iterates.
SampleResult euler_sample(const VelocityFn& field, const Mat& x1, int K, const ContextVec& ctx);

// K flow-map steps on the same grid, each jumping to the next grid time:
// x <- x - (t - s) F(x, s, t) with s = t - 1/K. With K = 1 this is exactly
// one_nfe_sample.
SampleResult consistency_sample(const VelocityFn& field, const Mat& x1, int K,
                                const ContextVec& ctx);

// Single application of the learned transport: x_t - (t - s) F(x_t, s, t).
// Requires s <= t.
Mat flow_map(const VelocityFn& field, const Mat& xt, double s, double t, const ContextVec& ctx);

// One-evaluation generation from pure noise: x1 - F(x1, 0, 1).
SampleResult one_nfe_sample(const VelocityFn& field, const Mat& x1, const ContextVec& ctx);

}  // namespace snapflow
