#pragma once

#include <cstddef>
#include <vector>

#include "snapflow/mat.hpp"
#include "snapflow/rng.hpp"

namespace snapflow {

struct MixtureComponent {
  double weight = 1.0;
  std::vector<double> mean;
  double sigma = 1.0;  // isotropic scale, strictly positive
};

// Isotropic Gaussian mixture over R^D with every conditional moment of the
// noising path x_t = (1 - t) x0 + t eps available in closed form. This is the
// ground-truth reference that the learned models and the Monte-Carlo checks
// are measured against.
//
// Construction rejects degenerate specs: empty component lists, inconsistent
// dimensions, non-positive weights, and non-positive sigmas (a point mass is
// not a valid data distribution here; "near-point" data uses a small sigma).
// Weights are normalised to sum to one.
class MixtureSpec {
 public:
  explicit MixtureSpec(std::vector<MixtureComponent> components);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return comps_.size(); }
  const std::vector<MixtureComponent>& components() const { return comps_; }

  // n independent draws from the mixture, one per row.
  Mat sample(Rng& rng, std::size_t n) const;

  // Posterior of x0 given x_t = x at time t in (0, 1].
  struct Posterior {
    std::vector<double> resp;                    // responsibilities, sum to 1
    std::vector<std::vector<double>> comp_mean;  // per-component posterior mean
    std::vector<double> comp_var;                // per-component per-dim variance
    std::vector<double> mean;                    // mixture posterior mean of x0
    double var_trace_over_d = 0.0;               // tr Var(x0 | x_t) / D
  };
  Posterior posterior(const std::vector<double>& x, double t) const;

  // E[eps - x0 | x_t = x]. Defined for t in [0, 1]; the t = 0 limit on the
  // data support is -x.
  std::vector<double> marginal_velocity(const std::vector<double>& x, double t) const;

  // tr Var(eps - x0 | x_t = x) / D, the per-dimension conditional velocity
  // variance. Equals Var(x0 | x_t) / t^2 for t > 0 and exactly 1 at t = 0
  // (the conditional noise is a standard normal there). Strictly positive.
  double conditional_covariance(const std::vector<double>& x, double t) const;

  // Full D x D conditional velocity covariance for small D (<= 4).
  Mat conditional_covariance_matrix(const std::vector<double>& x, double t) const;

 private:
  std::vector<MixtureComponent> comps_;
  std::size_t dim_ = 0;
};

}  // namespace snapflow
