#include "snapflow/mixture.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace snapflow {

MixtureSpec::MixtureSpec(std::vector<MixtureComponent> components) : comps_(std::move(components)) {
  if (comps_.empty()) throw std::invalid_argument("MixtureSpec: no components");
  dim_ = comps_[0].mean.size();
  if (dim_ == 0) throw std::invalid_argument("MixtureSpec: zero-dimensional mean");
  double wsum = 0.0;
  for (const auto& c : comps_) {
    if (c.mean.size() != dim_) throw std::invalid_argument("MixtureSpec: inconsistent dims");
    if (!(c.weight > 0.0)) throw std::invalid_argument("MixtureSpec: weight must be > 0");
    if (!(c.sigma > 0.0)) {
      throw std::invalid_argument("MixtureSpec: sigma must be > 0 (degenerate point mass rejected)");
    }
    wsum += c.weight;
  }
  for (auto& c : comps_) c.weight /= wsum;
}

Mat MixtureSpec::sample(Rng& rng, std::size_t n) const {
  Mat out(n, dim_);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = comps_.size() - 1;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      acc += comps_[k].weight;
      if (u < acc) {
        pick = k;
        break;
      }
    }
    const auto& c = comps_[pick];
    for (std::size_t j = 0; j < dim_; ++j) out(i, j) = c.mean[j] + c.sigma * rng.gauss();
  }
  return out;
}

MixtureSpec::Posterior MixtureSpec::posterior(const std::vector<double>& x, double t) const {
  if (x.size() != dim_) throw std::invalid_argument("posterior: probe dim mismatch");
  if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("posterior: t outside (0, 1]");

  const std::size_t K = comps_.size();
  const double a = 1.0 - t;

  Posterior p;
  p.resp.resize(K);
  p.comp_mean.resize(K);
  p.comp_var.resize(K);
  p.mean.assign(dim_, 0.0);

  // Responsibilities in log space. Component k contributes a marginal
  // N(a mu_k, s_k^2 I) with s_k^2 = a^2 sigma_k^2 + t^2.
  std::vector<double> logw(K);
  double logmax = -std::numeric_limits<double>::infinity();
  std::vector<double> s2(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = comps_[k];
    s2[k] = a * a * c.sigma * c.sigma + t * t;
    double q = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double d = x[j] - a * c.mean[j];
      q += d * d;
    }
    logw[k] = std::log(c.weight) - 0.5 * static_cast<double>(dim_) * std::log(s2[k]) -
              0.5 * q / s2[k];
    logmax = std::max(logmax, logw[k]);
  }
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p.resp[k] = std::exp(logw[k] - logmax);
    z += p.resp[k];
  }
  for (std::size_t k = 0; k < K; ++k) p.resp[k] /= z;

  // Per-component posterior of x0 given x_t: a joint-Gaussian update with
  // Cov(x0, x_t) = a sigma_k^2 per dimension.
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = comps_[k];
    const double gain = a * c.sigma * c.sigma / s2[k];
    p.comp_var[k] = c.sigma * c.sigma * t * t / s2[k];
    p.comp_mean[k].resize(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      p.comp_mean[k][j] = c.mean[j] + gain * (x[j] - a * c.mean[j]);
      p.mean[j] += p.resp[k] * p.comp_mean[k][j];
    }
  }

  // Mixture variance: within-component variance plus spread of the
  // component means around the overall mean.
  double trace = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double spread = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double d = p.comp_mean[k][j] - p.mean[j];
      spread += d * d;
    }
    trace += p.resp[k] * (static_cast<double>(dim_) * p.comp_var[k] + spread);
  }
  p.var_trace_over_d = trace / static_cast<double>(dim_);
  return p;
}

std::vector<double> MixtureSpec::marginal_velocity(const std::vector<double>& x, double t) const {
  if (x.size() != dim_) throw std::invalid_argument("marginal_velocity: probe dim mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("marginal_velocity: t outside [0, 1]");
  if (t == 0.0) {
    // Limit on the data support: the expected noise given x0 is zero, so the
    // velocity reduces to -x0.
    std::vector<double> v(dim_);
    for (std::size_t j = 0; j < dim_; ++j) v[j] = -x[j];
    return v;
  }
  const Posterior p = posterior(x, t);
  std::vector<double> v(dim_);
  for (std::size_t j = 0; j < dim_; ++j) v[j] = (x[j] - p.mean[j]) / t;
  return v;
}

double MixtureSpec::conditional_covariance(const std::vector<double>& x, double t) const {
  if (x.size() != dim_) throw std::invalid_argument("conditional_covariance: probe dim mismatch");
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("conditional_covariance: t outside [0, 1]");
  }
  if (t == 0.0) return 1.0;
  const Posterior p = posterior(x, t);
  return p.var_trace_over_d / (t * t);
}

Mat MixtureSpec::conditional_covariance_matrix(const std::vector<double>& x, double t) const {
  if (dim_ > 4) {
    throw std::invalid_argument("conditional_covariance_matrix: supported for D <= 4 only");
  }
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::invalid_argument("conditional_covariance_matrix: t outside (0, 1]");
  }
  const Posterior p = posterior(x, t);
  Mat cov(dim_, dim_);
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    for (std::size_t i = 0; i < dim_; ++i) {
      const double di = p.comp_mean[k][i] - p.mean[i];
      for (std::size_t j = 0; j < dim_; ++j) {
        const double dj = p.comp_mean[k][j] - p.mean[j];
        double v = di * dj;
        if (i == j) v += p.comp_var[k];
        cov(i, j) += p.resp[k] * v;
      }
    }
  }
  cov *= 1.0 / (t * t);
  return cov;
}

}  // namespace snapflow
