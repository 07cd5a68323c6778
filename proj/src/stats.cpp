#include "snapflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace snapflow {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double sample_stddev(const std::vector<double>& xs) { return std::sqrt(sample_variance(xs)); }

double stderr_of_mean(const std::vector<double>& xs) {
  return sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  if (xs.size() == 1) return xs[0];
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

double cosine_similarity(const Mat& a, const Mat& b) {
  a.require_same_shape(b);
  const double na = frob_norm(a);
  const double nb = frob_norm(b);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("undefined cosine");
  return dot(a, b) / (na * nb);
}

}  // namespace snapflow
