#pragma once

#include <vector>

#include "snapflow/mat.hpp"

namespace snapflow {

double mean(const std::vector<double>& xs);

// Unbiased sample variance (n - 1 denominator). Needs at least two values.
double sample_variance(const std::vector<double>& xs);

double sample_stddev(const std::vector<double>& xs);

// Standard error of the sample mean.
double stderr_of_mean(const std::vector<double>& xs);

// Percentile with linear interpolation between order statistics:
// position q * (n - 1), interpolated between the two neighbouring sorted
// values. q must lie in [0, 1]. Throws "empty sample" on an empty input.
double percentile(std::vector<double> xs, double q);

// Cosine of the angle between two same-shape matrices, flattened.
// Throws "undefined cosine" when either operand has zero norm.
double cosine_similarity(const Mat& a, const Mat& b);

}  // namespace snapflow
