#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "snapflow/rng.hpp"
#include "snapflow/stats.hpp"

using namespace snapflow;

TEST_CASE("mean and sample variance on a hand-checked vector") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(mean(xs) == doctest::Approx(2.5).epsilon(1e-15));
  // squared deviations 2.25 + 0.25 + 0.25 + 2.25 over n-1 = 3
  CHECK(sample_variance(xs) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(sample_stddev(xs) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(stderr_of_mean(xs) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("percentile interpolates between order statistics") {
  std::vector<double> xs{3.0, 1.0, 2.0};
  CHECK(percentile(xs, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(percentile(xs, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(percentile(xs, 1.0) == doctest::Approx(3.0).epsilon(1e-15));

  // position q*(n-1): 0.25 -> 0.75 between 1 and 2; 0.9 -> 2.7 between 3 and 4
  std::vector<double> ys{4.0, 1.0, 3.0, 2.0};
  CHECK(percentile(ys, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(percentile(ys, 0.9) == doctest::Approx(3.7).epsilon(1e-15));

  CHECK_THROWS(percentile({}, 0.5));
}

TEST_CASE("cosine similarity of flattened chunks") {
  Mat a = Mat::row({1.0, 0.0});
  Mat b = Mat::row({1.0, 1.0});
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.7071067811865475).epsilon(1e-14));
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-14));

  Mat z(1, 2, 0.0);
  CHECK_THROWS(cosine_similarity(a, z));
}

TEST_CASE("rng is deterministic per (seed, stream)") {
  Rng a(7, 3), b(7, 3), c(7, 4);
  bool same = true, diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    same = same && (va == b.next_u64());
    diff = diff || (va != c.next_u64());
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("substream children do not depend on parent consumption") {
  Rng p1(11, 0), p2(11, 0);
  (void)p2.next_u64();  // advance one parent, not the other
  Rng c1 = p1.substream(5);
  Rng c2 = p2.substream(5);
  for (int i = 0; i < 16; ++i) CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("uniform stays in [0,1) and below() is in range") {
  Rng r(123, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double uo = r.uniform_open();
    CHECK(uo > 0.0);
    CHECK(uo <= 1.0);
    const std::uint64_t k = r.below(10);
    CHECK(k < 10);
    seen.insert(k);
  }
  CHECK(seen.size() == 10);  // all residues hit over 2000 draws
}

TEST_CASE("gauss moments match a standard normal") {
  Rng r(2024, 0);
  const int n = 40000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gauss();
    s1 += g;
    s2 += g * g;
  }
  const double m = s1 / n;
  const double v = s2 / n - m * m;
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(v - 1.0) < 0.03);
}

TEST_CASE("gauss_sample fills the requested shape") {
  Rng r(5, 0);
  Mat g = gauss_sample(r, 3, 4);
  CHECK(g.rows() == 3);
  CHECK(g.cols() == 4);
  CHECK(g.all_finite());
}
