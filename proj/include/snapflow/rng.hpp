#pragma once

#include <cstdint>

#include "snapflow/mat.hpp"

namespace snapflow {

// Counter-based deterministic generator. Every draw is a fixed 64-bit hash of
// (key, counter), where the key is derived from (seed, stream id). Distinct
// stream ids give statistically independent sub-streams, and the integer
// stream is bit-identical across platforms because it uses only uint64
// arithmetic. The floating-point transforms (uniform, gauss) are reproducible
// run to run; across compilers they match up to libm's sqrt/log/cos.
//
// Sub-stream discipline used throughout the project: a component derives its
// own generator via substream(id) from a parent, so adding draws in one place
// never shifts the draws consumed elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_open();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Integer in [0, n). Uses rejection to stay unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller. Consumes exactly two 64-bit draws.
  double gauss();

  // Deterministic child generator; independent of this one's future draws.
  Rng substream(std::uint64_t id) const;

 private:
  Rng() = default;
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

// n x d matrix of independent standard normals.
Mat gauss_sample(Rng& rng, std::size_t n, std::size_t d);

}  // namespace snapflow
