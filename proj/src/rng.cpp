#include "snapflow/rng.hpp"

#include <cmath>

namespace snapflow {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// 64-bit finalizer (splitmix-style avalanche).
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  // Two mixing rounds keep (seed, stream) pairs well separated even for
  // small consecutive values, which is how the project uses them.
  key_ = mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x6a09e667f3bcc909ULL));
  ctr_ = 0;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (ctr_ += kGolden);
  return mix64(mix64(z) + key_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling over the largest multiple of n.
  const std::uint64_t limit = n * ((~0ULL) / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::gauss() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

Rng Rng::substream(std::uint64_t id) const {
  Rng child;
  child.key_ = mix64(key_ ^ mix64(id * kGolden + 0xbb67ae8584caa73bULL));
  child.ctr_ = 0;
  return child;
}

Mat gauss_sample(Rng& rng, std::size_t n, std::size_t d) {
  Mat m(n, d);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.gauss();
  return m;
}

}  // namespace snapflow
