#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "snapflow/flow.hpp"
#include "snapflow/mat.hpp"
#include "snapflow/rng.hpp"

namespace snapflow {

struct NetConfig {
  int horizon = 8;
  int dim = 2;
  int ctx_dim = 4;  // 0 disables the context pathway entirely
  int n_freq = 4;   // sinusoidal ladder, frequencies 2^0 .. 2^(n_freq-1)
  int time_embed = 16;
  int ctx_embed = 16;
  std::vector<int> hidden = {96, 96, 96};
  // Bound asserted by the smoothness probe in the test-suite; generous
  // headroom over the measured directional derivatives of a fresh net.
  double lipschitz_bound = 400.0;

  void validate() const;
  int chunk_size() const { return horizon * dim; }
  int feat_size() const { return 2 * n_freq; }

  bool operator==(const NetConfig&) const = default;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
};

enum class ParamGroup : int { Trunk = 0, TimeEmbed = 1, PhiS = 2, Context = 3 };

struct TensorView {
  std::string name;
  std::size_t off = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;  // cols == 0 marks a bias vector of length rows
  ParamGroup group = ParamGroup::Trunk;
  std::size_t count() const { return cols == 0 ? rows : rows * cols; }
};

// Average-velocity model F(x_t, s, t | c): an MLP over the flattened chunk, a
// sinusoidal clock-time embedding, a second zero-initialised embedding for
// the target time s, and an optional context encoder. Smooth activation
// x * sigmoid(x) throughout, so the model is differentiable everywhere.
//
// The target-time pathway's output layer starts at exactly zero, which makes
// a freshly wrapped model ignore s bit-for-bit; behaviour at s == t is then
// identical to the plain instantaneous model it was initialised from.
class VelocityNet {
 public:
  VelocityNet(const NetConfig& cfg, Rng& rng);     // fan-in scaled Gaussian init
  static VelocityNet zeros(const NetConfig& cfg);  // all parameters zero

  const NetConfig& config() const { return cfg_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<TensorView>& tensors() const { return views_; }
  const TensorView& tensor(const std::string& name) const;
  std::size_t n_params() const { return params_.size(); }

  Mat forward(const Mat& xt, double s, double t, const ContextVec& ctx) const;

  // Gradient of <upstream, forward(xt, s, t, ctx)> with respect to every
  // parameter, as a flat vector aligned with params().
  std::vector<double> backward(const Mat& xt, double s, double t, const ContextVec& ctx,
                               const Mat& upstream) const;

 private:
  VelocityNet() = default;
  struct Cache;
  void run_forward(const Mat& xt, double s, double t, const ContextVec& ctx, Cache* cache,
                   Mat* out) const;
  void build_views();

  NetConfig cfg_;
  std::vector<double> params_;
  std::vector<TensorView> views_;
};

// Field adapter. The referenced net must outlive the returned callable.
VelocityFn make_field(const VelocityNet& net);

struct TrainableSelector {
  bool trunk = true;
  bool time_embed = true;
  bool phi_s = true;
  bool context = true;
};

// Per-parameter trainability mask (1 = trainable). Frozen groups keep their
// parameters bit-identical through any number of optimiser steps.
std::vector<std::uint8_t> freeze_mask(const VelocityNet& net, const TrainableSelector& sel);

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t n_params = 0;
};

// Central-difference check of backward() on a random probe batch.
// Relative error per parameter uses denominator max(|a|, |b|, floor); below
// the floor the comparison is effectively absolute at floor * tolerance,
// which is the resolution of an h-step central difference in double
// precision.
GradCheckResult gradient_check(const VelocityNet& net, int n_probes, Rng& rng, double h = 1e-6,
                               double floor = 1e-3);

// Binary checkpoint: magic, tensor shape table, raw little-endian doubles.
// A JSON sidecar at path + ".json" stores the architecture plus caller
// metadata. Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const VelocityNet& net,
                     const nlohmann::json& extra);
VelocityNet load_checkpoint(const std::string& path, nlohmann::json* sidecar_out = nullptr);

}  // namespace snapflow
