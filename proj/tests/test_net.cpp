#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "snapflow/net.hpp"
#include "snapflow/train.hpp"

using namespace snapflow;

namespace {

NetConfig small_cfg() {
  NetConfig c;
  c.horizon = 4;
  c.dim = 2;
  c.ctx_dim = 3;
  c.n_freq = 3;
  c.time_embed = 8;
  c.ctx_embed = 8;
  c.hidden = {24, 24};
  return c;
}

Mat probe_chunk(Rng& rng, const NetConfig& c) {
  return gauss_sample(rng, static_cast<std::size_t>(c.horizon), static_cast<std::size_t>(c.dim));
}

}  // namespace

TEST_CASE("fresh model ignores the target time bit for bit") {
  Rng rng(7, 0);
  NetConfig cfg = small_cfg();
  VelocityNet net(cfg, rng);
  Mat x = probe_chunk(rng, cfg);
  ContextVec ctx{0.1, -0.2, 0.3};

  Mat a = net.forward(x, 0.0, 0.7, ctx);
  Mat b = net.forward(x, 0.7, 0.7, ctx);
  Mat c = net.forward(x, 0.35, 0.7, ctx);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k] == b[k]);
    CHECK(a[k] == c[k]);
  }
}

TEST_CASE("the clock embedding separates t=0 from t=1") {
  // a 1-periodic embedding would alias the endpoints and make the full-span
  // jump structurally unrepresentable
  Rng rng(7, 1);
  NetConfig cfg = small_cfg();
  VelocityNet net(cfg, rng);
  Mat x = probe_chunk(rng, cfg);
  ContextVec ctx{0.1, -0.2, 0.3};
  Mat at0 = net.forward(x, 0.0, 0.0, ctx);
  Mat at1 = net.forward(x, 0.0, 1.0, ctx);
  double gap = 0.0;
  for (std::size_t k = 0; k < at0.size(); ++k) gap = std::max(gap, std::abs(at0[k] - at1[k]));
  CHECK(gap > 1e-6);
}

TEST_CASE("all-zero parameters give the zero field") {
  NetConfig cfg = small_cfg();
  VelocityNet net = VelocityNet::zeros(cfg);
  Rng rng(3, 0);
  Mat x = probe_chunk(rng, cfg);
  Mat y = net.forward(x, 0.2, 0.9, ContextVec{1.0, 2.0, 3.0});
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(y[k] == 0.0);
}

TEST_CASE("backward matches central differences over five seeds") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng init(100 + seed, 0);
    VelocityNet net(small_cfg(), init);
    CHECK(net.n_params() <= 10000);
    Rng probes(200 + seed, 0);
    GradCheckResult r = gradient_check(net, 3, probes);
    CHECK(r.max_rel_err < 1e-5);
    CHECK(r.n_params == net.n_params());
  }
}

TEST_CASE("frozen groups stay bit-identical through optimiser steps") {
  Rng rng(11, 0);
  NetConfig cfg = small_cfg();
  VelocityNet net(cfg, rng);

  TrainableSelector sel;
  sel.context = false;
  sel.phi_s = false;
  std::vector<std::uint8_t> mask = freeze_mask(net, sel);
  CHECK(mask.size() == net.n_params());

  std::vector<double> before = net.params();

  TrainConfig tc;
  tc.alpha = 0.5;
  tc.lambda = 0.5;
  tc.total_steps = 12;
  tc.warmup_steps = 3;
  tc.batch_size = 8;
  Trainer trainer(std::move(net), tc, sel);

  Dataset data;
  Rng drng(12, 0);
  for (int i = 0; i < 32; ++i) {
    data.chunks.push_back(gauss_sample(drng, 4, 2));
    data.contexts.push_back(ContextVec{0.1, 0.2, 0.3});
  }
  trainer.run(data, drng);

  const VelocityNet& after = trainer.net();
  bool trunk_moved = false;
  for (const TensorView& v : after.tensors()) {
    const bool frozen = v.group == ParamGroup::Context || v.group == ParamGroup::PhiS;
    for (std::size_t k = v.off; k < v.off + v.count(); ++k) {
      if (frozen) {
        CHECK(after.params()[k] == before[k]);
      } else if (after.params()[k] != before[k]) {
        trunk_moved = true;
      }
    }
  }
  CHECK(trunk_moved);
}

TEST_CASE("checkpoints round-trip bit exactly") {
  Rng rng(21, 0);
  VelocityNet net(small_cfg(), rng);
  nlohmann::json extra{{"config_hash", "deadbeef"}, {"phase", "unit"}};
  const char* path = "ut_net_roundtrip.ckpt";
  save_checkpoint(path, net, extra);

  nlohmann::json side;
  VelocityNet back = load_checkpoint(path, &side);
  CHECK(back.config() == net.config());
  REQUIRE(back.n_params() == net.n_params());
  for (std::size_t k = 0; k < net.n_params(); ++k) CHECK(back.params()[k] == net.params()[k]);
  CHECK(side.at("config_hash") == "deadbeef");
  CHECK(side.at("phase") == "unit");

  std::remove(path);
  std::remove((std::string(path) + ".json").c_str());
}

TEST_CASE("directional derivatives respect the smoothness bound") {
  Rng rng(31, 0);
  NetConfig cfg = small_cfg();
  VelocityNet net(cfg, rng);
  ContextVec ctx{0.0, 0.0, 0.0};
  Rng prng(32, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Mat x = probe_chunk(prng, cfg);
    Mat d = probe_chunk(prng, cfg);
    const double dn = frob_norm(d);
    const double h = 1e-4;
    Mat xp = x, xm = x;
    axpy(xp, h / dn, d);
    axpy(xm, -h / dn, d);
    Mat diff = net.forward(xp, 0.3, 0.8, ctx) - net.forward(xm, 0.3, 0.8, ctx);
    CHECK(frob_norm(diff) / (2.0 * h) <= cfg.lipschitz_bound);
  }
}

TEST_CASE("field adapter forwards to the model") {
  Rng rng(41, 0);
  NetConfig cfg = small_cfg();
  VelocityNet net(cfg, rng);
  VelocityFn f = make_field(net);
  Mat x = probe_chunk(rng, cfg);
  ContextVec ctx{0.5, 0.5, 0.5};
  Mat a = f(x, 0.1, 0.9, ctx);
  Mat b = net.forward(x, 0.1, 0.9, ctx);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
}

TEST_CASE("config validation rejects malformed shapes") {
  NetConfig c = small_cfg();
  c.hidden = {16};
  CHECK_THROWS(c.validate());
  c = small_cfg();
  c.horizon = 0;
  CHECK_THROWS(c.validate());
  c = small_cfg();
  c.n_freq = 0;
  CHECK_THROWS(c.validate());
}
