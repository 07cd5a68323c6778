#include "snapflow/net.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace snapflow {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Octave features at base frequency pi, not 2*pi: the lowest pair
// (sin pi*theta, cos pi*theta) is injective on [0,1], so theta=0 and
// theta=1 stay distinguishable. A 1-periodic embedding would alias the
// two endpoints and the net could never represent the full-span jump.
void sin_features(double theta, int n_freq, std::vector<double>& out) {
  out.resize(2 * static_cast<std::size_t>(n_freq));
  double f = 1.0;
  for (int i = 0; i < n_freq; ++i) {
    out[2 * i] = std::sin(kPi * f * theta);
    out[2 * i + 1] = std::cos(kPi * f * theta);
    f *= 2.0;
  }
}

// y = W x + b, with W stored row-major at w and b at bptr (may be null).
void affine(const double* w, const double* b, const std::vector<double>& x, std::size_t rows,
            std::vector<double>& y) {
  const std::size_t cols = x.size();
  y.assign(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = b ? b[i] : 0.0;
    const double* wrow = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += wrow[j] * x[j];
    y[i] = acc;
  }
}

}  // namespace

void NetConfig::validate() const {
  if (horizon < 1 || dim < 1) throw std::invalid_argument("NetConfig: horizon and dim must be >= 1");
  if (ctx_dim < 0) throw std::invalid_argument("NetConfig: ctx_dim must be >= 0");
  if (n_freq < 1) throw std::invalid_argument("NetConfig: n_freq must be >= 1");
  if (time_embed < 1) throw std::invalid_argument("NetConfig: time_embed must be >= 1");
  if (ctx_dim > 0 && ctx_embed < 1) throw std::invalid_argument("NetConfig: ctx_embed must be >= 1");
  if (hidden.size() < 2) throw std::invalid_argument("NetConfig: need at least 2 hidden layers");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("NetConfig: hidden width must be >= 1");
  }
}

nlohmann::json NetConfig::to_json() const {
  return nlohmann::json{{"horizon", horizon},       {"dim", dim},
                        {"ctx_dim", ctx_dim},       {"n_freq", n_freq},
                        {"time_embed", time_embed}, {"ctx_embed", ctx_embed},
                        {"hidden", hidden},         {"lipschitz_bound", lipschitz_bound}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.horizon = j.at("horizon").get<int>();
  c.dim = j.at("dim").get<int>();
  c.ctx_dim = j.at("ctx_dim").get<int>();
  c.n_freq = j.at("n_freq").get<int>();
  c.time_embed = j.at("time_embed").get<int>();
  c.ctx_embed = j.at("ctx_embed").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.lipschitz_bound = j.at("lipschitz_bound").get<double>();
  c.validate();
  return c;
}

void VelocityNet::build_views() {
  views_.clear();
  std::size_t off = 0;
  auto push = [&](const std::string& name, std::size_t rows, std::size_t cols, ParamGroup g) {
    TensorView v;
    v.name = name;
    v.off = off;
    v.rows = rows;
    v.cols = cols;
    v.group = g;
    off += v.count();
    views_.push_back(std::move(v));
  };

  const std::size_t TF = static_cast<std::size_t>(cfg_.feat_size());
  const std::size_t E = static_cast<std::size_t>(cfg_.time_embed);
  push("time_w1", E, TF, ParamGroup::TimeEmbed);
  push("time_b1", E, 0, ParamGroup::TimeEmbed);
  push("time_w2", E, E, ParamGroup::TimeEmbed);
  push("time_b2", E, 0, ParamGroup::TimeEmbed);
  push("phi_w1", E, TF, ParamGroup::PhiS);
  push("phi_b1", E, 0, ParamGroup::PhiS);
  push("phi_w2", E, E, ParamGroup::PhiS);
  push("phi_b2", E, 0, ParamGroup::PhiS);
  if (cfg_.ctx_dim > 0) {
    const std::size_t C = static_cast<std::size_t>(cfg_.ctx_dim);
    const std::size_t CE = static_cast<std::size_t>(cfg_.ctx_embed);
    push("ctx_w1", CE, C, ParamGroup::Context);
    push("ctx_b1", CE, 0, ParamGroup::Context);
    push("ctx_w2", CE, CE, ParamGroup::Context);
    push("ctx_b2", CE, 0, ParamGroup::Context);
  }
  const std::size_t HD = static_cast<std::size_t>(cfg_.chunk_size());
  const std::size_t CE = cfg_.ctx_dim > 0 ? static_cast<std::size_t>(cfg_.ctx_embed) : 0;
  std::size_t prev = HD + E + CE;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    const std::size_t width = static_cast<std::size_t>(cfg_.hidden[l]);
    push("trunk_w" + std::to_string(l), width, prev, ParamGroup::Trunk);
    push("trunk_b" + std::to_string(l), width, 0, ParamGroup::Trunk);
    prev = width;
  }
  push("out_w", HD, prev, ParamGroup::Trunk);
  push("out_b", HD, 0, ParamGroup::Trunk);

  params_.assign(off, 0.0);
}

VelocityNet::VelocityNet(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  build_views();
  for (const auto& v : views_) {
    // The target-time output layer stays at zero so a fresh model is exactly
    // independent of s. Everything else: fan-in scaled Gaussian weights,
    // zero biases.
    if (v.name == "phi_w2" || v.name == "phi_b2") continue;
    if (v.cols == 0) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(v.cols));
    for (std::size_t k = 0; k < v.count(); ++k) params_[v.off + k] = scale * rng.gauss();
  }
}

VelocityNet VelocityNet::zeros(const NetConfig& cfg) {
  VelocityNet net;
  net.cfg_ = cfg;
  net.cfg_.validate();
  net.build_views();
  return net;
}

const TensorView& VelocityNet::tensor(const std::string& name) const {
  for (const auto& v : views_) {
    if (v.name == name) return v;
  }
  throw std::invalid_argument("VelocityNet: unknown tensor " + name);
}

struct VelocityNet::Cache {
  std::vector<double> tf_t, a1_pre, a1, et;
  std::vector<double> tf_s, p1_pre, p1, es;
  std::vector<double> c1_pre, c1, ce;
  std::vector<double> z0;
  std::vector<std::vector<double>> h_pre, h;
};

void VelocityNet::run_forward(const Mat& xt, double s, double t, const ContextVec& ctx,
                              Cache* cache, Mat* out) const {
  if (xt.rows() != static_cast<std::size_t>(cfg_.horizon) ||
      xt.cols() != static_cast<std::size_t>(cfg_.dim)) {
    throw std::invalid_argument("VelocityNet::forward: shape mismatch");
  }
  if (ctx.size() != static_cast<std::size_t>(cfg_.ctx_dim)) {
    throw std::invalid_argument("VelocityNet::forward: context size mismatch");
  }

  Cache local;
  Cache& c = cache ? *cache : local;
  const double* P = params_.data();
  auto W = [&](const char* name) { return P + tensor(name).off; };

  const std::size_t E = static_cast<std::size_t>(cfg_.time_embed);

  sin_features(t, cfg_.n_freq, c.tf_t);
  affine(W("time_w1"), W("time_b1"), c.tf_t, E, c.a1_pre);
  c.a1.resize(E);
  for (std::size_t i = 0; i < E; ++i) c.a1[i] = silu(c.a1_pre[i]);
  affine(W("time_w2"), W("time_b2"), c.a1, E, c.et);

  sin_features(s, cfg_.n_freq, c.tf_s);
  affine(W("phi_w1"), W("phi_b1"), c.tf_s, E, c.p1_pre);
  c.p1.resize(E);
  for (std::size_t i = 0; i < E; ++i) c.p1[i] = silu(c.p1_pre[i]);
  affine(W("phi_w2"), W("phi_b2"), c.p1, E, c.es);

  std::size_t CE = 0;
  if (cfg_.ctx_dim > 0) {
    CE = static_cast<std::size_t>(cfg_.ctx_embed);
    affine(W("ctx_w1"), W("ctx_b1"), ctx, CE, c.c1_pre);
    c.c1.resize(CE);
    for (std::size_t i = 0; i < CE; ++i) c.c1[i] = silu(c.c1_pre[i]);
    affine(W("ctx_w2"), W("ctx_b2"), c.c1, CE, c.ce);
  }

  const std::size_t HD = static_cast<std::size_t>(cfg_.chunk_size());
  c.z0.resize(HD + E + CE);
  for (std::size_t k = 0; k < HD; ++k) c.z0[k] = xt[k];
  for (std::size_t i = 0; i < E; ++i) c.z0[HD + i] = c.et[i] + c.es[i];
  for (std::size_t i = 0; i < CE; ++i) c.z0[HD + E + i] = c.ce[i];

  const std::size_t L = cfg_.hidden.size();
  c.h_pre.resize(L);
  c.h.resize(L);
  const std::vector<double>* prev = &c.z0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::string wi = "trunk_w" + std::to_string(l);
    const std::string bi = "trunk_b" + std::to_string(l);
    const std::size_t width = static_cast<std::size_t>(cfg_.hidden[l]);
    affine(W(wi.c_str()), W(bi.c_str()), *prev, width, c.h_pre[l]);
    c.h[l].resize(width);
    for (std::size_t i = 0; i < width; ++i) c.h[l][i] = silu(c.h_pre[l][i]);
    prev = &c.h[l];
  }

  std::vector<double> y;
  affine(W("out_w"), W("out_b"), *prev, HD, y);
  if (out) {
    *out = Mat::from_vector(xt.rows(), xt.cols(), y);
    if (!out->all_finite()) {
      throw std::runtime_error("VelocityNet::forward: non-finite output (check parameters)");
    }
  }
}

Mat VelocityNet::forward(const Mat& xt, double s, double t, const ContextVec& ctx) const {
  Mat out;
  run_forward(xt, s, t, ctx, nullptr, &out);
  return out;
}

std::vector<double> VelocityNet::backward(const Mat& xt, double s, double t, const ContextVec& ctx,
                                          const Mat& upstream) const {
  xt.require_same_shape(upstream);
  Cache c;
  Mat out;
  run_forward(xt, s, t, ctx, &c, &out);

  std::vector<double> g(params_.size(), 0.0);
  const double* P = params_.data();
  auto off = [&](const char* name) { return tensor(name).off; };

  const std::size_t HD = static_cast<std::size_t>(cfg_.chunk_size());
  const std::size_t E = static_cast<std::size_t>(cfg_.time_embed);
  const std::size_t CE = cfg_.ctx_dim > 0 ? static_cast<std::size_t>(cfg_.ctx_embed) : 0;
  const std::size_t L = cfg_.hidden.size();

  // Output layer.
  std::vector<double> gy(HD);
  for (std::size_t k = 0; k < HD; ++k) gy[k] = upstream[k];
  const std::vector<double>& last = L > 0 ? c.h[L - 1] : c.z0;
  {
    double* gw = g.data() + off("out_w");
    double* gb = g.data() + off("out_b");
    for (std::size_t i = 0; i < HD; ++i) {
      gb[i] += gy[i];
      for (std::size_t j = 0; j < last.size(); ++j) gw[i * last.size() + j] += gy[i] * last[j];
    }
  }

  // Trunk, walking backwards.
  std::vector<double> gz(last.size(), 0.0);
  {
    const double* w = P + off("out_w");
    for (std::size_t j = 0; j < last.size(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < HD; ++i) acc += w[i * last.size() + j] * gy[i];
      gz[j] = acc;
    }
  }
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t width = static_cast<std::size_t>(cfg_.hidden[l]);
    const std::vector<double>& inp = l == 0 ? c.z0 : c.h[l - 1];
    std::vector<double> gpre(width);
    for (std::size_t i = 0; i < width; ++i) gpre[i] = gz[i] * silu_grad(c.h_pre[l][i]);
    const std::string wi = "trunk_w" + std::to_string(l);
    const std::string bi = "trunk_b" + std::to_string(l);
    double* gw = g.data() + off(wi.c_str());
    double* gb = g.data() + off(bi.c_str());
    for (std::size_t i = 0; i < width; ++i) {
      gb[i] += gpre[i];
      for (std::size_t j = 0; j < inp.size(); ++j) gw[i * inp.size() + j] += gpre[i] * inp[j];
    }
    const double* w = P + off(wi.c_str());
    gz.assign(inp.size(), 0.0);
    for (std::size_t j = 0; j < inp.size(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < width; ++i) acc += w[i * inp.size() + j] * gpre[i];
      gz[j] = acc;
    }
  }

  // gz now spans [chunk | time embedding | context embedding]. The chunk
  // slice is the input gradient, which training never needs.
  std::vector<double> ge(gz.begin() + HD, gz.begin() + HD + E);

  auto embed_backward = [&](const char* w1n, const char* b1n, const char* w2n, const char* b2n,
                            const std::vector<double>& feat, const std::vector<double>& pre,
                            const std::vector<double>& act, const std::vector<double>& gtop) {
    const std::size_t rows = pre.size();
    double* gw2 = g.data() + off(w2n);
    double* gb2 = g.data() + off(b2n);
    for (std::size_t i = 0; i < rows; ++i) {
      gb2[i] += gtop[i];
      for (std::size_t j = 0; j < rows; ++j) gw2[i * rows + j] += gtop[i] * act[j];
    }
    const double* w2 = P + off(w2n);
    std::vector<double> ga(rows, 0.0);
    for (std::size_t j = 0; j < rows; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rows; ++i) acc += w2[i * rows + j] * gtop[i];
      ga[j] = acc * silu_grad(pre[j]);
    }
    double* gw1 = g.data() + off(w1n);
    double* gb1 = g.data() + off(b1n);
    for (std::size_t i = 0; i < rows; ++i) {
      gb1[i] += ga[i];
      for (std::size_t j = 0; j < feat.size(); ++j) gw1[i * feat.size() + j] += ga[i] * feat[j];
    }
  };

  embed_backward("time_w1", "time_b1", "time_w2", "time_b2", c.tf_t, c.a1_pre, c.a1, ge);
  embed_backward("phi_w1", "phi_b1", "phi_w2", "phi_b2", c.tf_s, c.p1_pre, c.p1, ge);
  if (CE > 0) {
    std::vector<double> gce(gz.begin() + HD + E, gz.begin() + HD + E + CE);
    embed_backward("ctx_w1", "ctx_b1", "ctx_w2", "ctx_b2", ctx, c.c1_pre, c.c1, gce);
  }
  return g;
}

VelocityFn make_field(const VelocityNet& net) {
  return [&net](const Mat& x, double s, double t, const ContextVec& ctx) {
    return net.forward(x, s, t, ctx);
  };
}

std::vector<std::uint8_t> freeze_mask(const VelocityNet& net, const TrainableSelector& sel) {
  std::vector<std::uint8_t> mask(net.n_params(), 0);
  for (const auto& v : net.tensors()) {
    bool on = false;
    switch (v.group) {
      case ParamGroup::Trunk: on = sel.trunk; break;
      case ParamGroup::TimeEmbed: on = sel.time_embed; break;
      case ParamGroup::PhiS: on = sel.phi_s; break;
      case ParamGroup::Context: on = sel.context; break;
    }
    if (!on) continue;
    for (std::size_t k = 0; k < v.count(); ++k) mask[v.off + k] = 1;
  }
  return mask;
}

GradCheckResult gradient_check(const VelocityNet& net, int n_probes, Rng& rng, double h,
                               double floor) {
  const NetConfig& cfg = net.config();
  struct Probe {
    Mat xt, upstream;
    double s, t;
    ContextVec ctx;
  };
  std::vector<Probe> probes;
  for (int p = 0; p < n_probes; ++p) {
    Probe pr;
    pr.xt = gauss_sample(rng, cfg.horizon, cfg.dim);
    pr.upstream = gauss_sample(rng, cfg.horizon, cfg.dim);
    pr.s = rng.uniform();
    pr.t = rng.uniform();
    pr.ctx.resize(cfg.ctx_dim);
    for (auto& v : pr.ctx) v = rng.gauss();
    probes.push_back(std::move(pr));
  }

  auto loss = [&](const VelocityNet& n) {
    double acc = 0.0;
    for (const auto& pr : probes) acc += dot(pr.upstream, n.forward(pr.xt, pr.s, pr.t, pr.ctx));
    return acc;
  };

  std::vector<double> analytic(net.n_params(), 0.0);
  for (const auto& pr : probes) {
    const std::vector<double> g = net.backward(pr.xt, pr.s, pr.t, pr.ctx, pr.upstream);
    for (std::size_t k = 0; k < g.size(); ++k) analytic[k] += g[k];
  }

  VelocityNet work = net;
  GradCheckResult res;
  res.n_params = net.n_params();
  for (std::size_t k = 0; k < net.n_params(); ++k) {
    const double orig = work.params()[k];
    work.params()[k] = orig + h;
    const double up = loss(work);
    work.params()[k] = orig - h;
    const double down = loss(work);
    work.params()[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(std::max(std::abs(fd), std::abs(analytic[k])), floor);
    const double rel = std::abs(fd - analytic[k]) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = k;
    }
  }
  return res;
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& f, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(f, v);
}

std::uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& f) {
  const std::uint64_t v = get_u64(f);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

constexpr char kMagic[8] = {'S', 'N', 'A', 'P', 'F', 'L', 'W', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const VelocityNet& net,
                     const nlohmann::json& extra) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, 8);
  put_u32(f, static_cast<std::uint32_t>(net.tensors().size()));
  for (const auto& v : net.tensors()) {
    put_u32(f, static_cast<std::uint32_t>(v.name.size()));
    f.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    put_u64(f, v.rows);
    put_u64(f, v.cols);
  }
  for (double d : net.params()) put_f64(f, d);
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);

  nlohmann::json side = extra;
  side["net"] = net.config().to_json();
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("save_checkpoint: cannot open sidecar for " + path);
  js << side.dump(2) << "\n";
}

VelocityNet load_checkpoint(const std::string& path, nlohmann::json* sidecar_out) {
  std::ifstream js(path + ".json");
  if (!js) throw std::runtime_error("load_checkpoint: missing sidecar " + path + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  const NetConfig cfg = NetConfig::from_json(side.at("net"));
  VelocityNet net = VelocityNet::zeros(cfg);

  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  const std::uint32_t n_tensors = get_u32(f);
  if (n_tensors != net.tensors().size()) {
    throw std::runtime_error("load_checkpoint: tensor count mismatch in " + path);
  }
  for (const auto& v : net.tensors()) {
    const std::uint32_t len = get_u32(f);
    std::string name(len, '\0');
    f.read(name.data(), len);
    const std::uint64_t rows = get_u64(f);
    const std::uint64_t cols = get_u64(f);
    if (name != v.name || rows != v.rows || cols != v.cols) {
      throw std::runtime_error("load_checkpoint: shape header mismatch at " + name);
    }
  }
  for (double& d : net.params()) d = get_f64(f);
  if (!f) throw std::runtime_error("load_checkpoint: truncated data in " + path);
  if (sidecar_out) *sidecar_out = std::move(side);
  return net;
}

}  // namespace snapflow
