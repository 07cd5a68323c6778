// End-to-end gate. Trains the default configuration from scratch in a
// scratch directory, then checks the eleven published acceptance properties
// and prints one [PASS]/[FAIL] line each. Exit code 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "snapflow/config.hpp"
#include "snapflow/flow.hpp"
#include "snapflow/harness.hpp"
#include "snapflow/net.hpp"
#include "snapflow/train.hpp"

using namespace snapflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& what) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", idx, what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json load_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in.good()) throw std::runtime_error("missing artifact " + p.string());
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// step_sweep.csv / nact_sweep.csv rows keyed by (method, first numeric column)
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& p) {
  CsvTable t;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // provenance stamp
  std::getline(in, line);  // header
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, ',')) row.push_back(cell);
    t.rows.push_back(std::move(row));
  }
  return t;
}

int col(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return static_cast<int>(i);
  throw std::runtime_error("missing column " + name);
}

const json* find_report(const json& file, const std::string& name) {
  for (const json& r : file.at("reports"))
    if (r.at("name") == name) return &r;
  return nullptr;
}

bool deterministic_artifact(const fs::path& p) {
  const std::string n = p.filename().string();
  const bool tabular = n.size() > 4 && (n.ends_with(".csv") || n.ends_with(".json"));
  return tabular && !n.ends_with("_timing.csv");
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> bytes;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && deterministic_artifact(e.path()))
      bytes[e.path().filename().string()] = slurp(e.path());
  return bytes;
}

char buf[512];

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_run");
  fs::remove_all(dir);
  fs::create_directories(dir);

  ExperimentConfig cfg;  // stock configuration, seed 7
  cfg.out_dir = dir.string();
  cfg.validate();

  // ---- full pipeline, timed per phase ------------------------------------
  const auto t_pipeline = std::chrono::steady_clock::now();
  double verify_seconds = 0.0;
  try {
    if (cmd_pretrain(cfg) != 0) throw std::runtime_error("pretrain failed");
    if (cmd_distill(cfg) != 0) throw std::runtime_error("distill failed");
    if (cmd_sweep(cfg) != 0) throw std::runtime_error("sweep failed");
    if (cmd_rollout(cfg) != 0) throw std::runtime_error("rollout failed");
    const auto t_verify = std::chrono::steady_clock::now();
    if (cmd_verify(cfg) != 0) throw std::runtime_error("verify reported failure");
    verify_seconds = seconds_since(t_verify);
  } catch (const std::exception& e) {
    std::printf("pipeline aborted: %s\n", e.what());
    report(9, false, "pipeline did not complete");
    return 1;
  }
  const double pipeline_seconds = seconds_since(t_pipeline);

  // ---- 1: velocity-scatter identity against the closed form ---------------
  try {
    const json t1 = load_json(dir / "theorem1.json");
    bool ok = t1.at("passed").get<bool>();
    bool endpoints = false;
    for (const json& r : t1.at("reports")) {
      const auto& grid = r.at("t_grid");
      const auto& mc = r.at("mc");
      const auto& an = r.at("analytic");
      const auto& pass = r.at("pass");
      for (std::size_t i = 0; i < grid.size(); ++i) {
        ok = ok && pass[i].get<bool>() && mc[i].get<double>() > 0.0 && an[i].get<double>() > 0.0;
      }
      if (r.at("name") == "conditional_variance_unit_gaussian") {
        endpoints = true;
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double t = grid[i].get<double>();
          const double a = an[i].get<double>();
          if (t == 0.0 || t == 1.0) endpoints = endpoints && std::abs(a - 1.0) < 1e-12;
          if (t == 0.5) endpoints = endpoints && std::abs(a - 2.0) < 1e-12;
        }
      }
    }
    ok = ok && endpoints && verify_seconds < 30.0;
    std::snprintf(buf, sizeof buf,
                  "conditional velocity variance within 3 SE, positive, unit-gaussian "
                  "values 1/2/1 (verify stage %.1f s)",
                  verify_seconds);
    report(1, ok, buf);
  } catch (const std::exception& e) {
    report(1, false, e.what());
  }

  // ---- 2: loss decomposition with vanishing cross term ---------------------
  try {
    const json t2 = load_json(dir / "theorem2.json");
    bool ok = t2.at("passed").get<bool>() && verify_seconds < 30.0;
    std::snprintf(buf, sizeof buf, "loss decomposition gap and cross term within 3 SE (%.1f s)",
                  verify_seconds);
    report(2, ok, buf);
  } catch (const std::exception& e) {
    report(2, false, e.what());
  }

  // ---- 3: target-swap identity --------------------------------------------
  try {
    const json a4 = load_json(dir / "a4_identity.json");
    report(3, a4.at("passed").get<bool>(),
           "loss difference under target swap equals the variance trace within 3 SE");
  } catch (const std::exception& e) {
    report(3, false, e.what());
  }

  // ---- 4: endpoint error equals the integrated residual --------------------
  try {
    const json t3 = load_json(dir / "theorem3.json");
    const json* affine = find_report(t3, "error_integral_affine");
    const json* wavy = find_report(t3, "error_integral_wavy");
    const json* half = find_report(t3, "error_integral_affine_half_span");
    bool ok = affine && wavy && half && t3.at("passed").get<bool>();
    double worst = 0.0;
    if (ok) {
      const double ga = affine->at("max_rel_gap").get<double>();
      const double gw = wavy->at("max_rel_gap").get<double>();
      worst = std::max(ga, gw);
      ok = ga < 1e-2 && gw < 1e-2;
      ok = ok && affine->at("bound_holds").get<bool>() && wavy->at("bound_holds").get<bool>();
      const double full_bound = affine->at("error_bound").get<double>();
      const double half_bound = half->at("error_bound").get<double>();
      ok = ok && half_bound <= 0.5 * full_bound * (1.0 + 1e-9) + 1e-12;
    }
    std::snprintf(buf, sizeof buf,
                  "two smooth fields: direct error vs integrated residual, max rel gap %.2e; "
                  "half span at most halves the bound",
                  worst);
    report(4, ok, buf);
  } catch (const std::exception& e) {
    report(4, false, e.what());
  }

  // ---- 5: reverse-mode gradients against central differences ---------------
  try {
    const json gc = load_json(dir / "gradcheck.json");
    bool ok = gc.at("passed").get<bool>() && gc.at("rows").size() == 5;
    double worst = 0.0;
    for (const json& row : gc.at("rows")) {
      worst = std::max(worst, row.at("max_rel_err").get<double>());
      ok = ok && row.at("passed").get<bool>() && row.at("n_params").get<int>() <= 10000;
    }
    ok = ok && worst < 1e-5;
    std::snprintf(buf, sizeof buf, "5 seeds, max relative gradient error %.2e < 1e-5", worst);
    report(5, ok, buf);
  } catch (const std::exception& e) {
    report(5, false, e.what());
  }

  // ---- 6: stage-one model is exactly target-time invariant -----------------
  try {
    VelocityNet teacher = load_checkpoint((dir / "pretrain.ckpt").string());
    Rng rng(1234, 0);
    bool ok = true;
    for (int trial = 0; trial < 3; ++trial) {
      Mat x = gauss_sample(rng, teacher.config().horizon, teacher.config().dim);
      ContextVec ctx(teacher.config().ctx_dim, 0.25);
      Mat a = teacher.forward(x, 0.0, 0.8, ctx);
      Mat b = teacher.forward(x, 0.4, 0.8, ctx);
      Mat c = teacher.forward(x, 1.0, 0.8, ctx);
      for (std::size_t k = 0; k < a.size(); ++k) ok = ok && a[k] == b[k] && a[k] == c[k];
    }
    report(6, ok, "pretrained model output is bit-identical for any target time");
  } catch (const std::exception& e) {
    report(6, false, e.what());
  }

  // ---- 7: distillation gradients treat the target as detached --------------
  try {
    VelocityNet net = load_checkpoint((dir / "distill.ckpt").string());
    Rng rng(999, 0);
    Mat x1 = gauss_sample(rng, net.config().horizon, net.config().dim);
    ContextVec ctx(net.config().ctx_dim, -0.1);
    TrainConfig tc;
    LossResult got = shortcut_loss(net, x1, ctx, tc);

    Mat target = shortcut_target(make_field(net), x1, ctx, tc.clamp_lo, tc.clamp_hi);
    Mat resid = net.forward(x1, 0.0, 1.0, ctx) - target;
    Mat upstream = resid * (2.0 / net.config().chunk_size());
    std::vector<double> want = net.backward(x1, 0.0, 1.0, ctx, upstream);

    double worst = 0.0;
    for (std::size_t k = 0; k < want.size(); ++k) {
      const double den = std::max({std::abs(got.grads[k]), std::abs(want[k]), 1e-30});
      worst = std::max(worst, std::abs(got.grads[k] - want[k]) / den);
    }
    std::snprintf(buf, sizeof buf, "max gradient deviation from detached-target oracle %.2e",
                  worst);
    report(7, worst <= 1e-12, buf);
  } catch (const std::exception& e) {
    report(7, false, e.what());
  }

  // ---- 8: first-order convergence of the Euler sampler ----------------------
  try {
    // gentle contraction keeps every grid point, K=1 included, near the
    // asymptotic first-order rate
    const VelocityFn linear = [](const Mat& x, double, double, const ContextVec&) {
      return x * 0.25;
    };
    Mat x1 = Mat::row({1.0});
    const double exact = std::exp(-0.25);
    std::vector<double> lk, le;
    for (int K : {1, 2, 4, 8, 16}) {
      SampleResult r = euler_sample(linear, x1, K, {});
      lk.push_back(std::log(static_cast<double>(K)));
      le.push_back(std::log(std::abs(r.x[0] - exact)));
    }
    double mk = 0.0, me = 0.0;
    for (std::size_t i = 0; i < lk.size(); ++i) {
      mk += lk[i];
      me += le[i];
    }
    mk /= lk.size();
    me /= le.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lk.size(); ++i) {
      num += (lk[i] - mk) * (le[i] - me);
      den += (lk[i] - mk) * (lk[i] - mk);
    }
    const double slope = num / den;
    std::snprintf(buf, sizeof buf, "global error slope %.3f within -1 +/- 0.1", slope);
    report(8, std::abs(slope + 1.0) <= 0.1, buf);
  } catch (const std::exception& e) {
    report(8, false, e.what());
  }

  // ---- 9: one-evaluation model vs the step-10 baseline ----------------------
  try {
    const CsvTable sw = read_csv(dir / "step_sweep.csv");
    const int c_method = col(sw, "method");
    const int c_k = col(sw, "K");
    const int c_nfe = col(sw, "nfe_per_action");
    const int c_avg = col(sw, "avg_mse");
    double t1 = -1.0, t10 = -1.0, s1 = -1.0;
    long long nfe_t10 = 0, nfe_s1 = 0;
    for (const auto& row : sw.rows) {
      const std::string& m = row[c_method];
      const int k = std::stoi(row[c_k]);
      if (m == "teacher" && k == 1) t1 = std::stod(row[c_avg]);
      if (m == "teacher" && k == 10) {
        t10 = std::stod(row[c_avg]);
        nfe_t10 = std::stoll(row[c_nfe]);
      }
      if (m == "student" && k == 1) {
        s1 = std::stod(row[c_avg]);
        nfe_s1 = std::stoll(row[c_nfe]);
      }
    }
    bool ok = t1 > 0.0 && t10 > 0.0 && s1 > 0.0;
    ok = ok && s1 < t1;                  // beats the naive single step
    ok = ok && s1 <= 1.1 * t10;          // within 10% of the 10-step baseline
    ok = ok && nfe_t10 == 10 && nfe_s1 == 1;
    ok = ok && pipeline_seconds < 600.0;
    std::snprintf(buf, sizeof buf,
                  "one-jump MSE %.3e vs naive %.3e and 1.1x baseline %.3e; evaluation ratio "
                  "10:1; pipeline %.0f s < 600 s",
                  s1, t1, 1.1 * t10, pipeline_seconds);
    report(9, ok, buf);
  } catch (const std::exception& e) {
    report(9, false, e.what());
  }

  // ---- 10: closed-loop success parity at a tenth of the budget --------------
  try {
    const CsvTable na = read_csv(dir / "nact_sweep.csv");
    const int c_method = col(na, "method");
    const int c_nact = col(na, "n_act");
    const int c_ep = col(na, "episodes");
    const int c_sr = col(na, "success_rate");
    const int c_total = col(na, "total_nfe");
    bool ok = true;
    double worst_drop = 0.0;
    for (int n_act : {1, 2, 4, 8}) {
      double sr_t = -1.0, sr_s = -1.0;
      long long nfe_t = 0, nfe_s = 0;
      int ep_min = 1 << 30;
      for (const auto& row : na.rows) {
        if (std::stoi(row[c_nact]) != n_act) continue;
        ep_min = std::min(ep_min, std::stoi(row[c_ep]));
        if (row[c_method] == "teacher") {
          sr_t = std::stod(row[c_sr]);
          nfe_t = std::stoll(row[c_total]);
        } else if (row[c_method] == "student") {
          sr_s = std::stod(row[c_sr]);
          nfe_s = std::stoll(row[c_total]);
        }
      }
      ok = ok && sr_t >= 0.0 && sr_s >= 0.0 && ep_min >= 50;
      ok = ok && nfe_t == 10 * nfe_s;                  // exact tenfold budget
      ok = ok && sr_s >= sr_t - 0.05 - 1e-12;          // within five points
      worst_drop = std::max(worst_drop, sr_t - sr_s);
    }
    std::snprintf(buf, sizeof buf,
                  "50+ episodes per cell, student budget exactly one tenth, worst success "
                  "drop %.1f points",
                  worst_drop * 100.0);
    report(10, ok, buf);
  } catch (const std::exception& e) {
    report(10, false, e.what());
  }

  // ---- 11: byte-identical reruns of every stage ------------------------------
  try {
    const std::map<std::string, std::string> before = snapshot(dir);
    if (cmd_pretrain(cfg) != 0 || cmd_distill(cfg) != 0 || cmd_sweep(cfg) != 0 ||
        cmd_rollout(cfg) != 0 || cmd_verify(cfg) != 0) {
      throw std::runtime_error("a rerun stage failed");
    }
    const std::map<std::string, std::string> after = snapshot(dir);
    bool ok = before.size() == after.size() && !before.empty();
    std::string culprit;
    for (const auto& [name, bytes] : before) {
      auto it = after.find(name);
      if (it == after.end() || it->second != bytes) {
        ok = false;
        culprit = name;
        break;
      }
    }
    std::snprintf(buf, sizeof buf, "%zu tabular artifacts byte-identical after rerunning all stages%s%s",
                  before.size(), culprit.empty() ? "" : "; first mismatch ", culprit.c_str());
    report(11, ok, buf);
  } catch (const std::exception& e) {
    report(11, false, e.what());
  }

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 11 criteria passed\n");
  return 0;
}
