#include "snapflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace snapflow {

namespace {

constexpr double kW = 640.0, kH = 420.0;
constexpr double kLeft = 64.0, kRight = 20.0, kTop = 28.0, kBottom = 48.0;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string attr2(double x, double y) { return num(x) + "," + num(y); }

void open_doc(std::string& s, const std::string& title) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" +
       num(kH) + "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kW / 2) + "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
       title + "</text>\n";
}

void axis_line(std::string& s, double x1, double y1, double x2, double y2) {
  s += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
       num(y2) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
}

void label(std::string& s, double x, double y, const std::string& text, const char* anchor,
           int size = 11) {
  s += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
       "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) + "\">" + text +
       "</text>\n";
}

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> pts;  // (K, mse)
};

}  // namespace

std::string pareto_svg(const SweepResult& sweep) {
  std::vector<Series> series = {{"teacher", "#1f77b4", {}}, {"student", "#d62728", {}}};
  for (const auto& row : sweep.rows) {
    for (auto& s : series) {
      if (row.method == s.name) {
        s.pts.emplace_back(static_cast<double>(row.K), std::max(row.metrics.avg_mse, 1e-12));
      }
    }
  }
  double kmin = 1e300, kmax = -1e300, lo = 1e300, hi = -1e300;
  for (const auto& s : series) {
    for (const auto& [k, m] : s.pts) {
      kmin = std::min(kmin, k);
      kmax = std::max(kmax, k);
      lo = std::min(lo, std::log10(m));
      hi = std::max(hi, std::log10(m));
    }
  }
  if (kmax <= kmin) kmax = kmin + 1.0;
  if (hi <= lo) hi = lo + 1.0;
  lo = std::floor(lo * 2.0) / 2.0;
  hi = std::ceil(hi * 2.0) / 2.0;

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double k) { return kLeft + (k - kmin) / (kmax - kmin) * pw; };
  auto py = [&](double m) { return kTop + ph - (std::log10(m) - lo) / (hi - lo) * ph; };

  std::string s;
  open_doc(s, "Held-out reconstruction error vs sampler steps");
  axis_line(s, kLeft, kTop, kLeft, kTop + ph);
  axis_line(s, kLeft, kTop + ph, kLeft + pw, kTop + ph);

  for (double e = lo; e <= hi + 1e-9; e += 0.5) {
    const double y = kTop + ph - (e - lo) / (hi - lo) * ph;
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    char t[32];
    std::snprintf(t, sizeof(t), "1e%.1f", e);
    label(s, kLeft - 6, y + 4, t, "end", 10);
  }
  std::vector<double> kticks;
  for (const auto& srs : series) {
    for (const auto& [k, m] : srs.pts) kticks.push_back(k);
  }
  std::sort(kticks.begin(), kticks.end());
  kticks.erase(std::unique(kticks.begin(), kticks.end()), kticks.end());
  for (double k : kticks) {
    label(s, px(k), kTop + ph + 16, num(k), "middle", 10);
  }
  label(s, kLeft + pw / 2, kH - 12, "sampler steps K (= evaluations per action)", "middle");
  s += "<text x=\"16\" y=\"" + num(kTop + ph / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 16 " +
       num(kTop + ph / 2) + ")\">mean per-sample MSE (log scale)</text>\n";

  double ly = kTop + 12;
  for (const auto& srs : series) {
    if (srs.pts.empty()) continue;
    std::string pts;
    for (const auto& [k, m] : srs.pts) {
      if (!pts.empty()) pts += " ";
      pts += attr2(px(k), py(m));
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + srs.color +
         "\" stroke-width=\"2\"/>\n";
    for (const auto& [k, m] : srs.pts) {
      s += "<circle cx=\"" + num(px(k)) + "\" cy=\"" + num(py(m)) + "\" r=\"3.2\" fill=\"" +
           srs.color + "\"/>\n";
    }
    s += "<rect x=\"" + num(kLeft + pw - 140) + "\" y=\"" + num(ly - 9) +
         "\" width=\"12\" height=\"12\" fill=\"" + srs.color + "\"/>\n";
    label(s, kLeft + pw - 122, ly + 2, srs.name, "start");
    ly += 18;
  }
  s += "</svg>\n";
  return s;
}

std::string nfe_decomposition_svg(const SweepResult& sweep, int teacher_k) {
  struct Bar {
    std::string name;
    std::string color;
    double nfe = 0.0;
    double secs = 0.0;
    bool found = false;
  };
  Bar bars[2] = {{"teacher (K=" + std::to_string(teacher_k) + ")", "#1f77b4", 0, 0, false},
                 {"student (K=1)", "#d62728", 0, 0, false}};
  for (const auto& row : sweep.rows) {
    if (row.method == "teacher" && row.K == teacher_k) {
      bars[0].nfe = static_cast<double>(row.metrics.nfe_per_action);
      bars[0].secs = row.metrics.seconds_per_action;
      bars[0].found = true;
    }
    if (row.method == "student" && row.K == 1) {
      bars[1].nfe = static_cast<double>(row.metrics.nfe_per_action);
      bars[1].secs = row.metrics.seconds_per_action;
      bars[1].found = true;
    }
  }

  std::string s;
  open_doc(s, "Per-action compute: evaluations and measured time");
  const double panel_w = (kW - kLeft - kRight - 40.0) / 2.0;
  const double ph = kH - kTop - kBottom;

  auto draw_panel = [&](double x0, const std::string& title, bool use_secs) {
    double maxv = 0.0;
    for (const auto& b : bars) maxv = std::max(maxv, use_secs ? b.secs : b.nfe);
    if (maxv <= 0.0) maxv = 1.0;
    axis_line(s, x0, kTop + 20, x0, kTop + 20 + (ph - 20));
    axis_line(s, x0, kTop + 20 + (ph - 20), x0 + panel_w, kTop + 20 + (ph - 20));
    label(s, x0 + panel_w / 2, kTop + 14, title, "middle", 12);
    const double bw = panel_w / 5.0;
    for (int i = 0; i < 2; ++i) {
      const double v = use_secs ? bars[i].secs : bars[i].nfe;
      const double h = (ph - 20) * v / maxv;
      const double bx = x0 + bw * (1 + 2 * i);
      const double by = kTop + 20 + (ph - 20) - h;
      s += "<rect x=\"" + num(bx) + "\" y=\"" + num(by) + "\" width=\"" + num(bw) +
           "\" height=\"" + num(h) + "\" fill=\"" + bars[i].color + "\"/>\n";
      char t[48];
      if (use_secs) {
        std::snprintf(t, sizeof(t), "%.3g s", v);
      } else {
        std::snprintf(t, sizeof(t), "%.0f", v);
      }
      label(s, bx + bw / 2, by - 5, t, "middle", 10);
      label(s, bx + bw / 2, kTop + 20 + ph - 6, bars[i].name, "middle", 9);
    }
  };
  draw_panel(kLeft, "evaluations per action", false);
  draw_panel(kLeft + panel_w + 40.0, "seconds per action", true);
  s += "</svg>\n";
  return s;
}

}  // namespace snapflow
