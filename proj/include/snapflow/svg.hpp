#pragma once

#include <string>

#include "snapflow/eval.hpp"

namespace snapflow {

// Offline quality versus step count, one polyline per method, log-scaled
// error axis. Self-contained SVG (no external resources).
std::string pareto_svg(const SweepResult& sweep);

// Compute-cost comparison of the K-step stage-one sampler and the one-pass
// distilled sampler: evaluations per action, plus measured seconds per
// action when available. Wall-clock numbers appear only here, never in the
// deterministic CSV/JSON artifacts.
std::string nfe_decomposition_svg(const SweepResult& sweep, int teacher_k);

}  // namespace snapflow
