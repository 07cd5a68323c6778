#pragma once

#include <stdexcept>
#include <string>

namespace snapflow {

// Bad or inconsistent experiment configuration. The CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered while integrating or training. The CLI maps
// this to exit 3.
struct DivergenceError : std::runtime_error {
  int step;
  DivergenceError(int step_, const std::string& msg) : std::runtime_error(msg), step(step_) {}
};

}  // namespace snapflow
