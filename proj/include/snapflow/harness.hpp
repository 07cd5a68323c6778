#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "snapflow/config.hpp"
#include "snapflow/train.hpp"

namespace snapflow {

// RNG stream ids hung off the experiment seed, one per pipeline phase, so no
// phase ever shares draws with another and adding draws to one phase cannot
// shift any other.
namespace streams {
constexpr std::uint64_t kPretrain = 1;
constexpr std::uint64_t kDistill = 2;
constexpr std::uint64_t kEval = 3;
constexpr std::uint64_t kVerify = 4;
constexpr std::uint64_t kData = 5;
}  // namespace streams

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool passed = true;
  std::vector<std::string> artifacts;  // file names under the output directory

  nlohmann::json to_json() const;
};

// Train/held-out pair, regenerated deterministically from (config, seed)
// rather than stored on disk.
struct SplitDataset {
  Dataset train;
  Dataset heldout;
};
SplitDataset make_datasets(const ExperimentConfig& cfg);

// Pipeline phases. Each writes its artifacts under cfg.out_dir with the
// config hash embedded in every file, then writes its manifest last, so a
// manifest's presence implies every listed artifact exists. Deterministic
// CSV/JSON artifacts are byte-identical across reruns; measured wall-clock
// lands only in files named *_timing.csv and in the SVG plots.
//
// Return value is the process exit code: 0 on success, 1 when a
// verification suite reports failure. Configuration and prerequisite
// problems throw ConfigError; training divergence throws DivergenceError.
int cmd_verify(const ExperimentConfig& cfg);
int cmd_pretrain(const ExperimentConfig& cfg);
int cmd_distill(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg);
int cmd_rollout(const ExperimentConfig& cfg);

}  // namespace snapflow
