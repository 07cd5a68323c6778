#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snapflow/mixture.hpp"
#include "snapflow/net.hpp"
#include "snapflow/toy_env.hpp"
#include "snapflow/train.hpp"

namespace snapflow {

struct VerifyConfig {
  int n_mc = 100000;      // Monte-Carlo draws per grid point
  int quad_steps = 1000;  // reference-trajectory nodes for the error-integral check
  std::vector<double> t_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct EvalConfig {
  std::vector<int> k_grid = {1, 2, 3, 4, 5, 10};
  std::vector<int> nact_grid = {1, 2, 4, 8};
  int noise_per_sample = 1;
  int episodes = 50;   // closed-loop episodes per (method, n_act) cell
  int teacher_k = 10;  // step count for the stage-one model in comparisons
  bool timing = true;  // wall-clock collection; lands only in *_timing files and SVG
};

// Stage defaults. Stage one is pure regression; stage two mixes in the
// self-distillation branch.
TrainConfig default_pretrain_config();
TrainConfig default_distill_config();

// One experiment, fully described by a flat key=value text file plus a seed.
// Every run artifact embeds hash(), so artifacts from different effective
// configurations can never be silently mixed.
struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "runs/default";  // not part of the hash
  std::string data_kind = "toy";         // "toy" or "mixture"

  // toy data
  ToyEnvConfig env;
  ExpertConfig expert;
  int toy_train = 4096;
  int toy_heldout = 500;

  // mixture data
  std::vector<double> mix_weights = {0.5, 0.5};
  std::vector<std::vector<double>> mix_means = {{-1.0, 0.0}, {1.0, 0.0}};
  std::vector<double> mix_sigmas = {0.4, 0.4};
  int mixture_horizon = 1;
  int mixture_train = 4096;
  int mixture_heldout = 500;

  NetConfig net;  // horizon/dim/ctx_dim are derived from the data section
  TrainConfig pretrain = default_pretrain_config();
  TrainConfig distill = default_distill_config();
  EvalConfig eval;
  VerifyConfig verify;

  // Parses "key = value" lines; '#' starts a comment; blank lines ignored.
  // Unknown keys and malformed values raise ConfigError.
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  MixtureSpec mixture() const;

  // Sorted "key=value" lines of the full effective configuration (defaults
  // included, out_dir excluded). The determinism contract hashes this.
  std::string canonical() const;

  // FNV-1a 64-bit hash of canonical(), as 16 hex digits.
  std::string hash() const;

  void validate() const;
};

// FNV-1a over raw bytes; the stable fingerprint used for config identity.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace snapflow
