#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "snapflow/config.hpp"
#include "snapflow/errors.hpp"
#include "snapflow/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "snapflow: trains a flow-matching action model, self-distills it into a one-pass "
      "sampler, and numerically verifies the identities the procedure rests on"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long long seed = -1;

  const char* descriptions[][2] = {
      {"verify", "run the closed-form-vs-Monte-Carlo verification suite"},
      {"pretrain", "stage one: fit the velocity model by regression"},
      {"distill", "stage two: self-distill the one-pass sampler"},
      {"sweep", "offline error vs step count for both models"},
      {"rollout", "closed-loop replanning sweep on the point-mass task"},
  };
  for (const auto& d : descriptions) {
    CLI::App* sub = app.add_subcommand(d[0], d[1]);
    sub->add_option("--config", config_path, "experiment config file (key = value lines)");
    sub->add_option("--seed", seed, "override the config seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    snapflow::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = snapflow::ExperimentConfig::from_file(config_path);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();

    if (app.got_subcommand("verify")) return snapflow::cmd_verify(cfg);
    if (app.got_subcommand("pretrain")) return snapflow::cmd_pretrain(cfg);
    if (app.got_subcommand("distill")) return snapflow::cmd_distill(cfg);
    if (app.got_subcommand("sweep")) return snapflow::cmd_sweep(cfg);
    if (app.got_subcommand("rollout")) return snapflow::cmd_rollout(cfg);
    std::fprintf(stderr, "no subcommand\n");
    return 2;
  } catch (const snapflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const snapflow::DivergenceError& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
