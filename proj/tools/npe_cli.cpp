#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "npe/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"amortized posterior estimation pipeline"};
  app.require_subcommand(1);

  npe::pipeline::CliOptions options;
  std::uint64_t seed_override = 0;
  double ks_gate = 0.0;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", options.config_path, "experiment config (json)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* out = cmd->add_option("--out", options.out_dir, "output / bundle directory");
    if (needs_out) out->required();
    cmd->add_option("--seed-override", seed_override, "replace the config seed")
        ->each([&](const std::string&) { options.seed_override = seed_override; });
    cmd->add_option("--workers", options.workers, "simulation worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--ks-gate", ks_gate, "ks threshold for calibration gates")
        ->each([&](const std::string&) { options.ks_gate = ks_gate; });
  };

  add_common(app.add_subcommand("simulate", "draw a training batch and save it"), true);
  add_common(app.add_subcommand("train", "fit posterior networks and save a bundle"), true);
  add_common(app.add_subcommand("diagnose", "calibration checks on a fresh batch"), true);
  add_common(app.add_subcommand("infer", "posterior for observed data or a scenario"), true);
  add_common(app.add_subcommand("invariance-check",
                                "compare fits under prior vs shifted training draws"),
             true);

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "simulate") return npe::pipeline::cmd_simulate(options);
    if (sub == "train") return npe::pipeline::cmd_train(options);
    if (sub == "diagnose") return npe::pipeline::cmd_diagnose(options);
    if (sub == "infer") return npe::pipeline::cmd_infer(options);
    if (sub == "invariance-check") return npe::pipeline::cmd_invariance_check(options);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
