#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hida/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical data assimilation on a desk-scale flow model"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int workers = 1;

  auto* gen = app.add_subcommand("gen-truth", "Generate a synthetic truth bundle");
  std::string gen_out;
  gen->add_option("--config", config_path, "Experiment config JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", seed, "Override the config seed");

  auto* run = app.add_subcommand("run", "Run one inference method");
  std::string run_method, run_truth, run_out;
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--method", run_method,
                  "rs | smcabc | esmda | hierarchical | modified-esmda")
      ->required();
  run->add_option("--truth", run_truth, "Truth bundle directory")->required();
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--workers", workers, "Worker threads");

  auto* diag = app.add_subcommand("diag", "Compare runs against a reference");
  std::vector<std::string> diag_runs;
  std::string diag_ref, diag_out;
  diag->add_option("--config", config_path, "Experiment config JSON")->required();
  diag->add_option("--reference", diag_ref, "Reference run directory")->required();
  diag->add_option("--out", diag_out, "Output directory")->required();
  diag->add_option("runs", diag_runs, "Run directories to analyze")->required();
  diag->add_option("--workers", workers, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hida::kExitOk : hida::kExitUsage;
  }

  hida::ExperimentConfig cfg;
  try {
    cfg = hida::ExperimentConfig::load(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hida::kExitUsage;
  }

  if (gen->parsed()) {
    if (gen->count("--seed")) cfg.seed = seed;
    return hida::cmd_gen_truth(cfg, gen_out, std::cerr);
  }
  if (run->parsed()) {
    if (run->count("--seed")) cfg.seed = seed;
    return hida::cmd_run(cfg, run_method, run_truth, run_out, workers, std::cerr);
  }
  return hida::cmd_diag(cfg, diag_runs, diag_ref, diag_out, workers, std::cerr);
}
