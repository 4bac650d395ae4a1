#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hida/forward.hpp"
#include "hida/geomodel.hpp"
#include "hida/inference.hpp"

namespace hida {

// Configuration problems and mismatched inputs map to the usage exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TruthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Process exit codes shared by all subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitBudget = 3,
  kExitNumerical = 4,
};

struct ExperimentConfig {
  SimConfig sim;  // carries the grid
  FieldSampler::Options field;
  HyperPrior prior;

  bool truth_fixed = true;     // false: sample the truth from the prior
  HyperParams truth_values;    // used when truth_fixed

  ObservationSchedule schedule;
  NoiseModel noise;

  SmcConfig smcabc;  // seed and workers are filled in per run
  RsConfig rs;
  std::vector<std::size_t> snapshot_budgets;

  int esmda_ensemble = 500;
  int esmda_steps = 4;
  int modified_ensemble = 1000;
  int modified_steps = 20;
  int hier_representatives = 10;
  int hier_ensemble = 500;
  int hier_steps = 4;

  int prediction_members = 200;  // posterior-prediction subsample in diag
  int histogram_bins = 20;
  std::uint64_t seed = 1;

  static ExperimentConfig load(const std::string& path);
  void validate() const;
};

// Synthetic-truth bundle persisted by cmd_gen_truth.
struct TruthBundle {
  HyperParams h_true;
  GridSpec grid;
  std::vector<double> log_k;
  std::uint64_t field_seed = 0;
  DataVector d_true;
  DataVector d_obs;
  std::vector<double> monitor_pressure;    // full report schedule
  std::vector<double> monitor_saturation;
  std::string checksum;  // of truth.json, for cross-run consistency

  static TruthBundle load(const std::string& dir);
};

int cmd_gen_truth(const ExperimentConfig& cfg, const std::string& out_dir,
                  std::ostream& log);

// method: rs | smcabc | esmda | hierarchical | modified-esmda
int cmd_run(const ExperimentConfig& cfg, const std::string& method,
            const std::string& truth_dir, const std::string& out_dir,
            int workers, std::ostream& log);

int cmd_diag(const ExperimentConfig& cfg,
             const std::vector<std::string>& run_dirs,
             const std::string& reference_dir, const std::string& out_dir,
             int workers, std::ostream& log);

// FNV-1a 64-bit checksum as fixed-width hex, used by artifact manifests.
std::string fnv1a_hex(const void* data, std::size_t n);
std::string fnv1a_file_hex(const std::string& path);

}  // namespace hida
