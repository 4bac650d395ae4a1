#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hida/forward.hpp"
#include "hida/geomodel.hpp"
#include "hida/rng.hpp"

namespace hida {

struct ZeroSigma : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct SingularInnovationMatrix : NumericalError {
  using NumericalError::NumericalError;
};
struct DegenerateKernel : NumericalError {
  using NumericalError::NumericalError;
};
// Thrown when a stage cannot produce any usable result within its budget;
// partial results are preserved by the caller where possible.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weighted squared distance between a prediction and the observations:
// sum of ((y - d) / sigma)^2 per channel.
double distance(const DataVector& y, const DataVector& d, const NoiseModel& nm);

// Gaussian log-likelihood with diagonal covariance r_diag (variances):
// -1/2 ln det(2 pi R) - 1/2 r^T R^-1 r.
double log_likelihood(const DataVector& y, const DataVector& d_obs,
                      const std::vector<double>& r_diag);

// d_obs + sqrt(alpha) R^{1/2} z with z ~ N(0, I).
DataVector perturb_observations(const DataVector& d_obs, double alpha,
                                const std::vector<double>& r_diag, RngStream& rng);

// One forward evaluation: hyperparameters plus the seed that fixes the
// field realization (and any other simulator randomness).
using ForwardFn = std::function<DataVector(const HyperParams&, std::uint64_t)>;

// ---------------------------------------------------------------------------
// SMC-ABC

struct Particle {
  HyperParams h;
  double distance = 0.0;
  double weight = 0.0;
  std::uint64_t seed = 0;  // simulator seed, kept for replay
};

struct Population {
  std::vector<Particle> particles;
  double epsilon = 0.0;           // acceptance threshold of this iteration
  std::size_t forward_runs = 0;   // simulate invocations this iteration
  double acceptance_rate = 0.0;
  std::size_t cumulative_runs = 0;
};

enum class SmcStopReason { kAcceptanceRate, kIterationCap, kBudget };

struct SmcConfig {
  int n_particles = 500;
  double stop_rate = 0.05;   // stop once iteration acceptance rate < this
  int max_iterations = 12;
  std::size_t budget = 200000;  // hard cap on forward runs
  double kernel_scale = 2.0;    // kernel covariance = scale * weighted cov
  double kernel_jitter_rel = 1.0e-8;
  int workers = 1;
  std::uint64_t seed = 0;
  void validate() const;
};

struct SmcResult {
  std::vector<Population> iterations;  // completed iterations only
  SmcStopReason stop = SmcStopReason::kBudget;
  bool budget_exhausted = false;
  std::size_t forward_runs = 0;  // total simulate invocations, incl. partial
};

// Adaptive SMC-ABC over the hyperprior box. Iteration 1 samples the prior
// and accepts everything with uniform weights; later iterations resample
// by weight, perturb with a Gaussian kernel of covariance
// kernel_scale * (weighted covariance of the previous population), reject
// out-of-prior proposals without a forward run, and accept once the
// distance falls below the running median threshold. Deterministic for a
// fixed seed under any worker count.
SmcResult smc_abc(const HyperPrior& prior, const ForwardFn& fwd,
                  const DataVector& d_obs, const NoiseModel& nm,
                  const SmcConfig& cfg);

// ---------------------------------------------------------------------------
// Rejection sampling

struct RsConfig {
  std::size_t budget = 0;
  std::size_t pilot_count = 0;  // 0 selects 5% of the budget
  int workers = 1;
  std::uint64_t seed = 0;
  void validate() const;
  std::size_t effective_pilot() const;
};

struct RsSample {
  HyperParams h;
  double log_likelihood = 0.0;
  std::uint64_t seed = 0;
  std::size_t trial = 0;  // global draw index, pilot draws included
};

struct RsResult {
  std::vector<RsSample> accepted;
  double ln_bound = 0.0;  // ln S_L frozen after the pilot phase
  std::size_t pilot_count = 0;
  std::size_t forward_runs = 0;
  std::size_t bound_violations = 0;
};

// Two-phase rejection sampler: a pilot phase sets ln S_L to the maximum
// pilot log-likelihood, then fresh prior draws are accepted when
// ln u <= ln l - ln S_L. Later draws exceeding the bound are accepted and
// counted, never used to revise the bound.
RsResult rejection_sampling(const HyperPrior& prior, const ForwardFn& fwd,
                            const DataVector& d_obs,
                            const std::vector<double>& r_diag,
                            const RsConfig& cfg);

// ---------------------------------------------------------------------------
// ESMDA

struct EsmdaConfig {
  std::vector<double> alphas;
  int workers = 1;
  std::uint64_t seed = 0;
  void validate() const;  // requires sum(1/alpha) = 1 within 1e-3
};

// Inflation-coefficient schedules with sum(1/alpha) = 1: n in {1, 4, 10, 20}.
std::vector<double> esmda_alpha_schedule(int n_steps);

// One analysis update. Columns of `states` and `predictions` are ensemble
// members; cross- and auto-covariances use 1/(N_e - 1) anomalies and the
// innovation system (C_dd + alpha R) is factorized once. Each member gets
// its own perturbed observations drawn from a stream derived from
// perturb_seed and the member index.
void esmda_step(Eigen::MatrixXd& states, const Eigen::MatrixXd& predictions,
                const Eigen::VectorXd& d_obs, const Eigen::VectorXd& r_diag,
                double alpha, std::uint64_t perturb_seed);

using EnsembleForwardFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

struct EsmdaRunResult {
  Eigen::MatrixXd states;
  std::size_t forward_runs = 0;
};

EsmdaRunResult esmda_run(Eigen::MatrixXd initial, const EnsembleForwardFn& fwd,
                         const Eigen::VectorXd& d_obs,
                         const Eigen::VectorXd& r_diag, const EsmdaConfig& cfg);

// ---------------------------------------------------------------------------
// Hierarchical assimilation (SMC-ABC over hyperparameters, then per-
// representative ESMDA over grid states)

struct HierarchicalOps {
  // Builds an initial ensemble of model states for one representative.
  std::function<Eigen::MatrixXd(const HyperParams&, int, std::uint64_t)>
      build_ensemble;
  // Evaluates one member's predicted data under that representative.
  std::function<Eigen::VectorXd(const HyperParams&, const Eigen::VectorXd&, int)>
      forward;
};

struct HierarchicalConfig {
  SmcConfig smc;
  std::vector<double> alphas;  // ESMDA schedule
  int n_representatives = 10;
  int ensemble_size = 500;
  int workers = 1;
  std::uint64_t seed = 0;
};

struct RepresentativePosterior {
  HyperParams h;
  Eigen::MatrixXd states;
};

struct HierarchicalResult {
  SmcResult smc;
  std::vector<HyperParams> representatives;
  std::vector<RepresentativePosterior> posteriors;
  std::size_t smc_runs = 0;
  std::size_t esmda_runs = 0;    // n_representatives * N_e * N_a
  std::size_t forward_runs = 0;  // smc_runs + esmda_runs
};

HierarchicalResult hierarchical_run(const HyperPrior& prior,
                                    const ForwardFn& smc_fwd,
                                    const DataVector& d_obs,
                                    const NoiseModel& nm,
                                    const HierarchicalOps& ops,
                                    const HierarchicalConfig& cfg);

// ---------------------------------------------------------------------------
// Modified (augmented-state) ESMDA

struct ModifiedEsmdaOps {
  // Builds one member state: per-cell log-permeability with log10_ar
  // appended as the final entry.
  std::function<Eigen::VectorXd(const HyperParams&, std::uint64_t)> build_member;
  EnsembleForwardFn forward;
};

struct ModifiedEsmdaConfig {
  EsmdaConfig esmda;
  int ensemble_size = 1000;
};

struct ModifiedEsmdaResult {
  Eigen::MatrixXd states;  // (n_cells + 1) x N_e
  // Per-member hyperparameter samples recovered from the posterior fields:
  // spatial mean, unbiased spatial std, and the augmented log10_ar entry.
  std::vector<double> mu_logk;
  std::vector<double> sigma_logk;
  std::vector<double> log10_ar;
  std::size_t forward_runs = 0;
};

ModifiedEsmdaResult modified_esmda_run(const HyperPrior& prior,
                                       const ModifiedEsmdaOps& ops,
                                       const Eigen::VectorXd& d_obs,
                                       const Eigen::VectorXd& r_diag,
                                       const ModifiedEsmdaConfig& cfg);

// ---------------------------------------------------------------------------
// Regularized data-mismatch objective (diagnostic only)

using PrecisionApplier = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Applies the pseudo-inverse of the ensemble covariance (anomalies with
// 1/(N_e - 1) normalization) through a truncated SVD.
PrecisionApplier make_ensemble_precision_applier(const Eigen::MatrixXd& members,
                                                 double tol_rel = 1.0e-10);

// 1/2 |d_obs - y|^2_R + 1/2 |m - m_bar|^2_Sigma.
double objective(const Eigen::VectorXd& m, const Eigen::VectorXd& m_bar,
                 const PrecisionApplier& prior_precision,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& d_obs,
                 const Eigen::VectorXd& r_diag);

}  // namespace hida
