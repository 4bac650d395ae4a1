#include "hida/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hida/parallel.hpp"
#include "hida/selection.hpp"

namespace hida {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Stream tags; every random draw in this module flows from a seed derived
// with one of these, so results are independent of worker count.
enum : std::uint64_t {
  kTagSmcProposal = 101,
  kTagSmcSim = 102,
  kTagRsDraw = 201,
  kTagEsmdaPerturb = 301,
  kTagHierSmc = 401,
  kTagHierSelect = 402,
  kTagHierBuild = 403,
  kTagHierEsmda = 404,
  kTagModHyper = 501,
  kTagModField = 502,
};

Eigen::VectorXd to_vector(const DataVector& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.values.data(),
                                           static_cast<Eigen::Index>(d.size()));
}

double lower_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

std::size_t categorical(const std::vector<double>& cumulative, RngStream& rng) {
  const double u = rng.uniform01();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  const std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
  return std::min(idx, cumulative.size() - 1);
}

}  // namespace

double distance(const DataVector& y, const DataVector& d, const NoiseModel& nm) {
  y.validate();
  d.validate();
  if (!y.same_layout(d)) throw ShapeMismatch("prediction and data layouts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double sigma = nm.sigma_for(d.channels[i]);
    if (!(sigma > 0.0)) throw ZeroSigma("zero noise std for a present channel");
    const double r = (y.values[i] - d.values[i]) / sigma;
    sum += r * r;
  }
  return sum;
}

double log_likelihood(const DataVector& y, const DataVector& d_obs,
                      const std::vector<double>& r_diag) {
  y.validate();
  d_obs.validate();
  if (y.size() != d_obs.size() || r_diag.size() != y.size())
    throw ShapeMismatch("log_likelihood dimensions disagree");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(r_diag[i] > 0.0)) throw ZeroSigma("non-positive noise variance");
    const double r = d_obs.values[i] - y.values[i];
    sum += std::log(2.0 * kPi * r_diag[i]) + r * r / r_diag[i];
  }
  return -0.5 * sum;
}

DataVector perturb_observations(const DataVector& d_obs, double alpha,
                                const std::vector<double>& r_diag,
                                RngStream& rng) {
  d_obs.validate();
  if (r_diag.size() != d_obs.size())
    throw ShapeMismatch("perturbation variance length disagrees");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  DataVector out = d_obs;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(r_diag[i] > 0.0)) throw ZeroSigma("non-positive noise variance");
    out.values[i] += std::sqrt(alpha * r_diag[i]) * rng.normal();
  }
  return out;
}

// ---------------------------------------------------------------------------
// SMC-ABC

void SmcConfig::validate() const {
  if (n_particles < 2) throw std::invalid_argument("n_particles must be >= 2");
  if (!(stop_rate > 0.0 && stop_rate < 1.0))
    throw std::invalid_argument("stop_rate must lie in (0, 1)");
  if (max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");
  if (budget == 0) throw std::invalid_argument("budget must be > 0");
  if (!(kernel_scale > 0.0))
    throw std::invalid_argument("kernel_scale must be > 0");
  if (!(kernel_jitter_rel >= 0.0))
    throw std::invalid_argument("kernel_jitter_rel must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

SmcResult smc_abc(const HyperPrior& prior, const ForwardFn& fwd,
                  const DataVector& d_obs, const NoiseModel& nm,
                  const SmcConfig& cfg) {
  cfg.validate();
  prior.validate();
  d_obs.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.n_particles);
  const std::vector<int> active = prior.active_indices();
  const Eigen::Index m = static_cast<Eigen::Index>(active.size());
  if (m == 0) throw std::invalid_argument("no active hyperparameters");

  // Uniform prior log-density over the box; zero-width dimensions only
  // shift weights by a common constant and are skipped.
  double log_prior = 0.0;
  for (int dim : active)
    if (prior.range(dim) > 0.0) log_prior -= std::log(prior.range(dim));

  SmcResult result;
  std::size_t used = 0;
  double epsilon = std::numeric_limits<double>::infinity();

  // Previous population, already prepared for proposing.
  std::vector<double> prev_cumulative;
  std::vector<double> prev_log_w;
  Eigen::MatrixXd prev_active;     // m x n particle coordinates
  Eigen::MatrixXd kernel_chol;     // lower factor of the kernel covariance

  struct SlotOut {
    bool accepted = false;
    Particle p;
    std::size_t trials = 0;
  };

  for (int t = 1;; ++t) {
    const std::size_t remaining = cfg.budget - used;

    // Slots run in synchronized rounds: each incomplete slot spends one
    // forward run per round from its own stream, so results do not depend
    // on the worker count, and the final round truncates (in slot order)
    // to exactly the remaining budget. A truncated iteration is counted
    // but yields no population.
    std::vector<SlotOut> slots(n);
    std::vector<RngStream> rngs;
    rngs.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
      rngs.emplace_back(derive_seed(
          cfg.seed, {kTagSmcProposal, static_cast<std::uint64_t>(t), s}));

    std::vector<std::size_t> incomplete(n);
    for (std::size_t s = 0; s < n; ++s) incomplete[s] = s;
    std::size_t iter_runs = 0;
    bool truncated = false;
    while (!incomplete.empty()) {
      std::vector<std::size_t> round = incomplete;
      if (round.size() > remaining - iter_runs) {
        round.resize(remaining - iter_runs);
        truncated = true;
      }
      if (round.empty()) break;
      parallel_for(round.size(), cfg.workers, [&](std::size_t ri) {
        const std::size_t s = round[ri];
        RngStream& rng = rngs[s];
        HyperParams h;
        if (t == 1) {
          h = sample_prior(prior, rng);
        } else {
          // Resample by weight, perturb, and redraw until the proposal
          // lands inside the prior box; out-of-box draws cost no forward
          // run and are not counted.
          Eigen::VectorXd z(m);
          for (long guard = 0;; ++guard) {
            if (guard > 1000000)
              throw DegenerateKernel(
                  "kernel proposals never landed inside the prior box");
            const std::size_t j = categorical(prev_cumulative, rng);
            for (Eigen::Index e = 0; e < m; ++e) z[e] = rng.normal();
            const Eigen::VectorXd x =
                prev_active.col(static_cast<Eigen::Index>(j)) +
                kernel_chol.triangularView<Eigen::Lower>() * z;
            h = from_active_vector(x, prior);
            if (prior.contains(h)) break;
          }
        }
        const std::uint64_t sim_seed =
            derive_seed(cfg.seed, {kTagSmcSim, static_cast<std::uint64_t>(t),
                                   s, slots[s].trials});
        const DataVector y = fwd(h, sim_seed);
        ++slots[s].trials;
        const double d = distance(y, d_obs, nm);
        if (d <= epsilon)
          slots[s] = {true, {h, d, 0.0, sim_seed}, slots[s].trials};
      });
      iter_runs += round.size();
      if (truncated) break;
      std::vector<std::size_t> next;
      for (std::size_t s : incomplete)
        if (!slots[s].accepted) next.push_back(s);
      incomplete = std::move(next);
    }
    used += iter_runs;
    if (truncated || !incomplete.empty()) {
      result.stop = SmcStopReason::kBudget;
      result.budget_exhausted = true;
      break;
    }

    Population pop;
    pop.particles.reserve(n);
    for (const SlotOut& s : slots) pop.particles.push_back(s.p);
    pop.epsilon = epsilon;
    pop.forward_runs = iter_runs;
    pop.acceptance_rate = static_cast<double>(n) / static_cast<double>(iter_runs);
    pop.cumulative_runs = used;

    Eigen::MatrixXd coords(m, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      coords.col(static_cast<Eigen::Index>(i)) =
          to_active_vector(pop.particles[i].h, prior);

    if (t == 1) {
      for (Particle& p : pop.particles) p.weight = 1.0 / static_cast<double>(n);
    } else {
      // Eq. 10 weights: uniform prior over the explicit kernel mixture,
      // evaluated in log space with the shared factor of the kernel
      // normal cancelling into the final normalization.
      const Eigen::MatrixXd white =
          kernel_chol.triangularView<Eigen::Lower>().solve(coords);
      const Eigen::MatrixXd prev_white =
          kernel_chol.triangularView<Eigen::Lower>().solve(prev_active);
      std::vector<double> log_w(n);
      for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(n);
        for (std::size_t j = 0; j < n; ++j) {
          const double quad =
              (white.col(static_cast<Eigen::Index>(i)) -
               prev_white.col(static_cast<Eigen::Index>(j)))
                  .squaredNorm();
          terms[j] = prev_log_w[j] - 0.5 * quad;
          best = std::max(best, terms[j]);
        }
        double mix = 0.0;
        for (std::size_t j = 0; j < n; ++j) mix += std::exp(terms[j] - best);
        log_w[i] = log_prior - (best + std::log(mix));
      }
      const double shift = *std::max_element(log_w.begin(), log_w.end());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        pop.particles[i].weight = std::exp(log_w[i] - shift);
        total += pop.particles[i].weight;
      }
      for (Particle& p : pop.particles) p.weight /= total;
    }

    result.iterations.push_back(pop);
    if (pop.acceptance_rate < cfg.stop_rate) {
      result.stop = SmcStopReason::kAcceptanceRate;
      break;
    }
    if (t == cfg.max_iterations) {
      result.stop = SmcStopReason::kIterationCap;
      break;
    }

    // Prepare the next iteration: threshold, resampling table, kernel.
    {
      std::vector<double> dists(n);
      for (std::size_t i = 0; i < n; ++i) dists[i] = pop.particles[i].distance;
      epsilon = lower_median(std::move(dists));
    }
    prev_active = std::move(coords);
    prev_cumulative.resize(n);
    prev_log_w.resize(n);
    {
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = pop.particles[i].weight;
        cum += w;
        prev_cumulative[i] = cum;
        prev_log_w[i] = w > 0.0 ? std::log(w)
                                : -std::numeric_limits<double>::infinity();
      }
      prev_cumulative.back() = 1.0;
    }
    {
      Eigen::VectorXd w(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        w[static_cast<Eigen::Index>(i)] = pop.particles[i].weight;
      const Eigen::VectorXd mean = prev_active * w;
      const Eigen::MatrixXd centered = prev_active.colwise() - mean;
      Eigen::MatrixXd cov =
          cfg.kernel_scale * (centered * w.asDiagonal() * centered.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) {
        for (Eigen::Index e = 0; e < m; ++e) {
          const double r = prior.range(active[static_cast<std::size_t>(e)]);
          cov(e, e) += cfg.kernel_jitter_rel * r * r;
        }
        llt.compute(cov);
        if (llt.info() != Eigen::Success)
          throw DegenerateKernel("kernel covariance is singular after jitter");
      }
      kernel_chol = llt.matrixL();
    }
  }

  result.forward_runs = used;
  return result;
}

// ---------------------------------------------------------------------------
// Rejection sampling

void RsConfig::validate() const {
  if (budget < 2) throw std::invalid_argument("budget must be >= 2");
  if (pilot_count != 0 && pilot_count >= budget)
    throw std::invalid_argument("pilot_count must be < budget");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::size_t RsConfig::effective_pilot() const {
  std::size_t p = pilot_count != 0
                      ? pilot_count
                      : static_cast<std::size_t>(std::llround(0.05 * budget));
  p = std::max<std::size_t>(p, 1);
  return std::min(p, budget - 1);
}

RsResult rejection_sampling(const HyperPrior& prior, const ForwardFn& fwd,
                            const DataVector& d_obs,
                            const std::vector<double>& r_diag,
                            const RsConfig& cfg) {
  cfg.validate();
  prior.validate();
  d_obs.validate();
  if (r_diag.size() != d_obs.size())
    throw ShapeMismatch("noise variance length disagrees with observations");

  const std::size_t pilot = cfg.effective_pilot();
  std::vector<HyperParams> draws(cfg.budget);
  std::vector<double> loglik(cfg.budget);
  std::vector<double> u(cfg.budget);
  std::vector<std::uint64_t> seeds(cfg.budget);

  auto evaluate = [&](std::size_t i) {
    RngStream rng(derive_seed(cfg.seed, {kTagRsDraw, i}));
    const HyperParams h = sample_prior(prior, rng);
    const std::uint64_t sim_seed = rng.next_u64();
    const DataVector y = fwd(h, sim_seed);
    draws[i] = h;
    seeds[i] = sim_seed;
    loglik[i] = log_likelihood(y, d_obs, r_diag);
    u[i] = rng.uniform01();
  };

  parallel_for(pilot, cfg.workers, evaluate);
  double ln_bound = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pilot; ++i) ln_bound = std::max(ln_bound, loglik[i]);

  parallel_for(cfg.budget - pilot, cfg.workers,
               [&](std::size_t i) { evaluate(pilot + i); });

  RsResult result;
  result.ln_bound = ln_bound;
  result.pilot_count = pilot;
  result.forward_runs = cfg.budget;
  for (std::size_t i = pilot; i < cfg.budget; ++i) {
    if (loglik[i] > ln_bound) ++result.bound_violations;
    if (std::log(u[i]) <= loglik[i] - ln_bound)
      result.accepted.push_back({draws[i], loglik[i], seeds[i], i});
  }
  return result;
}

// ---------------------------------------------------------------------------
// ESMDA

void EsmdaConfig::validate() const {
  if (alphas.empty()) throw std::invalid_argument("alpha schedule is empty");
  double inv_sum = 0.0;
  for (double a : alphas) {
    if (!(a > 0.0)) throw std::invalid_argument("alphas must be > 0");
    inv_sum += 1.0 / a;
  }
  if (std::abs(inv_sum - 1.0) > 1.0e-3)
    throw std::invalid_argument("sum of 1/alpha must equal 1 within 1e-3, got " +
                                std::to_string(inv_sum));
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::vector<double> esmda_alpha_schedule(int n_steps) {
  switch (n_steps) {
    case 1:
      return {1.0};
    case 4:
      return {9.333, 7.0, 4.0, 2.0};
    case 10:
      return {57.017, 35.0, 25.0, 20.0, 18.0, 15.0, 12.0, 8.0, 5.0, 3.0};
    case 20:
      return {129.635, 105.0, 95.0, 85.0, 75.0, 65.0, 60.0, 55.0, 50.0, 45.0,
              40.0,    35.0,  30.0, 25.0, 20.0, 15.0, 12.0, 9.0,  6.0,  4.0};
    default:
      throw std::invalid_argument("no standard alpha schedule for " +
                                  std::to_string(n_steps) + " steps");
  }
}

void esmda_step(Eigen::MatrixXd& states, const Eigen::MatrixXd& predictions,
                const Eigen::VectorXd& d_obs, const Eigen::VectorXd& r_diag,
                double alpha, std::uint64_t perturb_seed) {
  const Eigen::Index ne = states.cols();
  const Eigen::Index nd = predictions.rows();
  if (predictions.cols() != ne)
    throw ShapeMismatch("states and predictions disagree in member count");
  if (d_obs.size() != nd || r_diag.size() != nd)
    throw ShapeMismatch("observation dimensions disagree");
  if (ne < 2) throw ShapeMismatch("need at least 2 ensemble members");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  for (Eigen::Index i = 0; i < nd; ++i)
    if (!(r_diag[i] > 0.0)) throw ZeroSigma("non-positive noise variance");

  const double norm = 1.0 / static_cast<double>(ne - 1);
  const Eigen::VectorXd x_mean = states.rowwise().mean();
  const Eigen::VectorXd d_mean = predictions.rowwise().mean();
  const Eigen::MatrixXd xa = states.colwise() - x_mean;
  const Eigen::MatrixXd da = predictions.colwise() - d_mean;

  Eigen::MatrixXd cdd = (da * da.transpose()) * norm;
  cdd.diagonal() += alpha * r_diag;
  const Eigen::LLT<Eigen::MatrixXd> llt(cdd);
  if (llt.info() != Eigen::Success)
    throw SingularInnovationMatrix("C_dd + alpha R failed to factorize");

  Eigen::MatrixXd innovations(nd, ne);
  for (Eigen::Index j = 0; j < ne; ++j) {
    RngStream rng(
        derive_seed(perturb_seed, {static_cast<std::uint64_t>(j)}));
    for (Eigen::Index i = 0; i < nd; ++i)
      innovations(i, j) = d_obs[i] + std::sqrt(alpha * r_diag[i]) * rng.normal() -
                          predictions(i, j);
  }
  const Eigen::MatrixXd solved = llt.solve(innovations);
  const Eigen::MatrixXd cmd = (xa * da.transpose()) * norm;
  states.noalias() += cmd * solved;
}

EsmdaRunResult esmda_run(Eigen::MatrixXd initial, const EnsembleForwardFn& fwd,
                         const Eigen::VectorXd& d_obs,
                         const Eigen::VectorXd& r_diag, const EsmdaConfig& cfg) {
  cfg.validate();
  const Eigen::Index ne = initial.cols();
  const Eigen::Index nd = d_obs.size();
  if (ne < 2) throw ShapeMismatch("need at least 2 ensemble members");

  EsmdaRunResult out{std::move(initial), 0};
  Eigen::MatrixXd preds(nd, ne);
  for (std::size_t step = 0; step < cfg.alphas.size(); ++step) {
    parallel_for(static_cast<std::size_t>(ne), cfg.workers, [&](std::size_t j) {
      const Eigen::Index col = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd y = fwd(out.states.col(col), static_cast<int>(j));
      if (y.size() != nd)
        throw ShapeMismatch("forward output dimension disagrees with d_obs");
      preds.col(col) = y;
    });
    out.forward_runs += static_cast<std::size_t>(ne);
    try {
      esmda_step(out.states, preds, d_obs, r_diag, cfg.alphas[step],
                 derive_seed(cfg.seed, {kTagEsmdaPerturb, step}));
    } catch (const NumericalError& e) {
      throw SingularInnovationMatrix(
          std::string(e.what()) + " (assimilation step " +
          std::to_string(step + 1) + " of " + std::to_string(cfg.alphas.size()) +
          "; earlier steps completed)");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchical assimilation

HierarchicalResult hierarchical_run(const HyperPrior& prior,
                                    const ForwardFn& smc_fwd,
                                    const DataVector& d_obs,
                                    const NoiseModel& nm,
                                    const HierarchicalOps& ops,
                                    const HierarchicalConfig& cfg) {
  if (cfg.n_representatives < 1)
    throw std::invalid_argument("n_representatives must be >= 1");
  if (cfg.ensemble_size < 2)
    throw std::invalid_argument("ensemble_size must be >= 2");

  HierarchicalResult result;
  {
    SmcConfig smc_cfg = cfg.smc;
    smc_cfg.seed = derive_seed(cfg.seed, {kTagHierSmc});
    smc_cfg.workers = cfg.workers;
    result.smc = smc_abc(prior, smc_fwd, d_obs, nm, smc_cfg);
  }
  result.smc_runs = result.smc.forward_runs;
  if (result.smc.iterations.empty())
    throw BudgetError(
        "hyperparameter stage exhausted its budget before completing an "
        "iteration");

  const Population& final_pop = result.smc.iterations.back();
  WeightedSamples ws;
  ws.points.reserve(final_pop.particles.size());
  ws.weights.reserve(final_pop.particles.size());
  for (const Particle& p : final_pop.particles) {
    ws.points.push_back(p.h);
    ws.weights.push_back(p.weight);
  }

  RngStream select_rng(derive_seed(cfg.seed, {kTagHierSelect}));
  const std::vector<std::size_t> resampled_idx =
      systematic_resample(ws, ws.points.size(), select_rng);
  std::vector<HyperParams> resampled;
  resampled.reserve(resampled_idx.size());
  for (std::size_t idx : resampled_idx) resampled.push_back(ws.points[idx]);
  result.representatives =
      kmedoids_select(resampled, prior,
                      static_cast<std::size_t>(cfg.n_representatives),
                      select_rng);

  const Eigen::VectorXd d_vec = to_vector(d_obs);
  const std::vector<double> var = noise_variances(d_obs, nm);
  const Eigen::VectorXd r_diag =
      Eigen::Map<const Eigen::VectorXd>(var.data(),
                                        static_cast<Eigen::Index>(var.size()));

  for (std::size_t r = 0; r < result.representatives.size(); ++r) {
    const HyperParams& h = result.representatives[r];
    Eigen::MatrixXd ensemble =
        ops.build_ensemble(h, cfg.ensemble_size, derive_seed(cfg.seed, {kTagHierBuild, r}));
    EsmdaConfig esmda_cfg;
    esmda_cfg.alphas = cfg.alphas;
    esmda_cfg.workers = cfg.workers;
    esmda_cfg.seed = derive_seed(cfg.seed, {kTagHierEsmda, r});
    auto member_fwd = [&ops, &h](const Eigen::VectorXd& state, int member) {
      return ops.forward(h, state, member);
    };
    EsmdaRunResult run =
        esmda_run(std::move(ensemble), member_fwd, d_vec, r_diag, esmda_cfg);
    result.esmda_runs += run.forward_runs;
    result.posteriors.push_back({h, std::move(run.states)});
  }
  result.forward_runs = result.smc_runs + result.esmda_runs;
  return result;
}

// ---------------------------------------------------------------------------
// Modified (augmented-state) ESMDA

ModifiedEsmdaResult modified_esmda_run(const HyperPrior& prior,
                                       const ModifiedEsmdaOps& ops,
                                       const Eigen::VectorXd& d_obs,
                                       const Eigen::VectorXd& r_diag,
                                       const ModifiedEsmdaConfig& cfg) {
  cfg.esmda.validate();
  prior.validate();
  if (cfg.ensemble_size < 2)
    throw std::invalid_argument("ensemble_size must be >= 2");
  const std::size_t ne = static_cast<std::size_t>(cfg.ensemble_size);

  // Each member carries its own hyperparameter draw; the field realization
  // and the appended log10_ar entry both come from that draw.
  std::vector<Eigen::VectorXd> members(ne);
  parallel_for(ne, cfg.esmda.workers, [&](std::size_t j) {
    RngStream rng(derive_seed(cfg.esmda.seed, {kTagModHyper, j}));
    const HyperParams h = sample_prior(prior, rng);
    members[j] = ops.build_member(h, derive_seed(cfg.esmda.seed, {kTagModField, j}));
  });
  const Eigen::Index dim = members[0].size();
  if (dim < 2) throw ShapeMismatch("augmented state must hold a field plus log10_ar");
  Eigen::MatrixXd states(dim, static_cast<Eigen::Index>(ne));
  for (std::size_t j = 0; j < ne; ++j) {
    if (members[j].size() != dim)
      throw ShapeMismatch("augmented members disagree in dimension");
    states.col(static_cast<Eigen::Index>(j)) = members[j];
  }
  members.clear();

  EsmdaRunResult run =
      esmda_run(std::move(states), ops.forward, d_obs, r_diag, cfg.esmda);

  ModifiedEsmdaResult result;
  result.forward_runs = run.forward_runs;
  const Eigen::Index n_cells = dim - 1;
  result.mu_logk.resize(ne);
  result.sigma_logk.resize(ne);
  result.log10_ar.resize(ne);
  for (std::size_t j = 0; j < ne; ++j) {
    const auto field = run.states.col(static_cast<Eigen::Index>(j)).head(n_cells);
    const double mean = field.mean();
    const double ss = (field.array() - mean).square().sum();
    result.mu_logk[j] = mean;
    result.sigma_logk[j] =
        std::sqrt(ss / static_cast<double>(n_cells - 1));
    result.log10_ar[j] = run.states(n_cells, static_cast<Eigen::Index>(j));
  }
  result.states = std::move(run.states);
  return result;
}

// ---------------------------------------------------------------------------
// Diagnostic objective

PrecisionApplier make_ensemble_precision_applier(const Eigen::MatrixXd& members,
                                                 double tol_rel) {
  const Eigen::Index ne = members.cols();
  if (ne < 2) throw ShapeMismatch("need at least 2 members for a covariance");
  const Eigen::VectorXd mean = members.rowwise().mean();
  const Eigen::MatrixXd anomalies =
      (members.colwise() - mean) / std::sqrt(static_cast<double>(ne - 1));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(anomalies, Eigen::ComputeThinU);
  const Eigen::MatrixXd u = svd.matrixU();
  const Eigen::VectorXd s = svd.singularValues();
  const double cutoff = s.size() > 0 ? tol_rel * s[0] : 0.0;
  Eigen::VectorXd inv_s2 = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff && s[i] > 0.0) inv_s2[i] = 1.0 / (s[i] * s[i]);
  return [u, inv_s2](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (v.size() != u.rows())
      throw ShapeMismatch("vector does not match ensemble state dimension");
    return u * (inv_s2.asDiagonal() * (u.transpose() * v));
  };
}

double objective(const Eigen::VectorXd& m, const Eigen::VectorXd& m_bar,
                 const PrecisionApplier& prior_precision,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& d_obs,
                 const Eigen::VectorXd& r_diag) {
  if (m.size() != m_bar.size()) throw ShapeMismatch("state dimensions disagree");
  if (y.size() != d_obs.size() || r_diag.size() != y.size())
    throw ShapeMismatch("data dimensions disagree");
  double data_term = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(r_diag[i] > 0.0)) throw ZeroSigma("non-positive noise variance");
    const double r = d_obs[i] - y[i];
    data_term += r * r / r_diag[i];
  }
  const Eigen::VectorXd dm = m - m_bar;
  const double model_term = dm.dot(prior_precision(dm));
  return 0.5 * data_term + 0.5 * model_term;
}

}  // namespace hida
