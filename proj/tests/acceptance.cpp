// Acceptance gate: exercises the toolkit end to end and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hida/diagnostics.hpp"
#include "hida/experiment.hpp"
#include "hida/forward.hpp"
#include "hida/inference.hpp"
#include "hida/selection.hpp"
#include "json.hpp"

using namespace hida;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

// --- small helpers ----------------------------------------------------------

DataVector scalar_data(double v) {
  DataVector d;
  d.values = {v};
  d.channels = {Channel::kPressure};
  d.times = {1.0};
  return d;
}

double phi_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Analytic posterior of the scalar toy: theta ~ U(0,10), d ~ N(theta,1),
// observed 0.8; a N(0.8,1) truncated to the box.
struct ToyOracle {
  double mu = 0.8, lo = 0.0, hi = 10.0;
  double a() const { return lo - mu; }
  double b() const { return hi - mu; }
  double z() const { return phi_cdf(b()) - phi_cdf(a()); }
  double mean() const { return mu + (phi_pdf(a()) - phi_pdf(b())) / z(); }
  double stddev() const {
    const double r = (phi_pdf(a()) - phi_pdf(b())) / z();
    return std::sqrt(1.0 + (a() * phi_pdf(a()) - b() * phi_pdf(b())) / z() -
                     r * r);
  }
};

HyperPrior toy_prior() {
  HyperPrior p;
  p.lower[0] = 0.0;
  p.upper[0] = 10.0;
  p.active = {true, false, false, false, false};
  return p;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// parameter -> ordered (run_count, js) points from a diag metrics file.
std::map<std::string, std::vector<std::pair<std::size_t, double>>>
read_metrics(const fs::path& file) {
  std::map<std::string, std::vector<std::pair<std::size_t, double>>> m;
  for (const auto& row : read_csv_rows(file))
    m[row[0]].push_back({std::stoull(row[1]), std::stod(row[2])});
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criterion 1: conjugate-oracle equivalence ------------------------------

void criterion_1() {
  const Timer timer;
  const ToyOracle oracle;
  const HyperPrior prior = toy_prior();
  const DataVector d_obs = scalar_data(0.8);
  std::string detail;
  bool pass = true;

  {
    ForwardFn fwd = [](const HyperParams& h, std::uint64_t) {
      return scalar_data(h.mu_logk);
    };
    RsConfig cfg;
    cfg.budget = 100000;
    cfg.seed = 101;
    const RsResult res = rejection_sampling(prior, fwd, d_obs, {1.0}, cfg);
    double mean = 0.0, var = 0.0;
    for (const RsSample& s : res.accepted) mean += s.h.mu_logk;
    mean /= double(res.accepted.size());
    for (const RsSample& s : res.accepted)
      var += (s.h.mu_logk - mean) * (s.h.mu_logk - mean);
    var /= double(res.accepted.size() - 1);
    const double se = oracle.stddev() / std::sqrt(double(res.accepted.size()));
    const bool mean_ok = std::abs(mean - oracle.mean()) <= 3.0 * se;
    const bool std_ok =
        std::abs(std::sqrt(var) - oracle.stddev()) <= 0.05 * oracle.stddev();
    pass = pass && mean_ok && std_ok;
    detail += "rs mean " + fmt("%.4f", mean) + "/" + fmt("%.4f", oracle.mean()) +
              " std " + fmt("%.4f", std::sqrt(var)) + "/" +
              fmt("%.4f", oracle.stddev());
  }
  {
    ForwardFn fwd = [](const HyperParams& h, std::uint64_t seed) {
      RngStream rng(seed);
      return scalar_data(h.mu_logk + rng.normal());
    };
    NoiseModel nm;
    nm.sigma_p = 1.0;
    SmcConfig cfg;
    cfg.n_particles = 500;
    cfg.stop_rate = 0.05;
    cfg.budget = 1000000;
    cfg.seed = 102;
    const SmcResult res = smc_abc(prior, fwd, d_obs, nm, cfg);
    const Population& last = res.iterations.back();
    double mean = 0.0, var = 0.0, w2 = 0.0;
    for (const Particle& p : last.particles) {
      mean += p.weight * p.h.mu_logk;
      w2 += p.weight * p.weight;
    }
    for (const Particle& p : last.particles)
      var += p.weight * (p.h.mu_logk - mean) * (p.h.mu_logk - mean);
    const double ess = 1.0 / w2;
    const double se = oracle.stddev() / std::sqrt(ess);
    const bool mean_ok = std::abs(mean - oracle.mean()) <= 3.0 * se;
    const bool std_ok =
        std::abs(std::sqrt(var) - oracle.stddev()) <= 0.05 * oracle.stddev();
    pass = pass && mean_ok && std_ok;
    detail += ", smc mean " + fmt("%.4f", mean) + " std " +
              fmt("%.4f", std::sqrt(var)) + " ess " + fmt("%.0f", ess);
  }
  const double secs = timer.seconds();
  pass = pass && secs < 60.0;
  report(1, pass, detail + ", " + fmt("%.1f", secs) + " s");
}

// --- criterion 2: Kalman equivalence ----------------------------------------

void criterion_2() {
  const Timer timer;
  const int ne = 10000;
  Eigen::VectorXd m0(2);
  m0 << 1.0, -1.0;
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.5, 0.2, 1.0;
  Eigen::VectorXd r_diag(2);
  r_diag << 0.25, 0.25;
  Eigen::VectorXd d_obs(2);
  d_obs << 2.0, 0.5;

  // Exact posterior of the linear-Gaussian problem.
  const Eigen::MatrixXd rinv = r_diag.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(2, 2) + g.transpose() * rinv * g;
  const Eigen::MatrixXd cov_post = a.inverse();
  const Eigen::VectorXd mean_post = cov_post * (m0 + g.transpose() * rinv * d_obs);

  bool pass = true;
  std::string detail;
  for (int na : {1, 4}) {
    Eigen::MatrixXd initial(2, ne);
    RngStream rng(2000 + na);
    for (int j = 0; j < ne; ++j) {
      initial(0, j) = m0[0] + rng.normal();
      initial(1, j) = m0[1] + rng.normal();
    }
    EsmdaConfig cfg;
    cfg.alphas = esmda_alpha_schedule(na);
    cfg.seed = 200 + na;
    EnsembleForwardFn fwd = [&g](const Eigen::VectorXd& m, int) {
      return Eigen::VectorXd(g * m);
    };
    const EsmdaRunResult run = esmda_run(initial, fwd, d_obs, r_diag, cfg);
    const Eigen::VectorXd mean = run.states.rowwise().mean();
    const Eigen::MatrixXd anom = run.states.colwise() - mean;
    const Eigen::MatrixXd cov = anom * anom.transpose() / double(ne - 1);
    const double mean_err = (mean - mean_post).norm() / mean_post.norm();
    const double trace_err =
        std::abs(cov.trace() - cov_post.trace()) / cov_post.trace();
    pass = pass && mean_err <= 0.02 && trace_err <= 0.05;
    detail += "Na=" + std::to_string(na) + " mean err " +
              fmt("%.2f", 100.0 * mean_err) + "% trace err " +
              fmt("%.2f", 100.0 * trace_err) + "%, ";
  }
  const double secs = timer.seconds();
  pass = pass && secs < 30.0;
  report(2, pass, detail + fmt("%.1f", secs) + " s");
}

// --- criterion 3: alpha schedules -------------------------------------------

void criterion_3() {
  bool pass = true;
  std::string detail;
  for (int n : {4, 10, 20}) {
    const std::vector<double> alphas = esmda_alpha_schedule(n);
    double inv = 0.0;
    for (double a : alphas) inv += 1.0 / a;
    pass = pass && int(alphas.size()) == n && std::abs(inv - 1.0) <= 1e-3;
    detail += std::to_string(n) + "-step sum " + fmt("%.6f", inv) + ", ";
  }
  report(3, pass, detail + "tolerance 1e-3");
}

// --- criteria 4-6: desk twin ------------------------------------------------

struct DeskArtifacts {
  fs::path ws;
  ExperimentConfig cfg;  // sampled truth, seed 42
  double twin_seconds = 0.0;
  std::size_t twin_runs = 0;
  bool ok = false;
};

ExperimentConfig desk_config(const fs::path& ws, std::uint64_t seed) {
  std::ifstream in(HIDA_SOURCE_DIR "/configs/desk.json");
  json j = json::parse(in);
  j["truth"]["mode"] = "sample";
  j["seed"] = seed;
  const fs::path p = ws / ("cfg_seed" + std::to_string(seed) + ".json");
  std::ofstream(p) << j.dump(2);
  return ExperimentConfig::load(p.string());
}

int run_method(const ExperimentConfig& cfg, const std::string& method,
               const fs::path& ws, const std::string& out,
               std::ostream& log) {
  return cmd_run(cfg, method, (ws / "truth").string(), (ws / out).string(), 1,
                 log);
}

void criterion_4(DeskArtifacts& art) {
  const Timer timer;
  std::ofstream log(art.ws / "acceptance_log.txt", std::ios::app);

  art.cfg = desk_config(art.ws, 42);
  if (cmd_gen_truth(art.cfg, (art.ws / "truth").string(), log) != 0)
    throw std::runtime_error("gen-truth failed");
  const int rs_rc = run_method(art.cfg, "rs", art.ws, "rs", log);
  if (rs_rc != 0) throw std::runtime_error("rs run failed");
  const int smc_rc = run_method(art.cfg, "smcabc", art.ws, "smc42", log);
  if (smc_rc != 0 && smc_rc != kExitBudget)
    throw std::runtime_error("smcabc run failed");
  const int diag_rc =
      cmd_diag(art.cfg, {(art.ws / "smc42").string(), (art.ws / "rs").string()},
               (art.ws / "rs").string(), (art.ws / "diag4").string(), 1, log);
  if (diag_rc != 0) throw std::runtime_error("diag failed");

  const json rs_ledger = json::parse(slurp(art.ws / "rs" / "ledger.json"));
  const json smc_ledger = json::parse(slurp(art.ws / "smc42" / "ledger.json"));
  art.twin_runs = rs_ledger.at("forward_runs").get<std::size_t>() +
                  smc_ledger.at("forward_runs").get<std::size_t>() + 1;
  art.twin_seconds = timer.seconds();

  const auto smc = read_metrics(art.ws / "diag4" / "smc42_metrics.csv");
  const auto rs = read_metrics(art.ws / "diag4" / "rs_metrics.csv");

  bool pass = true;
  std::string detail;
  for (const char* param : {"mu_logk", "sigma_logk", "log10_ar"}) {
    const auto& sc = smc.at(param);
    const auto& rc = rs.at(param);
    const double smc_final = sc.back().second;
    double rs_20k = -1.0;
    for (const auto& [runs, js] : rc)
      if (runs == 20000) rs_20k = js;
    if (rs_20k < 0.0) throw std::runtime_error("no rs snapshot at 20000 runs");
    const bool below = smc_final < rs_20k;
    // Non-increasing JS across the last three snapshots, 0.01 nat slack.
    bool monotone = true;
    const std::size_t n = sc.size();
    for (std::size_t i = (n >= 3 ? n - 2 : 1); i < n; ++i)
      monotone = monotone && sc[i].second <= sc[i - 1].second + 0.01;
    pass = pass && below && monotone;
    detail += std::string(param) + " " + fmt("%.3f", smc_final) + "<" +
              fmt("%.3f", rs_20k) + (monotone ? "" : " (not monotone)") + ", ";
  }
  const double ms = 1000.0 * art.twin_seconds / double(art.twin_runs);
  pass = pass && art.twin_seconds < 1800.0 && ms <= 10.0;
  art.ok = true;
  report(4, pass,
         detail + fmt("%.0f", art.twin_seconds) + " s at " + fmt("%.2f", ms) +
             " ms/run");
}

void criterion_5(const DeskArtifacts& art) {
  std::ofstream log(art.ws / "acceptance_log.txt", std::ios::app);
  const int rc = run_method(art.cfg, "hierarchical", art.ws, "hier", log);
  if (rc != 0 && rc != kExitBudget)
    throw std::runtime_error("hierarchical run failed");
  const int diag_rc =
      cmd_diag(art.cfg, {(art.ws / "hier").string()}, (art.ws / "rs").string(),
               (art.ws / "diag5").string(), 1, log);
  if (diag_rc != 0) throw std::runtime_error("diag failed");

  const json ledger = json::parse(slurp(art.ws / "hier" / "ledger.json"));
  const std::size_t smc_runs = ledger.at("smc_runs").get<std::size_t>();
  const std::size_t esmda_runs = ledger.at("esmda_runs").get<std::size_t>();
  const std::size_t total = ledger.at("forward_runs").get<std::size_t>();
  const bool count_ok = esmda_runs == 20000 && total == smc_runs + 20000;

  // P10-P90 pressure band against the noisy pressure observations.
  const TruthBundle truth = TruthBundle::load((art.ws / "truth").string());
  std::map<double, std::pair<double, double>> band;  // time -> (p10, p90)
  for (const auto& row :
       read_csv_rows(art.ws / "diag5" / "hier_percentiles.csv"))
    band[std::stod(row[0])] = {std::stod(row[1]), std::stod(row[3])};
  int seen = 0, inside = 0;
  for (std::size_t i = 0; i < truth.d_obs.size(); ++i) {
    if (truth.d_obs.channels[i] != Channel::kPressure) continue;
    ++seen;
    const auto it = band.find(truth.d_obs.times[i]);
    if (it == band.end()) continue;
    if (it->second.first <= truth.d_obs.values[i] &&
        truth.d_obs.values[i] <= it->second.second)
      ++inside;
  }
  const bool band_ok = seen == 5 && inside >= 4;
  report(5, count_ok && band_ok,
         "esmda runs " + std::to_string(esmda_runs) + ", total " +
             std::to_string(total) + " = smc " + std::to_string(smc_runs) +
             " + 20000, band covers " + std::to_string(inside) + "/" +
             std::to_string(seen) + " pressure obs");
}

void criterion_6(const DeskArtifacts& art) {
  std::ofstream log(art.ws / "acceptance_log.txt", std::ios::app);
  std::vector<std::string> smc_runs = {"smc42"};
  std::vector<std::string> mod_runs;
  for (std::uint64_t seed : {42, 43, 44}) {
    ExperimentConfig cfg = art.cfg;
    cfg.seed = seed;
    const std::string mod = "mod" + std::to_string(seed);
    if (run_method(cfg, "modified-esmda", art.ws, mod, log) != 0)
      throw std::runtime_error(mod + " run failed");
    mod_runs.push_back(mod);
    if (seed == 42) continue;  // smc42 already exists from criterion 4
    const std::string smc = "smc" + std::to_string(seed);
    const int rc = run_method(cfg, "smcabc", art.ws, smc, log);
    if (rc != 0 && rc != kExitBudget)
      throw std::runtime_error(smc + " run failed");
    smc_runs.push_back(smc);
  }
  std::vector<std::string> diag_dirs;
  for (const std::string& r : smc_runs)
    if (r != "smc42") diag_dirs.push_back((art.ws / r).string());
  for (const std::string& r : mod_runs)
    diag_dirs.push_back((art.ws / r).string());
  const int diag_rc = cmd_diag(art.cfg, diag_dirs, (art.ws / "rs").string(),
                               (art.ws / "diag6").string(), 1, log);
  if (diag_rc != 0) throw std::runtime_error("diag failed");

  auto sigma_js = [&](const fs::path& metrics) {
    return read_metrics(metrics).at("sigma_logk").back().second;
  };
  double smc_mean = sigma_js(art.ws / "diag4" / "smc42_metrics.csv");
  for (const std::string& r : smc_runs)
    if (r != "smc42")
      smc_mean += sigma_js(art.ws / "diag6" / (r + "_metrics.csv"));
  smc_mean /= double(smc_runs.size());
  double mod_mean = 0.0;
  for (const std::string& r : mod_runs)
    mod_mean += sigma_js(art.ws / "diag6" / (r + "_metrics.csv"));
  mod_mean /= double(mod_runs.size());

  const double ratio = mod_mean / smc_mean;
  report(6, ratio >= 2.0,
         "sigma_logk JS over 3 seeds: modified " + fmt("%.3f", mod_mean) +
             " vs smc " + fmt("%.3f", smc_mean) + ", ratio " +
             fmt("%.2f", ratio) + " (need >= 2)");
}

// --- criterion 7: solver physics suite --------------------------------------

void criterion_7() {
  SimConfig cfg;
  cfg.grid = GridSpec{9, 9, 2, 50.0, 50.0, 5.0};
  cfg.injector_i = 4;
  cfg.injector_j = 4;
  cfg.injector_k0 = 0;
  cfg.injector_k1 = 1;
  cfg.monitor_i = 6;
  cfg.monitor_j = 4;
  cfg.monitor_k = 0;
  cfg.rate_m3_per_year = 5.0e4;
  cfg.report_times_years = {1, 2, 4, 6};

  HyperParams h;
  h.mu_logk = 3.0;
  h.sigma_logk = 0.0;
  h.log10_ar = 0.0;
  const FieldRealization m = generate_field(h, cfg.grid, 1);

  bool conserved = true;
  const SimOutput out = simulate(m, cfg);
  const std::vector<double> pv = pore_volumes(m, cfg);
  double worst = 0.0;
  for (std::size_t t = 0; t < out.report_times_years.size(); ++t) {
    double stored = 0.0;
    for (int c = 0; c < cfg.grid.cell_count(); ++c)
      stored += pv[c] * out.saturation_fields[t][c];
    const double injected = cfg.rate_m3_per_year * out.report_times_years[t];
    const double rel = std::abs(stored - injected) / injected;
    worst = std::max(worst, rel);
    conserved = conserved && rel <= 0.01;
  }

  SimConfig still = cfg;
  still.rate_m3_per_year = 0.0;
  const SimOutput eq = simulate(m, still);
  bool equilibrium = true;
  for (double p : eq.monitor_pressure)
    equilibrium = equilibrium && p == cfg.initial_pressure_mpa;
  for (double s : eq.monitor_saturation) equilibrium = equilibrium && s == 0.0;

  bool symmetric = true;
  const int n = cfg.grid.nx;
  for (std::size_t t = 0; t < out.report_times_years.size() && symmetric; ++t)
    for (int k = 0; k < cfg.grid.nz; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const double p = out.pressure_fields[t][cfg.grid.index(i, j, k)];
          const double pr =
              out.pressure_fields[t][cfg.grid.index(j, n - 1 - i, k)];
          symmetric = symmetric && std::abs(p - pr) <= 1e-7 * std::abs(p);
        }

  SimConfig fine = cfg;
  fine.inner_steps = 16;
  const SimOutput ref = simulate(m, fine);
  double prev_dp = 1e99;
  bool converging = true;
  for (int steps : {1, 2, 4}) {
    SimConfig coarse = cfg;
    coarse.inner_steps = steps;
    const ConvergenceErrors err =
        self_convergence_errors(simulate(m, coarse), ref);
    converging = converging && err.delta_p < prev_dp;
    prev_dp = err.delta_p;
  }

  report(7, conserved && equilibrium && symmetric && converging,
         "conservation worst " + fmt("%.3f", 100.0 * worst) +
             "%, equilibrium " + (equilibrium ? "exact" : "broken") +
             ", symmetry " + (symmetric ? "ok" : "broken") +
             ", time refinement " + (converging ? "decreasing" : "stalled"));
}

// --- criterion 8: unit-property spot suite ----------------------------------

void criterion_8() {
  bool pass = true;
  std::string bad;
  auto check = [&](bool ok, const char* what) {
    pass = pass && ok;
    if (!ok) bad += std::string(" ") + what;
  };

  // Distance cases.
  NoiseModel nm;
  DataVector d = scalar_data(1.0);
  DataVector y = scalar_data(1.0 + 2.0 * nm.sigma_p);
  check(distance(d, d, nm) == 0.0, "distance-zero");
  check(std::abs(distance(y, d, nm) - 4.0) < 1e-12, "distance-2sigma");

  // Log-likelihood algebra.
  const std::vector<double> r{0.09};
  DataVector y1 = scalar_data(1.0 + 0.3);
  DataVector y2 = scalar_data(1.0 + 0.6);
  check(std::abs(log_likelihood(d, d, r) +
                 0.5 * std::log(2.0 * M_PI * 0.09)) < 1e-12,
        "loglik-peak");
  check(std::abs(log_likelihood(y1, d, r) - log_likelihood(y2, d, r) - 1.5) <
            1e-12,
        "loglik-quadratic");

  // Perturbation variance.
  {
    RngStream rng(801);
    double var = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const DataVector p = perturb_observations(d, 4.0, r, rng);
      var += (p.values[0] - 1.0) * (p.values[0] - 1.0);
    }
    check(std::abs(var / n - 4.0 * 0.09) < 0.02 * 4.0 * 0.09, "perturb-var");
  }

  // Systematic-resampling stratification.
  {
    WeightedSamples ws;
    ws.points.resize(2);
    ws.points[0].mu_logk = 0.0;
    ws.points[1].mu_logk = 1.0;
    ws.weights = {0.7, 0.3};
    RngStream rng(802);
    const auto idx = systematic_resample(ws, 1000, rng);
    std::size_t c0 = 0;
    for (std::size_t i : idx) c0 += (i == 0);
    check(std::abs(double(c0) - 700.0) <= 1.0, "resample-stratified");
    check(std::is_sorted(idx.begin(), idx.end()), "resample-sorted");
  }

  // Medoid membership.
  {
    HyperPrior prior = toy_prior();
    std::vector<HyperParams> pts;
    for (double v : {1.0, 1.1, 5.0, 5.1, 9.0, 9.1}) {
      HyperParams h;
      h.mu_logk = v;
      pts.push_back(h);
    }
    RngStream rng(803);
    const auto idx = kmedoids_select_indices(pts, prior, 3, rng);
    bool member = idx.size() == 3;
    for (std::size_t i : idx) member = member && i < pts.size();
    check(member, "medoid-membership");
  }

  // JS bounds, symmetry, identity.
  {
    const auto edges = uniform_edges(0.0, 1.0, 8);
    const MarginalDensity p = histogram_density({0.1, 0.2, 0.3}, {}, edges);
    const MarginalDensity q = histogram_density({0.7, 0.8, 0.9}, {}, edges);
    check(js_divergence(p, p) < 1e-12, "js-identity");
    check(std::abs(js_divergence(p, q) - std::log(2.0)) < 1e-12, "js-bound");
    check(std::abs(js_divergence(p, q) - js_divergence(q, p)) < 1e-15,
          "js-symmetry");
  }

  report(8, pass, pass ? "distance, likelihood, perturbation, resampling, "
                         "medoids, divergence properties hold"
                       : "failing:" + bad);
}

// --- criterion 9: worker determinism ----------------------------------------

void criterion_9(const DeskArtifacts& art) {
  std::ofstream log(art.ws / "acceptance_log.txt", std::ios::app);
  // Reduced budgets on the full 16x16x4 model keep three worker settings
  // per method affordable.
  json j;
  {
    std::ifstream in(HIDA_SOURCE_DIR "/configs/desk.json");
    j = json::parse(in);
  }
  j["truth"]["mode"] = "sample";
  j["seed"] = 42;
  j["smcabc"]["n_particles"] = 100;
  j["smcabc"]["budget"] = 1500;
  j["smcabc"]["max_iterations"] = 3;
  j["rs"]["budget"] = 1000;
  j["rs"]["pilot_count"] = 100;
  j["rs"]["snapshot_budgets"] = {500, 1000};
  j["esmda"]["ensemble_size"] = 40;
  j["modified_esmda"]["ensemble_size"] = 40;
  j["modified_esmda"]["n_steps"] = 4;
  j["hierarchical"]["n_representatives"] = 2;
  j["hierarchical"]["ensemble_size"] = 40;
  const fs::path cfg_path = art.ws / "cfg_det.json";
  std::ofstream(cfg_path) << j.dump(2);
  const ExperimentConfig cfg = ExperimentConfig::load(cfg_path.string());

  bool pass = true;
  std::string detail;
  for (const std::string method :
       {"smcabc", "rs", "esmda", "hierarchical", "modified-esmda"}) {
    std::map<int, std::string> posterior;
    for (int workers : {1, 4, 8}) {
      const fs::path out =
          art.ws / ("det_" + method + "_w" + std::to_string(workers));
      const int rc = cmd_run(cfg, method, (art.ws / "truth").string(),
                             out.string(), workers, log);
      if (rc != 0 && rc != kExitBudget)
        throw std::runtime_error("determinism run failed: " + method);
      posterior[workers] = slurp(out / "posterior.csv");
      if (fs::exists(out / "representatives.csv"))
        posterior[workers] += slurp(out / "representatives.csv");
    }
    const bool same = posterior[1] == posterior[4] && posterior[1] == posterior[8];
    pass = pass && same;
    detail += method + (same ? " ok, " : " DIFFERS, ");
  }
  report(9, pass, detail + "workers {1,4,8}");
}

}  // namespace

int main() {
  const fs::path ws = fs::temp_directory_path() / "hida_acceptance";
  std::error_code ec;
  fs::remove_all(ws, ec);
  fs::create_directories(ws);

  auto guard = [&](int n, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(n, false, std::string("exception: ") + e.what());
    }
  };

  guard(1, [] { criterion_1(); });
  guard(2, [] { criterion_2(); });
  guard(3, [] { criterion_3(); });

  DeskArtifacts art;
  art.ws = ws;
  guard(4, [&] { criterion_4(art); });
  if (art.ok) {
    guard(5, [&] { criterion_5(art); });
    guard(6, [&] { criterion_6(art); });
  } else {
    report(5, false, "skipped: desk twin artifacts unavailable");
    report(6, false, "skipped: desk twin artifacts unavailable");
  }
  guard(7, [] { criterion_7(); });
  guard(8, [] { criterion_8(); });
  if (art.ok) {
    guard(9, [&] { criterion_9(art); });
  } else {
    report(9, false, "skipped: desk twin artifacts unavailable");
  }

  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
