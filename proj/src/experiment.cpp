#include "hida/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "hida/diagnostics.hpp"
#include "hida/field_io.hpp"
#include "hida/parallel.hpp"

namespace hida {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream tags for experiment-level draws, disjoint from the sampler tags.
enum : std::uint64_t {
  kTagTruthHyper = 611,
  kTagTruthField = 612,
  kTagTruthNoise = 613,
  kTagEsmdaBuild = 621,
  kTagHierMember = 622,
  kTagDiagPrior = 631,
  kTagDiagNoise = 632,
};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::uint64_t parse_u64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 10);
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal CSV reader for the files this tool writes itself: no quoting,
// first row is the header.
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

// --- JSON access with error paths -----------------------------------------

const json& require(const json& j, const std::string& key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing config key: " + path + key);
  return *it;
}

double require_num(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError("expected a number at " + path + key);
  return v.get<double>();
}

int require_int(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer())
    throw ConfigError("expected an integer at " + path + key);
  return v.get<int>();
}

bool require_bool(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_boolean()) throw ConfigError("expected a boolean at " + path + key);
  return v.get<bool>();
}

// --- Posterior CSV schema --------------------------------------------------

constexpr const char* kPosteriorHeader =
    "iteration,particle,mu_logk,sigma_logk,log10_ar,weight,distance,seed";

void append_posterior_row(std::string& out, int iteration, int particle,
                          const HyperParams& h, double weight, double dist,
                          std::uint64_t seed) {
  out += std::to_string(iteration);
  out += ',';
  out += std::to_string(particle);
  out += ',';
  out += g17(h.mu_logk);
  out += ',';
  out += g17(h.sigma_logk);
  out += ',';
  out += g17(h.log10_ar);
  out += ',';
  out += g17(weight);
  out += ',';
  out += g17(dist);
  out += ',';
  out += std::to_string(seed);
  out += '\n';
}

HyperParams row_hyper(const std::vector<std::string>& row, const HyperPrior& prior) {
  HyperParams h;
  for (int i = 0; i < HyperParams::kCount; ++i)
    h.set(i, prior.fixed[static_cast<std::size_t>(i)]);
  h.mu_logk = parse_double(row[2]);
  h.sigma_logk = parse_double(row[3]);
  h.log10_ar = parse_double(row[4]);
  return h;
}

// --- Manifest --------------------------------------------------------------

void write_manifest(const fs::path& dir) {
  std::map<std::string, std::string> sums;
  for (auto it = fs::recursive_directory_iterator(dir);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const fs::path rel = fs::relative(it->path(), dir);
    if (rel.filename() == "manifest.json" || rel.filename() == "log.txt") continue;
    sums[rel.generic_string()] = fnv1a_file_hex(it->path().string());
  }
  json m;
  m["files"] = sums;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

// --- Desk forward model ----------------------------------------------------

Eigen::VectorXd to_vec(const DataVector& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.values.data(),
                                           static_cast<Eigen::Index>(d.size()));
}

// Shared forward-model plumbing for one experiment: the field sampler
// (with its cached factor) plus an exact count of simulate invocations.
class DeskModel {
 public:
  explicit DeskModel(const ExperimentConfig& cfg)
      : cfg_(cfg), sampler_(cfg.field), sim_(cfg.sim) {
    sim_.store_fields = false;
  }

  DataVector run_hyper(const HyperParams& h, std::uint64_t seed) const {
    const FieldRealization field =
        sampler_.generate(h, cfg_.sim.grid, seed);
    return run_field(field);
  }

  DataVector run_field(const FieldRealization& field) const {
    const SimOutput out = simulate(field, sim_);
    ++calls_;
    return observe(out, cfg_.schedule);
  }

  std::vector<double> monitor_pressure(const FieldRealization& field) const {
    const SimOutput out = simulate(field, sim_);
    ++calls_;
    return out.monitor_pressure;
  }

  FieldRealization make_field(const HyperParams& h, std::uint64_t seed) const {
    return sampler_.generate(h, cfg_.sim.grid, seed);
  }

  FieldRealization field_from_state(const HyperParams& h,
                                    const Eigen::VectorXd& state,
                                    Eigen::Index n_cells) const {
    FieldRealization f;
    f.grid = cfg_.sim.grid;
    f.hyper = h;
    f.log_k.assign(state.data(), state.data() + n_cells);
    return f;
  }

  ForwardFn forward_fn() const {
    return [this](const HyperParams& h, std::uint64_t seed) {
      return run_hyper(h, seed);
    };
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  const ExperimentConfig& cfg_;
  FieldSampler sampler_;
  SimConfig sim_;
  mutable std::atomic<std::size_t> calls_{0};
};

void check_counter(std::size_t reported, std::size_t counted) {
  if (reported != counted)
    throw std::logic_error("forward-run ledger mismatch: reported " +
                           std::to_string(reported) + ", counted " +
                           std::to_string(counted));
}

json smc_iterations_json(const SmcResult& res) {
  json arr = json::array();
  for (std::size_t t = 0; t < res.iterations.size(); ++t) {
    const Population& pop = res.iterations[t];
    json it;
    it["iteration"] = t + 1;
    if (std::isfinite(pop.epsilon))
      it["epsilon"] = pop.epsilon;
    else
      it["epsilon"] = nullptr;
    it["forward_runs"] = pop.forward_runs;
    it["acceptance_rate"] = pop.acceptance_rate;
    it["cumulative_runs"] = pop.cumulative_runs;
    arr.push_back(it);
  }
  return arr;
}

std::string smc_posterior_csv(const SmcResult& res) {
  std::string csv = std::string(kPosteriorHeader) + "\n";
  for (std::size_t t = 0; t < res.iterations.size(); ++t) {
    const Population& pop = res.iterations[t];
    for (std::size_t i = 0; i < pop.particles.size(); ++i) {
      const Particle& p = pop.particles[i];
      append_posterior_row(csv, static_cast<int>(t + 1), static_cast<int>(i),
                           p.h, p.weight, p.distance, p.seed);
    }
  }
  return csv;
}

}  // namespace

// --- Checksums -------------------------------------------------------------

std::string fnv1a_hex(const void* data, std::size_t n) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fnv1a_file_hex(const std::string& path) {
  const std::string content = read_text_file(path);
  return fnv1a_hex(content.data(), content.size());
}

// --- Config ----------------------------------------------------------------

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  ExperimentConfig cfg;
  {
    const json& g = require(j, "grid", "");
    cfg.sim.grid.nx = require_int(g, "nx", "grid.");
    cfg.sim.grid.ny = require_int(g, "ny", "grid.");
    cfg.sim.grid.nz = require_int(g, "nz", "grid.");
    cfg.sim.grid.dx = require_num(g, "dx", "grid.");
    cfg.sim.grid.dy = require_num(g, "dy", "grid.");
    cfg.sim.grid.dz = require_num(g, "dz", "grid.");
  }
  {
    const json& s = require(j, "sim", "");
    cfg.sim.injector_i = require_int(s, "injector_i", "sim.");
    cfg.sim.injector_j = require_int(s, "injector_j", "sim.");
    cfg.sim.injector_k0 = require_int(s, "injector_k0", "sim.");
    cfg.sim.injector_k1 = require_int(s, "injector_k1", "sim.");
    cfg.sim.monitor_i = require_int(s, "monitor_i", "sim.");
    cfg.sim.monitor_j = require_int(s, "monitor_j", "sim.");
    cfg.sim.monitor_k = require_int(s, "monitor_k", "sim.");
    cfg.sim.rate_m3_per_year = require_num(s, "rate_m3_per_year", "sim.");
    cfg.sim.viscosity_pa_s = require_num(s, "viscosity_pa_s", "sim.");
    cfg.sim.total_compressibility_per_pa =
        require_num(s, "total_compressibility_per_pa", "sim.");
    cfg.sim.initial_pressure_mpa = require_num(s, "initial_pressure_mpa", "sim.");
    const json& times = require(s, "report_times_years", "sim.");
    if (!times.is_array() || times.empty())
      throw ConfigError("sim.report_times_years must be a non-empty array");
    cfg.sim.report_times_years.clear();
    for (const json& t : times) cfg.sim.report_times_years.push_back(t.get<double>());
    cfg.sim.inner_steps = require_int(s, "inner_steps", "sim.");
    cfg.sim.boundary_pv_multiplier =
        require_num(s, "boundary_pv_multiplier", "sim.");
    cfg.sim.cg_rel_tol = require_num(s, "cg_rel_tol", "sim.");
  }
  {
    const json& f = require(j, "field", "");
    cfg.field.corr_len_v = require_num(f, "corr_len_v", "field.");
    const std::string conv = require(f, "variogram", "field.").get<std::string>();
    if (conv == "practical_range")
      cfg.field.convention = VariogramConvention::kPracticalRange;
    else if (conv == "plain")
      cfg.field.convention = VariogramConvention::kPlain;
    else
      throw ConfigError("field.variogram must be practical_range or plain");
    cfg.field.cell_cap = require_int(f, "cell_cap", "field.");
  }
  {
    const json& p = require(j, "prior", "");
    for (int i = 0; i < HyperParams::kCount; ++i) {
      const std::string name = HyperParams::name(i);
      const json& e = require(p, name, "prior.");
      const std::string path = "prior." + name + ".";
      const std::size_t d = static_cast<std::size_t>(i);
      cfg.prior.lower[d] = require_num(e, "lower", path);
      cfg.prior.upper[d] = require_num(e, "upper", path);
      cfg.prior.active[d] = require_bool(e, "active", path);
      cfg.prior.fixed[d] = require_num(e, "fixed", path);
    }
  }
  {
    const json& t = require(j, "truth", "");
    const std::string mode = require(t, "mode", "truth.").get<std::string>();
    if (mode == "fixed") {
      cfg.truth_fixed = true;
      const json& v = require(t, "values", "truth.");
      for (int i = 0; i < HyperParams::kCount; ++i)
        cfg.truth_values.set(i, require_num(v, HyperParams::name(i), "truth.values."));
    } else if (mode == "sample") {
      cfg.truth_fixed = false;
    } else {
      throw ConfigError("truth.mode must be fixed or sample");
    }
  }
  {
    const json& o = require(j, "observation", "");
    const json& idx = require(o, "time_indices", "observation.");
    if (!idx.is_array() || idx.empty())
      throw ConfigError("observation.time_indices must be a non-empty array");
    cfg.schedule.time_indices.clear();
    for (const json& v : idx) cfg.schedule.time_indices.push_back(v.get<int>());
    cfg.schedule.pressure = require_bool(o, "pressure", "observation.");
    cfg.schedule.saturation = require_bool(o, "saturation", "observation.");
    const json& nm = require(o, "noise", "observation.");
    cfg.noise.sigma_p = require_num(nm, "sigma_p", "observation.noise.");
    cfg.noise.sigma_s = require_num(nm, "sigma_s", "observation.noise.");
  }
  {
    const json& s = require(j, "smcabc", "");
    cfg.smcabc.n_particles = require_int(s, "n_particles", "smcabc.");
    cfg.smcabc.stop_rate = require_num(s, "stop_rate", "smcabc.");
    cfg.smcabc.max_iterations = require_int(s, "max_iterations", "smcabc.");
    cfg.smcabc.budget =
        static_cast<std::size_t>(require_int(s, "budget", "smcabc."));
    cfg.smcabc.kernel_scale = require_num(s, "kernel_scale", "smcabc.");
  }
  {
    const json& r = require(j, "rs", "");
    cfg.rs.budget = static_cast<std::size_t>(require_int(r, "budget", "rs."));
    cfg.rs.pilot_count =
        static_cast<std::size_t>(require_int(r, "pilot_count", "rs."));
    const json& snaps = require(r, "snapshot_budgets", "rs.");
    cfg.snapshot_budgets.clear();
    for (const json& b : snaps)
      cfg.snapshot_budgets.push_back(b.get<std::size_t>());
  }
  {
    const json& e = require(j, "esmda", "");
    cfg.esmda_ensemble = require_int(e, "ensemble_size", "esmda.");
    cfg.esmda_steps = require_int(e, "n_steps", "esmda.");
  }
  {
    const json& e = require(j, "modified_esmda", "");
    cfg.modified_ensemble = require_int(e, "ensemble_size", "modified_esmda.");
    cfg.modified_steps = require_int(e, "n_steps", "modified_esmda.");
  }
  {
    const json& h = require(j, "hierarchical", "");
    cfg.hier_representatives = require_int(h, "n_representatives", "hierarchical.");
    cfg.hier_ensemble = require_int(h, "ensemble_size", "hierarchical.");
    cfg.hier_steps = require_int(h, "n_steps", "hierarchical.");
  }
  {
    const json& d = require(j, "diag", "");
    cfg.prediction_members = require_int(d, "prediction_members", "diag.");
    cfg.histogram_bins = require_int(d, "histogram_bins", "diag.");
  }
  cfg.seed = static_cast<std::uint64_t>(require_int(j, "seed", ""));
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  sim.validate();
  prior.validate();
  noise.validate();
  for (int idx : schedule.time_indices)
    if (idx < 0 || static_cast<std::size_t>(idx) >= sim.report_times_years.size())
      throw ConfigError("observation.time_indices outside report schedule");
  if (!schedule.pressure && !schedule.saturation)
    throw ConfigError("observation schedule selects no channel");
  smcabc.validate();
  rs.validate();
  for (std::size_t i = 1; i < snapshot_budgets.size(); ++i)
    if (snapshot_budgets[i] <= snapshot_budgets[i - 1])
      throw ConfigError("rs.snapshot_budgets must be strictly increasing");
  esmda_alpha_schedule(esmda_steps);
  esmda_alpha_schedule(modified_steps);
  esmda_alpha_schedule(hier_steps);
  if (esmda_ensemble < 2 || modified_ensemble < 2 || hier_ensemble < 2)
    throw ConfigError("ensemble sizes must be >= 2");
  if (hier_representatives < 1)
    throw ConfigError("hierarchical.n_representatives must be >= 1");
  if (prediction_members < 2)
    throw ConfigError("diag.prediction_members must be >= 2");
  if (histogram_bins < 2) throw ConfigError("diag.histogram_bins must be >= 2");
}

// --- Truth bundle ----------------------------------------------------------

int cmd_gen_truth(const ExperimentConfig& cfg, const std::string& out_dir,
                  std::ostream& log) {
  try {
    cfg.validate();
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    HyperParams h_true;
    if (cfg.truth_fixed) {
      h_true = cfg.truth_values;
    } else {
      RngStream rng(derive_seed(cfg.seed, {kTagTruthHyper}));
      h_true = sample_prior(cfg.prior, rng);
    }

    const std::uint64_t field_seed = derive_seed(cfg.seed, {kTagTruthField});
    FieldSampler sampler(cfg.field);
    const FieldRealization field =
        sampler.generate(h_true, cfg.sim.grid, field_seed);

    SimConfig sim = cfg.sim;
    sim.store_fields = false;
    const SimOutput out = simulate(field, sim);
    const DataVector d_true = observe(out, cfg.schedule);
    RngStream noise_rng(derive_seed(cfg.seed, {kTagTruthNoise}));
    const DataVector d_obs = add_noise(d_true, cfg.noise, noise_rng);

    write_field_binary((dir / "truth_field.bin").string(), cfg.sim.grid,
                       field.log_k);

    json t;
    for (int i = 0; i < HyperParams::kCount; ++i)
      t["hyper"][HyperParams::name(i)] = h_true.get(i);
    t["field_seed"] = field_seed;
    t["master_seed"] = cfg.seed;
    t["grid"] = {{"nx", cfg.sim.grid.nx}, {"ny", cfg.sim.grid.ny},
                 {"nz", cfg.sim.grid.nz}, {"dx", cfg.sim.grid.dx},
                 {"dy", cfg.sim.grid.dy}, {"dz", cfg.sim.grid.dz}};
    t["noise"] = {{"sigma_p", cfg.noise.sigma_p}, {"sigma_s", cfg.noise.sigma_s}};
    json obs;
    obs["times"] = d_obs.times;
    json channels = json::array();
    for (Channel c : d_obs.channels)
      channels.push_back(c == Channel::kPressure ? "p" : "s");
    obs["channels"] = channels;
    obs["values_true"] = d_true.values;
    obs["values_noisy"] = d_obs.values;
    t["observations"] = obs;
    t["monitor"] = {{"times", out.report_times_years},
                    {"pressure", out.monitor_pressure},
                    {"saturation", out.monitor_saturation}};
    write_text_file(dir / "truth.json", t.dump(2) + "\n");

    std::string csv = "time,channel,value_true,value_noisy,sigma\n";
    for (std::size_t i = 0; i < d_obs.size(); ++i) {
      csv += g17(d_obs.times[i]);
      csv += ',';
      csv += d_obs.channels[i] == Channel::kPressure ? "p" : "s";
      csv += ',';
      csv += g17(d_true.values[i]);
      csv += ',';
      csv += g17(d_obs.values[i]);
      csv += ',';
      csv += g17(cfg.noise.sigma_for(d_obs.channels[i]));
      csv += '\n';
    }
    write_text_file(dir / "observations.csv", csv);

    std::string series = "time,pressure_mpa,saturation\n";
    for (std::size_t i = 0; i < out.report_times_years.size(); ++i) {
      series += g17(out.report_times_years[i]);
      series += ',';
      series += g17(out.monitor_pressure[i]);
      series += ',';
      series += g17(out.monitor_saturation[i]);
      series += '\n';
    }
    write_text_file(dir / "monitor_series.csv", series);

    write_manifest(dir);
    log << "truth bundle written to " << out_dir << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

TruthBundle TruthBundle::load(const std::string& dir) {
  const fs::path d(dir);
  const std::string text = read_text_file(d / "truth.json");
  json t;
  try {
    t = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("truth.json parse error: " + std::string(e.what()));
  }
  TruthBundle b;
  b.checksum = fnv1a_hex(text.data(), text.size());
  for (int i = 0; i < HyperParams::kCount; ++i)
    b.h_true.set(i, require_num(require(t, "hyper", "truth."), HyperParams::name(i),
                                "truth.hyper."));
  b.field_seed = require(t, "field_seed", "truth.").get<std::uint64_t>();
  GridSpec file_grid;
  b.log_k.clear();
  file_grid = read_field_binary((d / "truth_field.bin").string(), b.log_k);
  b.grid = file_grid;
  const json& obs = require(t, "observations", "truth.");
  b.d_obs.times = require(obs, "times", "truth.observations.").get<std::vector<double>>();
  b.d_true.times = b.d_obs.times;
  for (const json& c : require(obs, "channels", "truth.observations.")) {
    const std::string s = c.get<std::string>();
    if (s != "p" && s != "s") throw ConfigError("bad channel tag in truth.json");
    b.d_obs.channels.push_back(s == "p" ? Channel::kPressure
                                        : Channel::kSaturation);
  }
  b.d_true.channels = b.d_obs.channels;
  b.d_true.values =
      require(obs, "values_true", "truth.observations.").get<std::vector<double>>();
  b.d_obs.values =
      require(obs, "values_noisy", "truth.observations.").get<std::vector<double>>();
  b.d_true.validate();
  b.d_obs.validate();
  const json& mon = require(t, "monitor", "truth.");
  b.monitor_pressure =
      require(mon, "pressure", "truth.monitor.").get<std::vector<double>>();
  b.monitor_saturation =
      require(mon, "saturation", "truth.monitor.").get<std::vector<double>>();
  return b;
}

// --- cmd_run ---------------------------------------------------------------

namespace {

struct RunContext {
  const ExperimentConfig& cfg;
  const TruthBundle& truth;
  fs::path dir;
  int workers;
  std::ostream& log;
};

int run_smcabc(RunContext& ctx) {
  DeskModel model(ctx.cfg);
  SmcConfig sc = ctx.cfg.smcabc;
  sc.seed = ctx.cfg.seed;
  sc.workers = ctx.workers;
  const SmcResult res = smc_abc(ctx.cfg.prior, model.forward_fn(),
                                ctx.truth.d_obs, ctx.cfg.noise, sc);
  check_counter(res.forward_runs, model.calls());

  write_text_file(ctx.dir / "posterior.csv", smc_posterior_csv(res));
  json ledger;
  ledger["method"] = "smcabc";
  ledger["budget"] = sc.budget;
  ledger["forward_runs"] = res.forward_runs;
  ledger["simulate_calls"] = model.calls();
  ledger["exhausted"] = res.budget_exhausted;
  ledger["iterations"] = smc_iterations_json(res);
  write_text_file(ctx.dir / "ledger.json", ledger.dump(2) + "\n");
  return res.budget_exhausted ? kExitBudget : kExitOk;
}

int run_rs(RunContext& ctx) {
  DeskModel model(ctx.cfg);
  RsConfig rc = ctx.cfg.rs;
  rc.seed = ctx.cfg.seed;
  rc.workers = ctx.workers;
  const std::vector<double> r_diag =
      noise_variances(ctx.truth.d_obs, ctx.cfg.noise);
  const RsResult res = rejection_sampling(ctx.cfg.prior, model.forward_fn(),
                                          ctx.truth.d_obs, r_diag, rc);
  check_counter(res.forward_runs, model.calls());

  // The distance column carries the acceptance statistic of the method;
  // for rejection sampling that is the log-likelihood.
  std::string csv = std::string(kPosteriorHeader) + "\n";
  const double w = res.accepted.empty()
                       ? 0.0
                       : 1.0 / static_cast<double>(res.accepted.size());
  for (std::size_t i = 0; i < res.accepted.size(); ++i) {
    const RsSample& s = res.accepted[i];
    append_posterior_row(csv, 0, static_cast<int>(i), s.h, w, s.log_likelihood,
                         s.seed);
  }
  write_text_file(ctx.dir / "posterior.csv", csv);

  fs::create_directories(ctx.dir / "snapshots");
  json snap_list = json::array();
  for (std::size_t budget : ctx.cfg.snapshot_budgets) {
    if (budget > rc.budget) continue;
    std::size_t count = 0;
    for (const RsSample& s : res.accepted)
      if (s.trial < budget) ++count;
    if (count == 0) continue;
    std::string snap = std::string(kPosteriorHeader) + "\n";
    const double sw = 1.0 / static_cast<double>(count);
    int row = 0;
    for (const RsSample& s : res.accepted)
      if (s.trial < budget)
        append_posterior_row(snap, 0, row++, s.h, sw, s.log_likelihood, s.seed);
    char name[48];
    std::snprintf(name, sizeof(name), "snapshot_%09zu.csv", budget);
    write_text_file(ctx.dir / "snapshots" / name, snap);
    snap_list.push_back({{"budget", budget}, {"accepted", count}});
  }

  json ledger;
  ledger["method"] = "rs";
  ledger["budget"] = rc.budget;
  ledger["pilot_count"] = res.pilot_count;
  ledger["forward_runs"] = res.forward_runs;
  ledger["simulate_calls"] = model.calls();
  ledger["ln_bound"] = res.ln_bound;
  ledger["bound_violations"] = res.bound_violations;
  ledger["accepted"] = res.accepted.size();
  ledger["snapshots"] = snap_list;
  write_text_file(ctx.dir / "ledger.json", ledger.dump(2) + "\n");
  return kExitOk;
}

void write_ensemble_dir(const fs::path& rep_dir, const GridSpec& grid,
                        const Eigen::MatrixXd& states, Eigen::Index n_cells) {
  fs::create_directories(rep_dir);
  std::vector<double> buf(static_cast<std::size_t>(n_cells));
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    std::copy(states.col(j).data(), states.col(j).data() + n_cells, buf.begin());
    char name[32];
    std::snprintf(name, sizeof(name), "member-%04d.bin", static_cast<int>(j));
    write_field_binary((rep_dir / name).string(), grid, buf);
  }
}

std::string representatives_csv(const std::vector<HyperParams>& reps,
                                const std::vector<int>& particles,
                                const std::vector<double>& weights,
                                const std::vector<double>& distances,
                                const std::vector<std::uint64_t>& seeds,
                                int iteration) {
  std::string csv = std::string(kPosteriorHeader) + ",representative\n";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    std::string row;
    append_posterior_row(row, iteration, particles[i], reps[i], weights[i],
                         distances[i], seeds[i]);
    row.back() = ',';  // replace newline, then append the flag
    csv += row + "1\n";
  }
  return csv;
}

// Field-derived per-member hyperparameter rows for ensemble methods.
std::string ensemble_posterior_csv(const Eigen::MatrixXd& states,
                                   Eigen::Index n_cells, double fixed_ar,
                                   bool ar_in_state,
                                   const std::vector<std::uint64_t>& seeds) {
  std::string csv = std::string(kPosteriorHeader) + "\n";
  const double w = 1.0 / static_cast<double>(states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const auto field = states.col(j).head(n_cells);
    const double mean = field.mean();
    const double sd = std::sqrt((field.array() - mean).square().sum() /
                                static_cast<double>(n_cells - 1));
    HyperParams h;
    h.mu_logk = mean;
    h.sigma_logk = sd;
    h.log10_ar = ar_in_state ? states(n_cells, j) : fixed_ar;
    append_posterior_row(csv, 0, static_cast<int>(j), h, w, 0.0,
                         seeds[static_cast<std::size_t>(j)]);
  }
  return csv;
}

int run_esmda(RunContext& ctx) {
  DeskModel model(ctx.cfg);
  const GridSpec& grid = ctx.cfg.sim.grid;
  const Eigen::Index n_cells = static_cast<Eigen::Index>(grid.cell_count());
  const int ne = ctx.cfg.esmda_ensemble;
  const HyperParams h = ctx.truth.h_true;

  std::vector<std::uint64_t> member_seeds(static_cast<std::size_t>(ne));
  for (int j = 0; j < ne; ++j)
    member_seeds[static_cast<std::size_t>(j)] =
        derive_seed(ctx.cfg.seed, {kTagEsmdaBuild, static_cast<std::uint64_t>(j)});
  Eigen::MatrixXd init(n_cells, ne);
  parallel_for(static_cast<std::size_t>(ne), ctx.workers, [&](std::size_t j) {
    const FieldRealization f = model.make_field(h, member_seeds[j]);
    init.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(f.log_k.data(), n_cells);
  });

  EsmdaConfig ec;
  ec.alphas = esmda_alpha_schedule(ctx.cfg.esmda_steps);
  ec.workers = ctx.workers;
  ec.seed = ctx.cfg.seed;
  const std::vector<double> var = noise_variances(ctx.truth.d_obs, ctx.cfg.noise);
  const Eigen::VectorXd r_diag = Eigen::Map<const Eigen::VectorXd>(
      var.data(), static_cast<Eigen::Index>(var.size()));
  auto fwd = [&](const Eigen::VectorXd& state, int) {
    return to_vec(model.run_field(model.field_from_state(h, state, n_cells)));
  };
  const EsmdaRunResult run =
      esmda_run(std::move(init), fwd, to_vec(ctx.truth.d_obs), r_diag, ec);
  check_counter(run.forward_runs, model.calls());

  write_text_file(ctx.dir / "posterior.csv",
                  ensemble_posterior_csv(run.states, n_cells, h.log10_ar,
                                         false, member_seeds));
  write_text_file(
      ctx.dir / "representatives.csv",
      representatives_csv({h}, {0}, {1.0}, {0.0}, {ctx.truth.field_seed}, 0));
  write_ensemble_dir(ctx.dir / "ensembles" / "rep-00", grid, run.states, n_cells);

  json ledger;
  ledger["method"] = "esmda";
  ledger["ensemble_size"] = ne;
  ledger["steps"] = ctx.cfg.esmda_steps;
  ledger["forward_runs"] = run.forward_runs;
  ledger["simulate_calls"] = model.calls();
  write_text_file(ctx.dir / "ledger.json", ledger.dump(2) + "\n");
  return kExitOk;
}

int run_hierarchical(RunContext& ctx) {
  DeskModel model(ctx.cfg);
  const GridSpec& grid = ctx.cfg.sim.grid;
  const Eigen::Index n_cells = static_cast<Eigen::Index>(grid.cell_count());

  HierarchicalConfig hc;
  hc.smc = ctx.cfg.smcabc;
  hc.alphas = esmda_alpha_schedule(ctx.cfg.hier_steps);
  hc.n_representatives = ctx.cfg.hier_representatives;
  hc.ensemble_size = ctx.cfg.hier_ensemble;
  hc.workers = ctx.workers;
  hc.seed = ctx.cfg.seed;

  HierarchicalOps ops;
  ops.build_ensemble = [&](const HyperParams& h, int ne, std::uint64_t seed) {
    Eigen::MatrixXd states(n_cells, ne);
    parallel_for(static_cast<std::size_t>(ne), ctx.workers, [&](std::size_t j) {
      const FieldRealization f =
          model.make_field(h, derive_seed(seed, {kTagHierMember, j}));
      states.col(static_cast<Eigen::Index>(j)) =
          Eigen::Map<const Eigen::VectorXd>(f.log_k.data(), n_cells);
    });
    return states;
  };
  ops.forward = [&](const HyperParams& h, const Eigen::VectorXd& state, int) {
    return to_vec(model.run_field(model.field_from_state(h, state, n_cells)));
  };

  const HierarchicalResult res =
      hierarchical_run(ctx.cfg.prior, model.forward_fn(), ctx.truth.d_obs,
                       ctx.cfg.noise, ops, hc);
  check_counter(res.forward_runs, model.calls());

  write_text_file(ctx.dir / "posterior.csv", smc_posterior_csv(res.smc));

  // Match representatives back to final-population particles to carry
  // their weight, distance, and seed columns.
  const Population& final_pop = res.smc.iterations.back();
  std::vector<int> particles;
  std::vector<double> weights, dists;
  std::vector<std::uint64_t> seeds;
  for (const HyperParams& rep : res.representatives) {
    int match = 0;
    for (std::size_t i = 0; i < final_pop.particles.size(); ++i) {
      const HyperParams& ph = final_pop.particles[i].h;
      bool same = true;
      for (int d = 0; d < HyperParams::kCount; ++d)
        same = same && ph.get(d) == rep.get(d);
      if (same) {
        match = static_cast<int>(i);
        break;
      }
    }
    particles.push_back(match);
    weights.push_back(final_pop.particles[static_cast<std::size_t>(match)].weight);
    dists.push_back(final_pop.particles[static_cast<std::size_t>(match)].distance);
    seeds.push_back(final_pop.particles[static_cast<std::size_t>(match)].seed);
  }
  write_text_file(ctx.dir / "representatives.csv",
                  representatives_csv(res.representatives, particles, weights,
                                      dists, seeds,
                                      static_cast<int>(res.smc.iterations.size())));

  for (std::size_t r = 0; r < res.posteriors.size(); ++r) {
    char name[16];
    std::snprintf(name, sizeof(name), "rep-%02d", static_cast<int>(r));
    write_ensemble_dir(ctx.dir / "ensembles" / name, grid,
                       res.posteriors[r].states, n_cells);
  }

  json ledger;
  ledger["method"] = "hierarchical";
  ledger["budget"] = hc.smc.budget;
  ledger["smc_runs"] = res.smc_runs;
  ledger["esmda_runs"] = res.esmda_runs;
  ledger["forward_runs"] = res.forward_runs;
  ledger["simulate_calls"] = model.calls();
  ledger["exhausted"] = res.smc.budget_exhausted;
  ledger["n_representatives"] = res.representatives.size();
  ledger["ensemble_size"] = hc.ensemble_size;
  ledger["steps"] = ctx.cfg.hier_steps;
  ledger["iterations"] = smc_iterations_json(res.smc);
  write_text_file(ctx.dir / "ledger.json", ledger.dump(2) + "\n");
  return res.smc.budget_exhausted ? kExitBudget : kExitOk;
}

int run_modified_esmda(RunContext& ctx) {
  DeskModel model(ctx.cfg);
  const GridSpec& grid = ctx.cfg.sim.grid;
  const Eigen::Index n_cells = static_cast<Eigen::Index>(grid.cell_count());

  ModifiedEsmdaConfig mc;
  mc.esmda.alphas = esmda_alpha_schedule(ctx.cfg.modified_steps);
  mc.esmda.workers = ctx.workers;
  mc.esmda.seed = ctx.cfg.seed;
  mc.ensemble_size = ctx.cfg.modified_ensemble;

  ModifiedEsmdaOps ops;
  ops.build_member = [&](const HyperParams& h, std::uint64_t seed) {
    const FieldRealization f = model.make_field(h, seed);
    Eigen::VectorXd state(n_cells + 1);
    state.head(n_cells) =
        Eigen::Map<const Eigen::VectorXd>(f.log_k.data(), n_cells);
    state[n_cells] = h.log10_ar;
    return state;
  };
  ops.forward = [&](const Eigen::VectorXd& state, int) {
    HyperParams h;
    for (int i = 0; i < HyperParams::kCount; ++i)
      h.set(i, ctx.cfg.prior.fixed[static_cast<std::size_t>(i)]);
    h.log10_ar = state[n_cells];
    return to_vec(model.run_field(model.field_from_state(h, state, n_cells)));
  };

  const std::vector<double> var = noise_variances(ctx.truth.d_obs, ctx.cfg.noise);
  const Eigen::VectorXd r_diag = Eigen::Map<const Eigen::VectorXd>(
      var.data(), static_cast<Eigen::Index>(var.size()));
  const ModifiedEsmdaResult res = modified_esmda_run(
      ctx.cfg.prior, ops, to_vec(ctx.truth.d_obs), r_diag, mc);
  check_counter(res.forward_runs, model.calls());

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(mc.ensemble_size));
  for (std::size_t j = 0; j < seeds.size(); ++j)
    seeds[j] = derive_seed(mc.esmda.seed, {502, j});  // matches the build tag
  write_text_file(ctx.dir / "posterior.csv",
                  ensemble_posterior_csv(res.states, n_cells, 0.0, true, seeds));

  json ledger;
  ledger["method"] = "modified-esmda";
  ledger["ensemble_size"] = mc.ensemble_size;
  ledger["steps"] = ctx.cfg.modified_steps;
  ledger["forward_runs"] = res.forward_runs;
  ledger["simulate_calls"] = model.calls();
  write_text_file(ctx.dir / "ledger.json", ledger.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg, const std::string& method,
            const std::string& truth_dir, const std::string& out_dir,
            int workers, std::ostream& log) {
  try {
    cfg.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    const TruthBundle truth = TruthBundle::load(truth_dir);
    if (!(truth.grid == cfg.sim.grid))
      throw TruthMismatch("truth bundle grid differs from config grid");
    fs::create_directories(out_dir);
    RunContext ctx{cfg, truth, fs::path(out_dir), workers, log};

    int code;
    if (method == "smcabc")
      code = run_smcabc(ctx);
    else if (method == "rs")
      code = run_rs(ctx);
    else if (method == "esmda")
      code = run_esmda(ctx);
    else if (method == "hierarchical")
      code = run_hierarchical(ctx);
    else if (method == "modified-esmda")
      code = run_modified_esmda(ctx);
    else
      throw ConfigError("unknown method: " + method);

    json run;
    run["method"] = method;
    run["seed"] = cfg.seed;
    run["workers"] = workers;
    run["truth_checksum"] = truth.checksum;
    run["exit_code"] = code;
    write_text_file(ctx.dir / "run.json", run.dump(2) + "\n");
    write_manifest(ctx.dir);
    log << method << " run written to " << out_dir << "\n";
    return code;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TruthMismatch& e) {
    log << "truth mismatch: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BudgetError& e) {
    log << "budget exhausted: " << e.what() << "\n";
    return kExitBudget;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

// --- cmd_diag --------------------------------------------------------------

namespace {

struct LoadedRun {
  std::string name;
  fs::path dir;
  std::string method;
  std::string truth_checksum;
  std::uint64_t run_seed = 0;
  json ledger;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun r;
  r.dir = dir;
  r.name = dir.filename().string();
  if (r.name.empty()) r.name = dir.parent_path().filename().string();
  const json run = json::parse(read_text_file(dir / "run.json"));
  r.method = require(run, "method", "run.").get<std::string>();
  r.truth_checksum = require(run, "truth_checksum", "run.").get<std::string>();
  r.run_seed = require(run, "seed", "run.").get<std::uint64_t>();
  r.ledger = json::parse(read_text_file(dir / "ledger.json"));
  return r;
}

// Builds the sample snapshots of a run for the convergence curve.
std::vector<SnapshotSamples> run_snapshots(const LoadedRun& run,
                                           const HyperPrior& prior) {
  std::vector<SnapshotSamples> snaps;
  const auto rows = read_csv(run.dir / "posterior.csv");
  if (run.method == "smcabc" || run.method == "hierarchical") {
    std::map<int, SnapshotSamples> by_iter;
    for (const auto& row : rows) {
      const int iter = static_cast<int>(parse_u64(row[0]));
      SnapshotSamples& s = by_iter[iter];
      s.samples.push_back(row_hyper(row, prior));
      s.weights.push_back(parse_double(row[5]));
    }
    for (const json& it : require(run.ledger, "iterations", "ledger.")) {
      const int iter = it.at("iteration").get<int>();
      auto found = by_iter.find(iter);
      if (found == by_iter.end()) continue;
      found->second.run_count = it.at("cumulative_runs").get<std::size_t>();
      snaps.push_back(std::move(found->second));
    }
  } else if (run.method == "rs") {
    for (const json& s : require(run.ledger, "snapshots", "ledger.")) {
      const std::size_t budget = s.at("budget").get<std::size_t>();
      char name[48];
      std::snprintf(name, sizeof(name), "snapshot_%09zu.csv", budget);
      SnapshotSamples snap;
      snap.run_count = budget;
      for (const auto& row : read_csv(run.dir / "snapshots" / name))
        snap.samples.push_back(row_hyper(row, prior));
      snaps.push_back(std::move(snap));
    }
  } else {
    SnapshotSamples snap;
    snap.run_count =
        require(run.ledger, "forward_runs", "ledger.").get<std::size_t>();
    for (const auto& row : rows) snap.samples.push_back(row_hyper(row, prior));
    snaps.push_back(std::move(snap));
  }
  return snaps;
}

SnapshotSamples reference_samples(const LoadedRun& run, const HyperPrior& prior) {
  std::vector<SnapshotSamples> snaps = run_snapshots(run, prior);
  if (snaps.empty()) throw ConfigError("reference run has no samples");
  return snaps.back();
}

struct EnsembleOnDisk {
  std::vector<HyperParams> rep_hyper;           // per rep directory
  std::vector<std::vector<std::string>> files;  // member files per rep
};

EnsembleOnDisk scan_ensembles(const LoadedRun& run, const HyperPrior& prior) {
  EnsembleOnDisk out;
  const auto rep_rows = read_csv(run.dir / "representatives.csv");
  const fs::path base = run.dir / "ensembles";
  for (std::size_t r = 0;; ++r) {
    char name[16];
    std::snprintf(name, sizeof(name), "rep-%02d", static_cast<int>(r));
    const fs::path rep_dir = base / name;
    if (!fs::exists(rep_dir)) break;
    if (r >= rep_rows.size())
      throw ConfigError("ensembles and representatives.csv disagree");
    out.rep_hyper.push_back(row_hyper(rep_rows[r], prior));
    std::vector<std::string> files;
    for (auto& e : fs::directory_iterator(rep_dir))
      if (e.is_regular_file() && e.path().extension() == ".bin")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    out.files.push_back(std::move(files));
  }
  return out;
}

}  // namespace

int cmd_diag(const ExperimentConfig& cfg,
             const std::vector<std::string>& run_dirs,
             const std::string& reference_dir, const std::string& out_dir,
             int workers, std::ostream& log) {
  try {
    cfg.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (run_dirs.empty()) throw ConfigError("no run directories given");
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    const LoadedRun ref_run = load_run(reference_dir);
    std::vector<LoadedRun> runs;
    for (const std::string& rd : run_dirs) runs.push_back(load_run(rd));
    for (const LoadedRun& r : runs)
      if (r.truth_checksum != ref_run.truth_checksum)
        throw TruthMismatch("run " + r.name +
                            " was built against a different truth bundle");

    const SnapshotSamples reference = reference_samples(ref_run, cfg.prior);
    DeskModel model(cfg);
    std::size_t simulate_calls = 0;

    for (const LoadedRun& run : runs) {
      const std::vector<SnapshotSamples> snaps = run_snapshots(run, cfg.prior);
      const std::vector<ConvergencePoint> curve =
          convergence_curve(snaps, reference, cfg.prior, cfg.histogram_bins);
      std::string csv = "parameter,run_count,js\n";
      for (int d : cfg.prior.active_indices())
        for (const ConvergencePoint& pt : curve) {
          csv += HyperParams::name(d);
          csv += ',';
          csv += std::to_string(pt.run_count);
          csv += ',';
          csv += g17(pt.js[static_cast<std::size_t>(d)]);
          csv += '\n';
        }
      write_text_file(dir / (run.name + "_metrics.csv"), csv);

      if (!fs::exists(run.dir / "ensembles")) continue;

      // Posterior-prediction percentiles and field maps. The prediction
      // simulations are attributed to this diagnostics stage, not to the
      // run ledger being analyzed.
      const EnsembleOnDisk ens = scan_ensembles(run, cfg.prior);
      std::vector<std::pair<std::size_t, std::size_t>> all_members;
      for (std::size_t r = 0; r < ens.files.size(); ++r)
        for (std::size_t m = 0; m < ens.files[r].size(); ++m)
          all_members.push_back({r, m});
      if (all_members.empty())
        throw ConfigError("run " + run.name + " has empty ensembles");

      const std::size_t want = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.prediction_members), all_members.size());
      std::vector<std::pair<std::size_t, std::size_t>> picked;
      for (std::size_t i = 0; i < want; ++i)
        picked.push_back(all_members[i * all_members.size() / want]);

      // Bands live in measurement space: each member series carries its own
      // observation-noise draw.
      std::vector<std::vector<double>> series(picked.size());
      parallel_for(picked.size(), workers, [&](std::size_t i) {
        const auto [r, m] = picked[i];
        std::vector<double> log_k;
        const GridSpec g = read_field_binary(ens.files[r][m], log_k);
        const FieldRealization f{g, log_k, ens.rep_hyper[r]};
        series[i] = model.monitor_pressure(f);
        RngStream noise(derive_seed(cfg.seed, {kTagDiagNoise, i}));
        for (double& v : series[i]) v += cfg.noise.sigma_p * noise.normal();
      });
      simulate_calls += picked.size();

      const PercentileCurves pct = series_percentiles(series);
      std::string pcsv = "time,p10,p50,p90\n";
      for (std::size_t t = 0; t < cfg.sim.report_times_years.size(); ++t) {
        pcsv += g17(cfg.sim.report_times_years[t]);
        pcsv += ',';
        pcsv += g17(pct.curves[0][t]);
        pcsv += ',';
        pcsv += g17(pct.curves[1][t]);
        pcsv += ',';
        pcsv += g17(pct.curves[2][t]);
        pcsv += '\n';
      }
      write_text_file(dir / (run.name + "_percentiles.csv"), pcsv);

      std::vector<std::vector<std::vector<double>>> posterior_fields(
          ens.files.size());
      for (std::size_t r = 0; r < ens.files.size(); ++r) {
        posterior_fields[r].resize(ens.files[r].size());
        for (std::size_t m = 0; m < ens.files[r].size(); ++m)
          read_field_binary(ens.files[r][m], posterior_fields[r][m]);
      }
      // Fresh prior fields of the same size budget, no simulations needed.
      std::vector<std::vector<double>> prior_fields;
      for (std::size_t r = 0; r < ens.files.size(); ++r)
        for (std::size_t m = 0; m < ens.files[r].size(); ++m) {
          const FieldRealization f = model.make_field(
              ens.rep_hyper[r],
              derive_seed(cfg.seed, {kTagDiagPrior, r, m}));
          prior_fields.push_back(f.log_k);
        }
      const FieldStats stats =
          field_posterior_stats(posterior_fields, prior_fields);
      write_field_binary((dir / (run.name + "_mean.bin")).string(),
                         cfg.sim.grid, stats.mean);
      write_field_binary((dir / (run.name + "_variance.bin")).string(),
                         cfg.sim.grid, stats.variance);
      write_field_binary((dir / (run.name + "_reduction.bin")).string(),
                         cfg.sim.grid, stats.variance_reduction);
    }

    check_counter(simulate_calls, model.calls());
    json ledger;
    ledger["simulate_calls"] = simulate_calls;
    ledger["reference"] = ref_run.name;
    write_text_file(dir / "ledger.json", ledger.dump(2) + "\n");
    write_manifest(dir);
    log << "diagnostics written to " << out_dir << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TruthMismatch& e) {
    log << "truth mismatch: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace hida
