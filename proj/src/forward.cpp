#include "hida/forward.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <string>

namespace hida {
namespace {

constexpr double kSecondsPerYear = 365.25 * 86400.0;
constexpr double kM2PerMillidarcy = 9.869233e-16;
constexpr double kPaPerMPa = 1.0e6;

using SpMat = Eigen::SparseMatrix<double>;

// Exact-factor preconditioner: CG keeps the residual-tolerance contract
// and the divergence error path, but converges in O(1) iterations, which
// beats incomplete factorizations by an order of magnitude at this size.
class LdltPreconditioner {
 public:
  using StorageIndex = int;
  enum {
    ColsAtCompileTime = Eigen::Dynamic,
    MaxColsAtCompileTime = Eigen::Dynamic
  };
  LdltPreconditioner() = default;
  LdltPreconditioner& analyzePattern(const SpMat& m) {
    ldlt_.analyzePattern(m);
    return *this;
  }
  LdltPreconditioner& factorize(const SpMat& m) {
    ldlt_.factorize(m);
    return *this;
  }
  LdltPreconditioner& compute(const SpMat& m) {
    ldlt_.compute(m);
    return *this;
  }
  template <typename Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    return ldlt_.solve(b);
  }
  Eigen::ComputationInfo info() const { return ldlt_.info(); }

 private:
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

using Solver = Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                                        LdltPreconditioner>;

struct Face {
  int a;
  int b;
  double trans;  // m^3 / (Pa s)
};

}  // namespace

void SimConfig::validate() const {
  grid.validate();
  auto in_plane = [&](int i, int j) {
    return i >= 0 && i < grid.nx && j >= 0 && j < grid.ny;
  };
  if (!in_plane(injector_i, injector_j))
    throw IndexOutOfRange("injector column outside grid");
  if (injector_k0 < 0 || injector_k1 >= grid.nz || injector_k0 > injector_k1)
    throw IndexOutOfRange("injector perforation range invalid");
  if (!in_plane(monitor_i, monitor_j) || monitor_k < 0 || monitor_k >= grid.nz)
    throw IndexOutOfRange("monitor cell outside grid");
  if (!(rate_m3_per_year >= 0.0))
    throw std::invalid_argument("injection rate must be >= 0");
  if (!(viscosity_pa_s > 0.0)) throw std::invalid_argument("viscosity must be > 0");
  if (!(total_compressibility_per_pa > 0.0))
    throw std::invalid_argument("compressibility must be > 0");
  if (report_times_years.empty())
    throw std::invalid_argument("report schedule is empty");
  double prev = 0.0;
  for (double t : report_times_years) {
    if (!(t > prev)) throw std::invalid_argument("report times must increase");
    prev = t;
  }
  if (inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  if (!(boundary_pv_multiplier >= 1.0))
    throw std::invalid_argument("boundary_pv_multiplier must be >= 1");
  if (!(cg_rel_tol > 0.0)) throw std::invalid_argument("cg_rel_tol must be > 0");
}

std::vector<double> pore_volumes(const FieldRealization& m, const SimConfig& cfg) {
  const GridSpec& g = cfg.grid;
  const double base = m.hyper.porosity * g.dx * g.dy * g.dz;
  std::vector<double> pv(g.cell_count());
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const bool lateral_boundary =
            i == 0 || i == g.nx - 1 || j == 0 || j == g.ny - 1;
        pv[g.index(i, j, k)] =
            base * (lateral_boundary ? cfg.boundary_pv_multiplier : 1.0);
      }
  return pv;
}

SimOutput simulate(const FieldRealization& m, const SimConfig& cfg) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  if (!(m.grid == g)) throw ShapeMismatch("field grid does not match config grid");
  const int n = static_cast<int>(g.cell_count());
  if (static_cast<int>(m.log_k.size()) != n)
    throw ShapeMismatch("field size does not match grid");

  // Permeabilities in m^2; the vertical value is scaled by the anisotropy
  // ratio, which is the only way log10_ar enters the flow problem.
  const double ar = m.hyper.anisotropy_ratio();
  std::vector<double> kh(n);
  for (int c = 0; c < n; ++c) kh[c] = std::exp(m.log_k[c]) * kM2PerMillidarcy;

  const double mu = cfg.viscosity_pa_s;
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(3) * n);
  auto harmonic = [](double ka, double kb) { return 2.0 * ka * kb / (ka + kb); };
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int c = static_cast<int>(g.index(i, j, k));
        if (i + 1 < g.nx) {
          const int d = static_cast<int>(g.index(i + 1, j, k));
          faces.push_back({c, d, g.dy * g.dz / (mu * g.dx) * harmonic(kh[c], kh[d])});
        }
        if (j + 1 < g.ny) {
          const int d = static_cast<int>(g.index(i, j + 1, k));
          faces.push_back({c, d, g.dx * g.dz / (mu * g.dy) * harmonic(kh[c], kh[d])});
        }
        if (k + 1 < g.nz) {
          const int d = static_cast<int>(g.index(i, j, k + 1));
          faces.push_back(
              {c, d, g.dx * g.dy / (mu * g.dz) * harmonic(ar * kh[c], ar * kh[d])});
        }
      }

  const std::vector<double> pv = pore_volumes(m, cfg);
  const double ct = cfg.total_compressibility_per_pa;

  // Injection split across perforated layers in proportion to layer
  // permeability-thickness.
  std::vector<double> q(n, 0.0);
  {
    const double q_total = cfg.rate_m3_per_year / kSecondsPerYear;
    double weight_sum = 0.0;
    for (int k = cfg.injector_k0; k <= cfg.injector_k1; ++k)
      weight_sum += kh[g.index(cfg.injector_i, cfg.injector_j, k)] * g.dz;
    for (int k = cfg.injector_k0; k <= cfg.injector_k1; ++k) {
      const std::size_t c = g.index(cfg.injector_i, cfg.injector_j, k);
      q[c] = q_total * kh[c] * g.dz / weight_sum;
    }
  }

  // Base matrix holds the transmissibility part; per-dt systems add the
  // accumulation term on the diagonal.
  SpMat base(n, n);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(faces.size() * 4 + n);
    for (int c = 0; c < n; ++c) trips.emplace_back(c, c, 0.0);
    for (const Face& f : faces) {
      trips.emplace_back(f.a, f.a, f.trans);
      trips.emplace_back(f.b, f.b, f.trans);
      trips.emplace_back(f.a, f.b, -f.trans);
      trips.emplace_back(f.b, f.a, -f.trans);
    }
    base.setFromTriplets(trips.begin(), trips.end());
    base.makeCompressed();
  }

  std::map<double, std::unique_ptr<Solver>> solvers;
  std::map<double, SpMat> systems;
  auto solver_for = [&](double dt_s) -> Solver& {
    auto it = solvers.find(dt_s);
    if (it != solvers.end()) return *it->second;
    SpMat a = base;
    for (int c = 0; c < n; ++c) a.coeffRef(c, c) += pv[c] * ct / dt_s;
    auto [sit, inserted] = systems.emplace(dt_s, std::move(a));
    auto solver = std::make_unique<Solver>();
    solver->setTolerance(cfg.cg_rel_tol);
    solver->setMaxIterations(10L * n);
    solver->compute(sit->second);
    if (solver->info() != Eigen::Success)
      throw SolverDiverged("pressure system factorization failed");
    return *solvers.emplace(dt_s, std::move(solver)).first->second;
  };

  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, cfg.initial_pressure_mpa * kPaPerMPa);
  std::vector<double> sat(n, 0.0);
  std::vector<double> flux(faces.size());
  std::vector<double> inflow(n);
  std::vector<double> acc(n);

  SimOutput out;
  out.report_times_years = cfg.report_times_years;
  const std::size_t n_rep = cfg.report_times_years.size();
  if (cfg.store_fields) {
    out.pressure_fields.reserve(n_rep);
    out.saturation_fields.reserve(n_rep);
  }
  out.monitor_pressure.reserve(n_rep);
  out.monitor_saturation.reserve(n_rep);
  const std::size_t monitor =
      g.index(cfg.monitor_i, cfg.monitor_j, cfg.monitor_k);

  Eigen::VectorXd rhs(n);
  double t_prev_years = 0.0;
  for (std::size_t r = 0; r < n_rep; ++r) {
    const double dt_s = (cfg.report_times_years[r] - t_prev_years) /
                        cfg.inner_steps * kSecondsPerYear;
    Solver& solver = solver_for(dt_s);
    for (int step = 0; step < cfg.inner_steps; ++step) {
      for (int c = 0; c < n; ++c) rhs[c] = pv[c] * ct / dt_s * p[c] + q[c];
      Eigen::VectorXd p_new = solver.solveWithGuess(rhs, p);
      if (solver.info() != Eigen::Success || !p_new.allFinite())
        throw SolverDiverged("pressure solve did not converge within " +
                             std::to_string(10L * n) + " iterations");
      p = std::move(p_new);

      // Upwind tracer advection on the fixed end-of-step flux field. The
      // update S += dt/pv * (sum_in F (S_up - S) + q (1 - S)) keeps S in
      // [0, 1] whenever dt <= pv / (sum_in F + q), with no clipping.
      for (std::size_t f = 0; f < faces.size(); ++f)
        flux[f] = faces[f].trans * (p[faces[f].a] - p[faces[f].b]);
      std::fill(inflow.begin(), inflow.end(), 0.0);
      for (std::size_t f = 0; f < faces.size(); ++f) {
        if (flux[f] > 0.0)
          inflow[faces[f].b] += flux[f];
        else
          inflow[faces[f].a] -= flux[f];
      }
      double dt_cfl = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n; ++c) {
        const double in_rate = inflow[c] + q[c];
        if (in_rate > 0.0) dt_cfl = std::min(dt_cfl, pv[c] / in_rate);
      }
      int n_sub = 1;
      if (dt_s > dt_cfl) {
        if (!cfg.cfl_substeps)
          throw CflViolation("tracer step exceeds CFL limit and substeps are off");
        n_sub = static_cast<int>(std::ceil(dt_s / (0.99 * dt_cfl)));
      }
      const double dt_sub = dt_s / n_sub;
      for (int sub = 0; sub < n_sub; ++sub) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t f = 0; f < faces.size(); ++f) {
          const Face& fc = faces[f];
          if (flux[f] > 0.0)
            acc[fc.b] += flux[f] * (sat[fc.a] - sat[fc.b]);
          else
            acc[fc.a] -= flux[f] * (sat[fc.b] - sat[fc.a]);
        }
        for (int k = cfg.injector_k0; k <= cfg.injector_k1; ++k) {
          const std::size_t c = g.index(cfg.injector_i, cfg.injector_j, k);
          acc[c] += q[c] * (1.0 - sat[c]);
        }
        for (int c = 0; c < n; ++c) sat[c] += dt_sub * acc[c] / pv[c];
      }
    }
    t_prev_years = cfg.report_times_years[r];

    if (cfg.store_fields) {
      std::vector<double> p_mpa(n);
      for (int c = 0; c < n; ++c) p_mpa[c] = p[c] / kPaPerMPa;
      out.pressure_fields.push_back(std::move(p_mpa));
      out.saturation_fields.push_back(sat);
    }
    out.monitor_pressure.push_back(p[monitor] / kPaPerMPa);
    out.monitor_saturation.push_back(sat[monitor]);
  }
  return out;
}

void DataVector::validate() const {
  if (channels.size() != values.size() || times.size() != values.size())
    throw ShapeMismatch("data vector layout arrays disagree in length");
}

bool DataVector::same_layout(const DataVector& other) const {
  return channels == other.channels && times == other.times;
}

void NoiseModel::validate() const {
  if (!(sigma_p > 0.0) || !(sigma_s > 0.0))
    throw std::invalid_argument("noise standard deviations must be > 0");
}

DataVector observe(const SimOutput& out, const ObservationSchedule& schedule) {
  DataVector d;
  auto append = [&](Channel ch, const std::vector<double>& series) {
    for (int idx : schedule.time_indices) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= series.size())
        throw IndexOutOfRange("observation index outside report schedule");
      d.values.push_back(series[idx]);
      d.channels.push_back(ch);
      d.times.push_back(out.report_times_years[idx]);
    }
  };
  if (schedule.pressure) append(Channel::kPressure, out.monitor_pressure);
  if (schedule.saturation) append(Channel::kSaturation, out.monitor_saturation);
  return d;
}

DataVector add_noise(const DataVector& d, const NoiseModel& nm, RngStream& rng) {
  d.validate();
  nm.validate();
  DataVector noisy = d;
  for (std::size_t i = 0; i < noisy.values.size(); ++i)
    noisy.values[i] += nm.sigma_for(noisy.channels[i]) * rng.normal();
  return noisy;
}

std::vector<double> noise_variances(const DataVector& d, const NoiseModel& nm) {
  d.validate();
  nm.validate();
  std::vector<double> var(d.size());
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double s = nm.sigma_for(d.channels[i]);
    var[i] = s * s;
  }
  return var;
}

ConvergenceErrors self_convergence_errors(const SimOutput& coarse,
                                          const SimOutput& fine,
                                          double epsilon) {
  const std::size_t n_t = fine.report_times_years.size();
  if (coarse.report_times_years.size() != n_t ||
      coarse.pressure_fields.size() != n_t || fine.pressure_fields.size() != n_t ||
      coarse.saturation_fields.size() != n_t || fine.saturation_fields.size() != n_t)
    throw ShapeMismatch("runs disagree in report schedule or stored fields");
  if (n_t == 0) throw ShapeMismatch("no report times to compare");

  double sum_p = 0.0, sum_s = 0.0;
  std::size_t n_cells = 0;
  for (std::size_t t = 0; t < n_t; ++t) {
    const auto& pc = coarse.pressure_fields[t];
    const auto& pf = fine.pressure_fields[t];
    const auto& sc = coarse.saturation_fields[t];
    const auto& sf = fine.saturation_fields[t];
    n_cells = pf.size();
    if (pc.size() != n_cells || sc.size() != n_cells || sf.size() != n_cells)
      throw ShapeMismatch("field sizes disagree between runs");
    const auto [pmin, pmax] = std::minmax_element(pf.begin(), pf.end());
    const double range = *pmax - *pmin;
    if (!(range > 0.0)) {
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "pressure range vanishes at report time %g years",
                    fine.report_times_years[t]);
      throw DegenerateRange(buf);
    }
    for (std::size_t c = 0; c < n_cells; ++c) {
      sum_p += std::abs(pc[c] - pf[c]) / range;
      sum_s += std::abs(sc[c] - sf[c]) / (sf[c] + epsilon);
    }
  }
  const double denom = static_cast<double>(n_t) * static_cast<double>(n_cells);
  return {sum_p / denom, sum_s / denom};
}

}  // namespace hida
