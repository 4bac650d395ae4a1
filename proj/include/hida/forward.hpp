#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hida/geomodel.hpp"
#include "hida/rng.hpp"

namespace hida {

struct SolverDiverged : NumericalError {
  using NumericalError::NumericalError;
};
struct CflViolation : NumericalError {
  using NumericalError::NumericalError;
};
struct DegenerateRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Simulation controls for the desk-scale forward model: single-phase
// slightly-compressible Darcy flow (7-point finite volumes, implicit in
// time) plus a passive tracer advected by first-order upwinding. The
// "saturation" observable is the injected-fluid fraction.
struct SimConfig {
  GridSpec grid;

  // Injector column (i,j), perforated over layers [injector_k0, injector_k1].
  int injector_i = 8, injector_j = 8;
  int injector_k0 = 0, injector_k1 = 3;
  // Monitoring cell; layer 0 is the top layer.
  int monitor_i = 10, monitor_j = 9, monitor_k = 0;

  double rate_m3_per_year = 3.0e5;            // injected volume per year
  double viscosity_pa_s = 5.0e-4;
  double total_compressibility_per_pa = 4.0e-9;
  double initial_pressure_mpa = 15.5;

  std::vector<double> report_times_years = {1, 4, 7, 10, 13, 16, 20, 23, 26, 30};
  int inner_steps = 2;  // implicit pressure steps per report interval

  // Pore-volume multiplier on lateral-boundary cells, standing in for a
  // large surrounding region that provides pressure support.
  double boundary_pv_multiplier = 1.0e3;

  double cg_rel_tol = 1.0e-8;
  bool cfl_substeps = true;  // disable to surface CflViolation instead

  bool store_fields = true;  // keep full per-report-time fields in the output

  void validate() const;
};

struct SimOutput {
  std::vector<double> report_times_years;
  // Full fields per report time (empty when store_fields is off).
  std::vector<std::vector<double>> pressure_fields;    // MPa
  std::vector<std::vector<double>> saturation_fields;  // fraction
  std::vector<double> monitor_pressure;    // MPa
  std::vector<double> monitor_saturation;  // fraction
};

SimOutput simulate(const FieldRealization& m, const SimConfig& cfg);

// Per-cell pore volume in m^3, including the boundary multiplier.
std::vector<double> pore_volumes(const FieldRealization& m, const SimConfig& cfg);

enum class Channel : std::uint8_t { kPressure = 0, kSaturation = 1 };

// Flat observation vector with per-entry channel tags and times.
struct DataVector {
  std::vector<double> values;
  std::vector<Channel> channels;
  std::vector<double> times;  // years

  std::size_t size() const { return values.size(); }
  void validate() const;
  bool same_layout(const DataVector& other) const;
};

struct NoiseModel {
  double sigma_p = 0.1;   // MPa
  double sigma_s = 0.05;  // saturation fraction
  void validate() const;
  double sigma_for(Channel c) const {
    return c == Channel::kPressure ? sigma_p : sigma_s;
  }
};

struct ObservationSchedule {
  std::vector<int> time_indices;  // indices into report_times_years
  bool pressure = true;
  bool saturation = true;
};

// Concatenates monitor pressure then monitor saturation at the scheduled
// report-time indices.
DataVector observe(const SimOutput& out, const ObservationSchedule& schedule);

DataVector add_noise(const DataVector& d, const NoiseModel& nm, RngStream& rng);

// Measurement-error variances matching a DataVector's channel layout.
std::vector<double> noise_variances(const DataVector& d, const NoiseModel& nm);

struct ConvergenceErrors {
  double delta_p = 0.0;
  double delta_s = 0.0;
};

// Range-normalized pressure error and epsilon-regularized saturation
// error between two runs of the solver, averaged over cells and report
// times. `fine` acts as the reference.
ConvergenceErrors self_convergence_errors(const SimOutput& coarse,
                                          const SimOutput& fine,
                                          double epsilon = 0.025);

}  // namespace hida
