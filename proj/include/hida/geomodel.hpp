#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hida/rng.hpp"

namespace hida {

// Base class for failures of the numerical machinery (factorizations,
// linear solves). The CLI maps these to exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CellCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FactorizationFailure : NumericalError {
  using NumericalError::NumericalError;
};

// Structured grid: cell counts and cell dimensions in meters.
// Layer k = 0 is the top layer.
struct GridSpec {
  int nx = 1, ny = 1, nz = 1;
  double dx = 1.0, dy = 1.0, dz = 1.0;

  int cell_count() const { return nx * ny * nz; }
  // Flat index, x-fastest.
  int index(int i, int j, int k) const { return i + nx * (j + ny * k); }
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

// One point in hyperparameter space. mu/sigma describe natural-log
// horizontal permeability in log-md; log10_ar is the base-10 log of the
// vertical/horizontal permeability ratio; corr_len_h is in grid cells.
struct HyperParams {
  double mu_logk = 3.5;
  double sigma_logk = 1.0;
  double log10_ar = -1.0;
  double corr_len_h = 10.0;
  double porosity = 0.2;

  static constexpr int kCount = 5;
  static const char* name(int i);
  double get(int i) const;
  void set(int i, double v);
  double anisotropy_ratio() const { return std::pow(10.0, log10_ar); }
  void validate() const;
};

// Independent uniform boxes per hyperparameter, with an active mask:
// inactive parameters are held at `fixed` throughout inference.
struct HyperPrior {
  std::array<double, HyperParams::kCount> lower{2.5, 0.5, -2.0, 5.0, 0.13};
  std::array<double, HyperParams::kCount> upper{4.5, 2.0, 0.0, 20.0, 0.23};
  std::array<bool, HyperParams::kCount> active{true, true, true, false, false};
  std::array<double, HyperParams::kCount> fixed{3.5, 1.0, -1.0, 10.0, 0.2};

  void validate() const;
  std::vector<int> active_indices() const;
  // True iff every active coordinate lies inside its box.
  bool contains(const HyperParams& h) const;
  // Width of the box per parameter.
  double range(int i) const { return upper[i] - lower[i]; }
};

HyperParams sample_prior(const HyperPrior& prior, RngStream& rng);

// Projection of the active coordinates into a dense vector and back.
Eigen::VectorXd to_active_vector(const HyperParams& h, const HyperPrior& prior);
HyperParams from_active_vector(const Eigen::VectorXd& x, const HyperPrior& prior);

enum class VariogramConvention {
  kPracticalRange,  // C(h) = sigma^2 exp(-3 h / l)
  kPlain,           // C(h) = sigma^2 exp(-h / l)
};

// Exponential-variogram covariance at a horizontal lag in cells.
double covariance(double lag_cells, const HyperParams& h,
                  VariogramConvention conv = VariogramConvention::kPracticalRange);

// Anisotropic 3D covariance with a separate vertical range (cells).
double covariance3(double di, double dj, double dk, const HyperParams& h,
                   double corr_len_v,
                   VariogramConvention conv = VariogramConvention::kPracticalRange);

// Discretized log-permeability model together with the hyperparameters
// that generated it.
struct FieldRealization {
  GridSpec grid;
  std::vector<double> log_k;
  HyperParams hyper;
};

// Unconditional Gaussian simulation by dense Cholesky factorization of
// the correlation matrix. The factor depends only on (grid shape,
// correlation lengths, convention), so it is cached and shared across
// calls; sigma and mu enter as scale and shift.
class FieldSampler {
 public:
  struct Options {
    double corr_len_v = 1.0;  // cells
    VariogramConvention convention = VariogramConvention::kPracticalRange;
    int cell_cap = 4096;
    double diag_jitter_rel = 1e-10;
  };

  FieldSampler() : FieldSampler(Options{}) {}
  explicit FieldSampler(Options opts);
  ~FieldSampler();
  FieldSampler(FieldSampler&&) noexcept;
  FieldSampler& operator=(FieldSampler&&) noexcept;

  FieldRealization generate(const HyperParams& h, const GridSpec& grid,
                            std::uint64_t seed) const;
  const Options& options() const { return opts_; }

 private:
  Options opts_;
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

// One-shot convenience wrapper; no factor reuse across calls.
FieldRealization generate_field(const HyperParams& h, const GridSpec& grid,
                                std::uint64_t seed,
                                const FieldSampler::Options& opts = {});

}  // namespace hida
