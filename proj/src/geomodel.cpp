#include "hida/geomodel.hpp"

#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include <Eigen/Cholesky>

namespace hida {

void GridSpec::validate() const {
  if (nx < 1 || ny < 1 || nz < 1)
    throw std::invalid_argument("GridSpec: all cell counts must be >= 1");
  if (dx <= 0.0 || dy <= 0.0 || dz <= 0.0)
    throw std::invalid_argument("GridSpec: all cell dimensions must be > 0");
}

const char* HyperParams::name(int i) {
  switch (i) {
    case 0: return "mu_logk";
    case 1: return "sigma_logk";
    case 2: return "log10_ar";
    case 3: return "corr_len_h";
    case 4: return "porosity";
  }
  throw std::out_of_range("HyperParams::name");
}

double HyperParams::get(int i) const {
  switch (i) {
    case 0: return mu_logk;
    case 1: return sigma_logk;
    case 2: return log10_ar;
    case 3: return corr_len_h;
    case 4: return porosity;
  }
  throw std::out_of_range("HyperParams::get");
}

void HyperParams::set(int i, double v) {
  switch (i) {
    case 0: mu_logk = v; return;
    case 1: sigma_logk = v; return;
    case 2: log10_ar = v; return;
    case 3: corr_len_h = v; return;
    case 4: porosity = v; return;
  }
  throw std::out_of_range("HyperParams::set");
}

void HyperParams::validate() const {
  if (sigma_logk < 0.0)
    throw std::invalid_argument("HyperParams: sigma_logk must be >= 0");
  if (porosity <= 0.0 || porosity >= 1.0)
    throw std::invalid_argument("HyperParams: porosity must lie in (0, 1)");
  if (corr_len_h <= 0.0)
    throw std::invalid_argument("HyperParams: corr_len_h must be > 0");
}

void HyperPrior::validate() const {
  for (int i = 0; i < HyperParams::kCount; ++i) {
    if (lower[i] > upper[i]) {
      std::ostringstream os;
      os << "HyperPrior: lower > upper for " << HyperParams::name(i);
      throw std::invalid_argument(os.str());
    }
  }
}

std::vector<int> HyperPrior::active_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < HyperParams::kCount; ++i)
    if (active[i]) idx.push_back(i);
  return idx;
}

bool HyperPrior::contains(const HyperParams& h) const {
  for (int i = 0; i < HyperParams::kCount; ++i) {
    if (!active[i]) continue;
    const double v = h.get(i);
    if (v < lower[i] || v > upper[i]) return false;
  }
  return true;
}

HyperParams sample_prior(const HyperPrior& prior, RngStream& rng) {
  prior.validate();
  HyperParams h;
  for (int i = 0; i < HyperParams::kCount; ++i) {
    if (prior.active[i]) {
      h.set(i, prior.lower[i] == prior.upper[i]
                   ? prior.lower[i]
                   : rng.uniform(prior.lower[i], prior.upper[i]));
    } else {
      h.set(i, prior.fixed[i]);
    }
  }
  return h;
}

Eigen::VectorXd to_active_vector(const HyperParams& h, const HyperPrior& prior) {
  const auto idx = prior.active_indices();
  Eigen::VectorXd x(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) x[static_cast<Eigen::Index>(a)] = h.get(idx[a]);
  return x;
}

HyperParams from_active_vector(const Eigen::VectorXd& x, const HyperPrior& prior) {
  const auto idx = prior.active_indices();
  if (static_cast<std::size_t>(x.size()) != idx.size())
    throw std::invalid_argument("from_active_vector: dimension mismatch");
  HyperParams h;
  for (int i = 0; i < HyperParams::kCount; ++i) h.set(i, prior.fixed[i]);
  for (std::size_t a = 0; a < idx.size(); ++a) h.set(idx[a], x[static_cast<Eigen::Index>(a)]);
  return h;
}

namespace {
double decay_scale(VariogramConvention conv) {
  return conv == VariogramConvention::kPracticalRange ? 3.0 : 1.0;
}
}  // namespace

double covariance(double lag_cells, const HyperParams& h, VariogramConvention conv) {
  if (lag_cells < 0.0) throw std::invalid_argument("covariance: lag must be >= 0");
  const double s2 = h.sigma_logk * h.sigma_logk;
  return s2 * std::exp(-decay_scale(conv) * lag_cells / h.corr_len_h);
}

double covariance3(double di, double dj, double dk, const HyperParams& h,
                   double corr_len_v, VariogramConvention conv) {
  const double lh = h.corr_len_h;
  const double scaled = std::sqrt((di * di + dj * dj) / (lh * lh) +
                                  (dk * dk) / (corr_len_v * corr_len_v));
  const double s2 = h.sigma_logk * h.sigma_logk;
  return s2 * std::exp(-decay_scale(conv) * scaled);
}

// Cached lower-triangular factor of the unit-sill correlation matrix.
// Lags are measured in cells, so dx/dy/dz do not enter the key, and
// sigma/mu are applied outside the factor.
struct FieldSampler::Cache {
  std::mutex mutex;
  std::map<std::tuple<int, int, int, double>,
           std::shared_ptr<const Eigen::MatrixXd>> factors;
};

FieldSampler::FieldSampler(Options opts) : opts_(opts), cache_(std::make_unique<Cache>()) {
  if (opts_.corr_len_v <= 0.0)
    throw std::invalid_argument("FieldSampler: corr_len_v must be > 0");
}

FieldSampler::~FieldSampler() = default;
FieldSampler::FieldSampler(FieldSampler&&) noexcept = default;
FieldSampler& FieldSampler::operator=(FieldSampler&&) noexcept = default;

namespace {

Eigen::MatrixXd correlation_factor(const GridSpec& grid, double corr_len_h,
                                   double corr_len_v, VariogramConvention conv,
                                   double jitter) {
  const int n = grid.cell_count();
  HyperParams unit;
  unit.sigma_logk = 1.0;
  unit.corr_len_h = corr_len_h;
  Eigen::MatrixXd c(n, n);
  for (int k2 = 0; k2 < grid.nz; ++k2)
    for (int j2 = 0; j2 < grid.ny; ++j2)
      for (int i2 = 0; i2 < grid.nx; ++i2) {
        const int col = grid.index(i2, j2, k2);
        for (int k1 = 0; k1 < grid.nz; ++k1)
          for (int j1 = 0; j1 < grid.ny; ++j1)
            for (int i1 = 0; i1 < grid.nx; ++i1) {
              const int row = grid.index(i1, j1, k1);
              if (row < col) continue;  // fill lower triangle only
              c(row, col) = covariance3(i1 - i2, j1 - j2, k1 - k2, unit,
                                        corr_len_v, conv);
            }
      }
  c.diagonal().array() += jitter;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(c);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailure(
        "generate_field: covariance matrix is not positive definite after jitter");
  return llt.matrixL();
}

}  // namespace

FieldRealization FieldSampler::generate(const HyperParams& h, const GridSpec& grid,
                                        std::uint64_t seed) const {
  grid.validate();
  h.validate();
  const int n = grid.cell_count();
  if (n > opts_.cell_cap) {
    std::ostringstream os;
    os << "generate_field: " << n << " cells exceeds cap " << opts_.cell_cap;
    throw CellCapExceeded(os.str());
  }

  std::shared_ptr<const Eigen::MatrixXd> factor;
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    const auto key = std::make_tuple(grid.nx, grid.ny, grid.nz, h.corr_len_h);
    auto it = cache_->factors.find(key);
    if (it != cache_->factors.end()) {
      factor = it->second;
    } else {
      factor = std::make_shared<Eigen::MatrixXd>(correlation_factor(
          grid, h.corr_len_h, opts_.corr_len_v, opts_.convention,
          opts_.diag_jitter_rel));
      cache_->factors[key] = factor;
    }
  }

  RngStream rng(seed);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();

  FieldRealization field;
  field.grid = grid;
  field.hyper = h;
  field.log_k.resize(n);
  Eigen::Map<Eigen::VectorXd> out(field.log_k.data(), n);
  out = (*factor).triangularView<Eigen::Lower>() * z;
  out = h.mu_logk + h.sigma_logk * out.array();
  return field;
}

FieldRealization generate_field(const HyperParams& h, const GridSpec& grid,
                                std::uint64_t seed,
                                const FieldSampler::Options& opts) {
  FieldSampler sampler(opts);
  return sampler.generate(h, grid, seed);
}

}  // namespace hida
