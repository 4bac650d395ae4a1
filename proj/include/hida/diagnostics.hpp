#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hida/geomodel.hpp"

namespace hida {

struct EmptySampleSet : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EdgeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EmptyEnsemble : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InsufficientMembers : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Normalized histogram over a fixed bin grid; out-of-range samples are
// folded into the end bins and reported via the clip counters.
struct MarginalDensity {
  std::vector<double> edges;          // strictly increasing, bins + 1 entries
  std::vector<double> probabilities;  // non-negative, sum to 1
  std::size_t clipped_low = 0;
  std::size_t clipped_high = 0;
  void validate() const;
};

std::vector<double> uniform_edges(double lo, double hi, int bins);

// `weights` may be empty for equally weighted samples.
MarginalDensity histogram_density(const std::vector<double>& samples,
                                  const std::vector<double>& weights,
                                  const std::vector<double>& edges);

// Jensen-Shannon divergence in nats; bounded by ln 2.
double js_divergence(const MarginalDensity& p, const MarginalDensity& q);

struct PercentileCurves {
  std::vector<double> probs;
  // curves[p][t]: percentile probs[p] across members at time index t.
  std::vector<std::vector<double>> curves;
};

// Linear-interpolation percentiles per time across ensemble members.
PercentileCurves series_percentiles(
    const std::vector<std::vector<double>>& ensemble,
    const std::vector<double>& probs = {0.1, 0.5, 0.9});

struct FieldStats {
  std::vector<double> mean;
  std::vector<double> variance;            // unbiased, pooled over members
  std::vector<double> variance_reduction;  // 1 - posterior / prior variance
};

// Pools all members of all posterior ensembles; the prior ensemble sets
// the reference variance for the reduction map.
FieldStats field_posterior_stats(
    const std::vector<std::vector<std::vector<double>>>& ensembles,
    const std::vector<std::vector<double>>& prior_members);

struct SnapshotSamples {
  std::size_t run_count = 0;
  std::vector<HyperParams> samples;
  std::vector<double> weights;  // empty for equal weights
};

struct ConvergencePoint {
  std::size_t run_count = 0;
  // JS divergence per hyperparameter; inactive dimensions stay 0.
  std::array<double, HyperParams::kCount> js{};
};

// Marginal JS divergence of each snapshot against the reference, with
// shared histogram edges spanning the prior range of each active
// hyperparameter. Snapshots must arrive sorted by run count.
std::vector<ConvergencePoint> convergence_curve(
    const std::vector<SnapshotSamples>& snapshots,
    const SnapshotSamples& reference, const HyperPrior& prior, int bins = 20);

}  // namespace hida
