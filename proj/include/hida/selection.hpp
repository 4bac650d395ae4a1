#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hida/geomodel.hpp"
#include "hida/rng.hpp"

namespace hida {

struct InsufficientDistinctPoints : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct WeightedSamples {
  std::vector<HyperParams> points;
  std::vector<double> weights;  // non-negative, summing to 1
  void validate() const;
};

// Systematic resampling: one offset u ~ U[0, 1/M), select indices where
// the cumulative weight crosses u + j/M. Output is sorted by construction
// and every returned index has positive weight.
std::vector<std::size_t> systematic_resample(const WeightedSamples& ws,
                                             std::size_t m_out, RngStream& rng);

// k-medoids over active hyperparameter dimensions: points standardized
// per dimension, k-means++ seeding, Lloyd iterations, centroids projected
// to in-cluster medoids, best inertia over `restarts` restarts. Returned
// indices point into `points` and are sorted.
std::vector<std::size_t> kmedoids_select_indices(
    const std::vector<HyperParams>& points, const HyperPrior& prior,
    std::size_t k, RngStream& rng, int restarts = 10);

std::vector<HyperParams> kmedoids_select(const std::vector<HyperParams>& points,
                                         const HyperPrior& prior, std::size_t k,
                                         RngStream& rng, int restarts = 10);

}  // namespace hida
