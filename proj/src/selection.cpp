#include "hida/selection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace hida {

void WeightedSamples::validate() const {
  if (points.size() != weights.size())
    throw std::invalid_argument("points and weights disagree in length");
  if (points.empty()) throw std::invalid_argument("no weighted samples");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1.0e-12)
    throw std::invalid_argument("weights must sum to 1 within 1e-12");
}

std::vector<std::size_t> systematic_resample(const WeightedSamples& ws,
                                             std::size_t m_out, RngStream& rng) {
  ws.validate();
  if (m_out < 1) throw std::invalid_argument("output count must be >= 1");
  const std::size_t n = ws.points.size();
  const double step = 1.0 / static_cast<double>(m_out);
  const double u = rng.uniform01() * step;

  std::vector<std::size_t> out;
  out.reserve(m_out);
  std::size_t i = 0;
  double cum = ws.weights[0];
  // Skip leading zero-weight entries so every selected index has w > 0.
  while (cum <= 0.0 && i + 1 < n) cum += ws.weights[++i];
  for (std::size_t j = 0; j < m_out; ++j) {
    const double target = u + static_cast<double>(j) * step;
    while (cum < target && i + 1 < n) cum += ws.weights[++i];
    out.push_back(i);
  }
  return out;
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Coordinates standardized per active dimension; constant dimensions
// collapse to zero and stop influencing distances.
MatrixXd standardized_coords(const std::vector<HyperParams>& points,
                             const HyperPrior& prior) {
  const Index n = static_cast<Index>(points.size());
  const Index m = static_cast<Index>(prior.active_indices().size());
  MatrixXd x(m, n);
  for (Index i = 0; i < n; ++i)
    x.col(i) = to_active_vector(points[static_cast<std::size_t>(i)], prior);
  for (Index d = 0; d < m; ++d) {
    const double mean = x.row(d).mean();
    x.row(d).array() -= mean;
    const double sd = n > 1 ? std::sqrt(x.row(d).squaredNorm() /
                                        static_cast<double>(n - 1))
                            : 0.0;
    if (sd > 0.0)
      x.row(d) /= sd;
    else
      x.row(d).setZero();
  }
  return x;
}

std::size_t count_distinct(const MatrixXd& x) {
  std::set<std::vector<double>> seen;
  for (Index i = 0; i < x.cols(); ++i)
    seen.insert(std::vector<double>(x.col(i).data(), x.col(i).data() + x.rows()));
  return seen.size();
}

struct ClusterRun {
  std::vector<std::size_t> medoids;
  double inertia = std::numeric_limits<double>::infinity();
};

ClusterRun one_clustering(const MatrixXd& x, std::size_t k, RngStream& rng) {
  const Index n = x.cols();
  const std::size_t kn = static_cast<std::size_t>(n);

  // k-means++ seeding: duplicates of chosen centers carry zero weight.
  std::vector<Index> seeds;
  seeds.push_back(static_cast<Index>(rng.uniform_index(kn)));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i)
    d2[i] = (x.col(i) - x.col(seeds[0])).squaredNorm();
  while (seeds.size() < k) {
    const double total = d2.sum();
    double target = rng.uniform01() * total;
    Index chosen = n - 1;
    for (Index i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    seeds.push_back(chosen);
    for (Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.col(i) - x.col(chosen)).squaredNorm());
  }

  MatrixXd centers(x.rows(), static_cast<Index>(k));
  for (std::size_t c = 0; c < k; ++c)
    centers.col(static_cast<Index>(c)) = x.col(seeds[c]);

  std::vector<int> assign(kn, -1);
  std::vector<std::size_t> counts(k, 0);
  auto assign_all = [&]() {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.col(i) - centers.col(0)).squaredNorm();
      for (std::size_t c = 1; c < k; ++c) {
        const double d =
            (x.col(i) - centers.col(static_cast<Index>(c))).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
      ++counts[static_cast<std::size_t>(best)];
    }
    return changed;
  };
  // Deterministic rescue for empty clusters: take the point farthest from
  // its center among clusters that can spare one (lowest index on ties).
  auto rescue_empties = [&]() {
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const int a = assign[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const double d = (x.col(i) - centers.col(a)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = static_cast<int>(c);
      ++counts[c];
      centers.col(static_cast<Index>(c)) = x.col(far);
    }
  };

  for (int iter = 0; iter < 100; ++iter) {
    const bool changed = assign_all();
    rescue_empties();
    if (!changed && iter > 0) break;
    for (std::size_t c = 0; c < k; ++c) {
      VectorXd sum = VectorXd::Zero(x.rows());
      for (Index i = 0; i < n; ++i)
        if (assign[static_cast<std::size_t>(i)] == static_cast<int>(c))
          sum += x.col(i);
      centers.col(static_cast<Index>(c)) = sum / static_cast<double>(counts[c]);
    }
  }

  // Medoid projection: in-cluster point minimizing summed distance to
  // the cluster members; ties resolved by lowest index.
  ClusterRun run;
  run.medoids.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<Index> members;
    for (Index i = 0; i < n; ++i)
      if (assign[static_cast<std::size_t>(i)] == static_cast<int>(c))
        members.push_back(i);
    Index best = members.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (Index cand : members) {
      double s = 0.0;
      for (Index other : members) s += (x.col(cand) - x.col(other)).norm();
      if (s < best_sum) {
        best_sum = s;
        best = cand;
      }
    }
    run.medoids[c] = static_cast<std::size_t>(best);
  }

  run.inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    const std::size_t medoid =
        run.medoids[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    run.inertia += (x.col(i) - x.col(static_cast<Index>(medoid))).squaredNorm();
  }
  return run;
}

}  // namespace

std::vector<std::size_t> kmedoids_select_indices(
    const std::vector<HyperParams>& points, const HyperPrior& prior,
    std::size_t k, RngStream& rng, int restarts) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (points.empty()) throw InsufficientDistinctPoints("no points to cluster");

  const MatrixXd x = standardized_coords(points, prior);
  if (count_distinct(x) < k)
    throw InsufficientDistinctPoints(
        "fewer distinct points than requested medoids");

  ClusterRun best;
  for (int r = 0; r < restarts; ++r) {
    ClusterRun run = one_clustering(x, k, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  std::sort(best.medoids.begin(), best.medoids.end());
  return best.medoids;
}

std::vector<HyperParams> kmedoids_select(const std::vector<HyperParams>& points,
                                         const HyperPrior& prior, std::size_t k,
                                         RngStream& rng, int restarts) {
  std::vector<HyperParams> out;
  const auto idx = kmedoids_select_indices(points, prior, k, rng, restarts);
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(points[i]);
  return out;
}

}  // namespace hida
