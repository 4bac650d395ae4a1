#include "hida/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace hida {

void MarginalDensity::validate() const {
  if (edges.size() < 2) throw std::invalid_argument("need at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("edges must strictly increase");
  if (probabilities.size() != edges.size() - 1)
    throw std::invalid_argument("probabilities do not match bin count");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1.0e-12)
    throw std::invalid_argument("probabilities must sum to 1 within 1e-12");
}

std::vector<double> uniform_edges(double lo, double hi, int bins) {
  if (!(hi > lo)) throw std::invalid_argument("edge range must be positive");
  if (bins < 1) throw std::invalid_argument("need at least one bin");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    edges[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  edges.back() = hi;
  return edges;
}

MarginalDensity histogram_density(const std::vector<double>& samples,
                                  const std::vector<double>& weights,
                                  const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("need at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("edges must strictly increase");
  if (samples.empty()) throw EmptySampleSet("no samples to bin");
  if (!weights.empty() && weights.size() != samples.size())
    throw std::invalid_argument("weights do not match samples");

  MarginalDensity out;
  out.edges = edges;
  out.probabilities.assign(edges.size() - 1, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be >= 0");
    const double x = samples[i];
    std::size_t bin;
    if (x < edges.front()) {
      bin = 0;
      ++out.clipped_low;
    } else if (x > edges.back()) {
      bin = out.probabilities.size() - 1;
      ++out.clipped_high;
    } else {
      // Right-inclusive last bin so edges.back() lands inside.
      const auto it = std::upper_bound(edges.begin(), edges.end(), x);
      bin = std::min(static_cast<std::size_t>(it - edges.begin() - 1),
                     out.probabilities.size() - 1);
    }
    out.probabilities[bin] += w;
    total += w;
  }
  if (!(total > 0.0)) throw EmptySampleSet("total sample weight is zero");
  for (double& p : out.probabilities) p /= total;
  return out;
}

double js_divergence(const MarginalDensity& p, const MarginalDensity& q) {
  p.validate();
  q.validate();
  if (p.edges != q.edges)
    throw EdgeMismatch("histograms were built on different bin grids");
  double js = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    const double qi = q.probabilities[i];
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) js += 0.5 * pi * std::log(pi / mi);
    if (qi > 0.0) js += 0.5 * qi * std::log(qi / mi);
  }
  return std::max(js, 0.0);
}

namespace {

double interpolated_percentile(std::vector<double>& sorted_scratch, double prob) {
  const std::size_t n = sorted_scratch.size();
  const double pos = prob * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_scratch[lo] + frac * (sorted_scratch[hi] - sorted_scratch[lo]);
}

}  // namespace

PercentileCurves series_percentiles(
    const std::vector<std::vector<double>>& ensemble,
    const std::vector<double>& probs) {
  if (ensemble.empty()) throw EmptyEnsemble("no ensemble members");
  const std::size_t n_t = ensemble.front().size();
  for (const auto& member : ensemble)
    if (member.size() != n_t)
      throw std::invalid_argument("members disagree in series length");
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("percentile probs must lie in [0, 1]");

  PercentileCurves out;
  out.probs = probs;
  out.curves.assign(probs.size(), std::vector<double>(n_t, 0.0));
  std::vector<double> column(ensemble.size());
  for (std::size_t t = 0; t < n_t; ++t) {
    for (std::size_t j = 0; j < ensemble.size(); ++j) column[j] = ensemble[j][t];
    std::sort(column.begin(), column.end());
    for (std::size_t p = 0; p < probs.size(); ++p)
      out.curves[p][t] = interpolated_percentile(column, probs[p]);
  }
  return out;
}

FieldStats field_posterior_stats(
    const std::vector<std::vector<std::vector<double>>>& ensembles,
    const std::vector<std::vector<double>>& prior_members) {
  std::size_t n_members = 0;
  std::size_t n_cells = 0;
  for (const auto& ens : ensembles)
    for (const auto& member : ens) {
      if (n_cells == 0) n_cells = member.size();
      if (member.size() != n_cells)
        throw std::invalid_argument("members disagree in cell count");
      ++n_members;
    }
  if (n_members < 2)
    throw InsufficientMembers("need at least 2 posterior members");
  if (prior_members.size() < 2)
    throw InsufficientMembers("need at least 2 prior members");
  for (const auto& member : prior_members)
    if (member.size() != n_cells)
      throw std::invalid_argument("prior members disagree in cell count");

  FieldStats out;
  out.mean.assign(n_cells, 0.0);
  out.variance.assign(n_cells, 0.0);
  out.variance_reduction.assign(n_cells, 0.0);

  for (const auto& ens : ensembles)
    for (const auto& member : ens)
      for (std::size_t c = 0; c < n_cells; ++c) out.mean[c] += member[c];
  for (double& v : out.mean) v /= static_cast<double>(n_members);

  for (const auto& ens : ensembles)
    for (const auto& member : ens)
      for (std::size_t c = 0; c < n_cells; ++c) {
        const double d = member[c] - out.mean[c];
        out.variance[c] += d * d;
      }
  for (double& v : out.variance) v /= static_cast<double>(n_members - 1);

  std::vector<double> prior_mean(n_cells, 0.0);
  for (const auto& member : prior_members)
    for (std::size_t c = 0; c < n_cells; ++c) prior_mean[c] += member[c];
  for (double& v : prior_mean) v /= static_cast<double>(prior_members.size());
  std::vector<double> prior_var(n_cells, 0.0);
  for (const auto& member : prior_members)
    for (std::size_t c = 0; c < n_cells; ++c) {
      const double d = member[c] - prior_mean[c];
      prior_var[c] += d * d;
    }
  for (double& v : prior_var)
    v /= static_cast<double>(prior_members.size() - 1);

  for (std::size_t c = 0; c < n_cells; ++c)
    out.variance_reduction[c] =
        prior_var[c] > 0.0 ? 1.0 - out.variance[c] / prior_var[c] : 0.0;
  return out;
}

std::vector<ConvergencePoint> convergence_curve(
    const std::vector<SnapshotSamples>& snapshots,
    const SnapshotSamples& reference, const HyperPrior& prior, int bins) {
  prior.validate();
  if (reference.samples.empty()) throw EmptySampleSet("empty reference");
  for (std::size_t i = 1; i < snapshots.size(); ++i)
    if (snapshots[i].run_count <= snapshots[i - 1].run_count)
      throw std::invalid_argument("snapshots must be sorted by run count");

  std::vector<ConvergencePoint> out;
  out.reserve(snapshots.size());
  for (const auto& snap : snapshots)
    out.push_back({snap.run_count, {}});

  for (int dim : prior.active_indices()) {
    if (!(prior.range(dim) > 0.0)) continue;
    const std::vector<double> edges =
        uniform_edges(prior.lower[static_cast<std::size_t>(dim)],
                      prior.upper[static_cast<std::size_t>(dim)], bins);
    auto values = [dim](const SnapshotSamples& s) {
      std::vector<double> v(s.samples.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.samples[i].get(dim);
      return v;
    };
    const MarginalDensity ref =
        histogram_density(values(reference), reference.weights, edges);
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
      if (snapshots[i].samples.empty())
        throw EmptySampleSet("empty snapshot sample set");
      const MarginalDensity snap_density = histogram_density(
          values(snapshots[i]), snapshots[i].weights, edges);
      out[i].js[static_cast<std::size_t>(dim)] =
          js_divergence(snap_density, ref);
    }
  }
  return out;
}

}  // namespace hida
