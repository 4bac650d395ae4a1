#include <cmath>
#include <vector>

#include "doctest.h"
#include "hida/diagnostics.hpp"
#include "hida/rng.hpp"

using namespace hida;

TEST_CASE("uniform_edges spans the interval evenly") {
  const std::vector<double> e = uniform_edges(0.0, 1.0, 4);
  REQUIRE(e.size() == 5);
  CHECK(e.front() == 0.0);
  CHECK(e.back() == 1.0);
  CHECK(e[2] == doctest::Approx(0.5));
  CHECK_THROWS((void)uniform_edges(1.0, 0.0, 4));
  CHECK_THROWS((void)uniform_edges(0.0, 1.0, 0));
}

TEST_CASE("histogram_density normalizes and clips") {
  const std::vector<double> edges = uniform_edges(0.0, 1.0, 10);

  // Single sample: all mass in its bin.
  const MarginalDensity single = histogram_density({0.25}, {}, edges);
  double mass = 0.0;
  for (double p : single.probabilities) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(single.probabilities[2] == doctest::Approx(1.0));

  // Big uniform sample: each of the 10 bins near 0.1.
  RngStream rng(3);
  std::vector<double> xs(1000000);
  for (double& x : xs) x = rng.uniform01();
  const MarginalDensity uni = histogram_density(xs, {}, edges);
  for (double p : uni.probabilities) CHECK(p == doctest::Approx(0.1).epsilon(0.02));
  CHECK(uni.clipped_low == 0);
  CHECK(uni.clipped_high == 0);

  // Weighted point masses.
  const MarginalDensity wt =
      histogram_density({0.05, 0.95}, {0.25, 0.75}, edges);
  CHECK(wt.probabilities[0] == doctest::Approx(0.25));
  CHECK(wt.probabilities[9] == doctest::Approx(0.75));

  // Out-of-range samples fold into the end bins and are counted.
  const MarginalDensity clip =
      histogram_density({-0.5, 0.5, 1.5, 2.5}, {}, edges);
  mass = 0.0;
  for (double p : clip.probabilities) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(clip.clipped_low == 1);
  CHECK(clip.clipped_high == 2);
  CHECK(clip.probabilities[0] == doctest::Approx(0.25));
  CHECK(clip.probabilities[9] == doctest::Approx(0.5));

  CHECK_THROWS_AS((void)histogram_density({}, {}, edges), EmptySampleSet);
  CHECK_THROWS((void)histogram_density({0.5}, {0.5, 0.5}, edges));
}

TEST_CASE("js_divergence has its information-theoretic properties") {
  const std::vector<double> edges = uniform_edges(0.0, 1.0, 4);
  RngStream rng(5);
  std::vector<double> a(5000), b(5000), c(5000);
  for (double& x : a) x = rng.uniform01();
  for (double& x : b) x = rng.uniform01() * rng.uniform01();
  for (double& x : c) x = 0.125 + 0.25 * (rng.uniform01() < 0.5 ? 0.0 : 1.0);

  const MarginalDensity pa = histogram_density(a, {}, edges);
  const MarginalDensity pb = histogram_density(b, {}, edges);

  CHECK(js_divergence(pa, pa) == doctest::Approx(0.0).scale(1.0));
  CHECK(js_divergence(pa, pb) == doctest::Approx(js_divergence(pb, pa)));
  CHECK(js_divergence(pa, pb) > 0.0);
  CHECK(js_divergence(pa, pb) <= std::log(2.0) + 1e-12);

  // Disjoint supports reach the ln 2 ceiling.
  const MarginalDensity low = histogram_density({0.1}, {}, edges);
  const MarginalDensity high = histogram_density({0.9}, {}, edges);
  CHECK(js_divergence(low, high) == doctest::Approx(std::log(2.0)));

  // Zero only for identical binned distributions.
  const MarginalDensity pc = histogram_density(c, {}, edges);
  CHECK(js_divergence(pa, pc) > 0.0);

  MarginalDensity other = pa;
  other.edges = uniform_edges(0.0, 2.0, 4);
  CHECK_THROWS_AS((void)js_divergence(pa, other), EdgeMismatch);
  const MarginalDensity fewer =
      histogram_density(a, {}, uniform_edges(0.0, 1.0, 3));
  CHECK_THROWS_AS((void)js_divergence(pa, fewer), EdgeMismatch);
}

TEST_CASE("series_percentiles interpolates across members per time") {
  // 100 members, constant in time, values 1..100.
  std::vector<std::vector<double>> ens;
  for (int m = 1; m <= 100; ++m) ens.push_back({double(m), double(101 - m)});
  const PercentileCurves pc = series_percentiles(ens);
  REQUIRE(pc.probs == std::vector<double>{0.1, 0.5, 0.9});
  REQUIRE(pc.curves.size() == 3);
  REQUIRE(pc.curves[0].size() == 2);
  CHECK(pc.curves[1][0] == doctest::Approx(50.5));
  CHECK(pc.curves[1][1] == doctest::Approx(50.5));
  CHECK(pc.curves[0][0] < pc.curves[1][0]);
  CHECK(pc.curves[1][0] < pc.curves[2][0]);
  // Symmetric data: p10 and p90 mirror around the median.
  CHECK(pc.curves[0][0] + pc.curves[2][0] == doctest::Approx(101.0));

  // Identical members collapse every percentile onto the series.
  std::vector<std::vector<double>> same(7, {3.0, 4.0, 5.0});
  const PercentileCurves flat = series_percentiles(same);
  for (const auto& curve : flat.curves) {
    CHECK(curve[0] == doctest::Approx(3.0));
    CHECK(curve[2] == doctest::Approx(5.0));
  }

  // Member order cannot matter.
  std::vector<std::vector<double>> shuffled = ens;
  std::swap(shuffled[0], shuffled[63]);
  std::swap(shuffled[10], shuffled[90]);
  const PercentileCurves pc2 = series_percentiles(shuffled);
  CHECK(pc2.curves[0][0] == doctest::Approx(pc.curves[0][0]));
  CHECK(pc2.curves[2][1] == doctest::Approx(pc.curves[2][1]));

  CHECK_THROWS_AS((void)series_percentiles({}), EmptyEnsemble);
  std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {1.0}};
  CHECK_THROWS((void)series_percentiles(ragged));
}

TEST_CASE("field_posterior_stats reduces variance against the prior") {
  RngStream rng(9);
  const int n_cells = 50;
  auto draw = [&](double scale) {
    std::vector<double> f(n_cells);
    for (double& v : f) v = scale * rng.normal();
    return f;
  };
  std::vector<std::vector<double>> prior;
  for (int m = 0; m < 400; ++m) prior.push_back(draw(1.0));

  // Posterior identical to the prior: reduction about zero.
  std::vector<std::vector<double>> like_prior;
  for (int m = 0; m < 400; ++m) like_prior.push_back(draw(1.0));
  const FieldStats same = field_posterior_stats({like_prior}, prior);
  REQUIRE(int(same.mean.size()) == n_cells);
  double avg_red = 0.0;
  for (double r : same.variance_reduction) avg_red += r;
  CHECK(std::abs(avg_red / n_cells) < 0.1);

  // Identical members: zero variance, full reduction.
  const std::vector<double> fixed = draw(1.0);
  std::vector<std::vector<double>> collapsed(20, fixed);
  const FieldStats degen = field_posterior_stats({collapsed}, prior);
  for (int c = 0; c < n_cells; ++c) {
    CHECK(degen.mean[c] == doctest::Approx(fixed[c]));
    CHECK(degen.variance[c] == doctest::Approx(0.0).scale(1.0));
    CHECK(degen.variance_reduction[c] == doctest::Approx(1.0));
  }

  // Two members: unbiased variance is (a-b)^2 / 2 per cell.
  const std::vector<double> a = draw(1.0);
  const std::vector<double> b = draw(1.0);
  const FieldStats pair = field_posterior_stats({{a, b}}, prior);
  for (int c = 0; c < n_cells; ++c) {
    CHECK(pair.mean[c] == doctest::Approx(0.5 * (a[c] + b[c])));
    const double d = a[c] - b[c];
    CHECK(pair.variance[c] == doctest::Approx(d * d / 2.0));
  }

  // Pooling across ensembles uses all members together.
  const FieldStats pooled = field_posterior_stats({{a}, {b}}, prior);
  for (int c = 0; c < n_cells; ++c)
    CHECK(pooled.mean[c] == doctest::Approx(0.5 * (a[c] + b[c])));

  CHECK_THROWS_AS((void)field_posterior_stats({{a}}, prior), InsufficientMembers);
  CHECK_THROWS_AS((void)field_posterior_stats({{a, b}}, {fixed}),
                  InsufficientMembers);
}

namespace {

SnapshotSamples snapshot_at(std::size_t runs, double center, double spread,
                            std::uint64_t seed, int n = 4000) {
  SnapshotSamples snap;
  snap.run_count = runs;
  RngStream rng(seed);
  for (int i = 0; i < n; ++i) {
    HyperParams h;
    h.mu_logk = center + spread * rng.normal();
    snap.samples.push_back(h);
  }
  return snap;
}

}  // namespace

TEST_CASE("convergence_curve measures marginal divergence from the reference") {
  HyperPrior prior;
  prior.lower[0] = 0.0;
  prior.upper[0] = 10.0;
  prior.active = {true, false, false, false, false};

  const SnapshotSamples ref = snapshot_at(100000, 5.0, 0.5, 1);

  // A reference compared with itself scores zero everywhere.
  const std::vector<ConvergencePoint> self =
      convergence_curve({ref}, ref, prior);
  REQUIRE(self.size() == 1);
  CHECK(self[0].run_count == 100000);
  CHECK(self[0].js[0] == doctest::Approx(0.0).scale(1.0));
  for (int p = 1; p < HyperParams::kCount; ++p) CHECK(self[0].js[p] == 0.0);

  // Distant, then near, then matching snapshots: divergence decreasing.
  const std::vector<SnapshotSamples> snaps = {
      snapshot_at(1000, 8.0, 0.5, 2),
      snapshot_at(2000, 6.0, 0.5, 3),
      snapshot_at(3000, 5.0, 0.5, 4),
  };
  const std::vector<ConvergencePoint> curve = convergence_curve(snaps, ref, prior);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].run_count == 1000);
  CHECK(curve[0].js[0] > curve[1].js[0]);
  CHECK(curve[1].js[0] > curve[2].js[0]);
  CHECK(curve[2].js[0] < 0.01);
  for (const ConvergencePoint& p : curve) {
    CHECK(p.js[0] >= 0.0);
    CHECK(p.js[0] <= std::log(2.0) + 1e-12);
    CHECK(p.js[1] == 0.0);  // inactive dimensions untouched
  }

  // Weighted snapshots shift the histogram.
  SnapshotSamples weighted = snapshot_at(500, 5.0, 0.5, 5, 100);
  weighted.weights.assign(100, 0.0);
  weighted.weights[0] = 1.0;  // point mass on the first sample
  const std::vector<ConvergencePoint> wc = convergence_curve({weighted}, ref, prior);
  CHECK(wc[0].js[0] > 0.1);

  // Snapshots must arrive sorted by run count.
  CHECK_THROWS((void)convergence_curve(
      {snapshot_at(2000, 5.0, 0.5, 6), snapshot_at(1000, 5.0, 0.5, 7)}, ref,
      prior));
}
