#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cgff/error.hpp"
#include "cgff/experiments.hpp"
#include "cgff/field.hpp"
#include "cgff/kernel.hpp"
#include "cgff/rng.hpp"
#include "oracles.hpp"

using namespace cgff;

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("Nyquist rule") {
  const auto t = SurfaceModel::torus();
  const auto r = SurfaceModel::dirichlet_rectangle();
  CHECK(nyquist_resolution(t, 25.0) == 16);  // |k| <= 5 needs N >= 11
  CHECK(nyquist_resolution(t, 100.0) == 32);
  CHECK(nyquist_resolution(r, 100.0) == 16);  // m <= 10 needs N >= 11
  CHECK_NOTHROW(require_resolution(t, 25.0, 16));
  CHECK_THROWS_WITH_AS(require_resolution(t, 25.0, 8), doctest::Contains("use resolution >= 16"), Error);
  CHECK_THROWS_AS(require_resolution(t, 25.0, 24), Error);
  CHECK_THROWS_AS(sample_cgff(t, 100.0, 1, 16), Error);
}

TEST_CASE("fast synthesis equals direct evaluation of the series") {
  for (const auto& model : {SurfaceModel::torus(), SurfaceModel::dirichlet_rectangle(),
                            SurfaceModel::torus(3.0, 5.0), SurfaceModel::dirichlet_rectangle(2.0, 1.0)}) {
    for (double L : {7.0, 50.0}) {
      const int N = nyquist_resolution(model, L) * 2;
      const FieldSample s = sample_cgff(model, L, 11, N);
      const auto basis = enumerate_eigenpairs(model, L);
      REQUIRE(s.coefficients.size() == basis.size());
      std::vector<double> amp(basis.size());
      for (std::size_t n = 0; n < basis.size(); ++n) amp[n] = s.coefficients[n] / std::sqrt(basis[n].lambda);
      const auto direct = oracle::naive_synthesis(s.grid.geometry(), basis.pairs(), amp);
      std::vector<double> diff(direct.size());
      for (std::size_t k = 0; k < direct.size(); ++k) diff[k] = s.grid.values()[k] - direct[k];
      CHECK(max_abs(diff) <= 1e-10 * max_abs(direct));
    }
  }
}

TEST_CASE("analysis inverts synthesis on resolved grids") {
  for (const auto& model : {SurfaceModel::torus(), SurfaceModel::dirichlet_rectangle()}) {
    const double L = 40.0;
    const auto basis = enumerate_eigenpairs(model, L);
    const SpectralSynthesizer synth(model, nyquist_resolution(model, L));
    std::vector<double> amp(basis.size());
    for (std::size_t n = 0; n < amp.size(); ++n) amp[n] = std::sin(1.0 + n);
    const Grid g = synth.synthesize(basis.pairs(), amp);
    const auto back = synth.analyze(basis.pairs(), g);
    for (std::size_t n = 0; n < amp.size(); ++n) CHECK(back[n] == doctest::Approx(amp[n]).epsilon(1e-11));
  }
}

TEST_CASE("samples are deterministic and torus samples have zero mean") {
  const auto model = SurfaceModel::torus();
  const FieldSample a = sample_cgff(model, 300.0, 5, 64);
  const FieldSample b = sample_cgff(model, 300.0, 5, 64);
  CHECK(std::equal(a.grid.values().begin(), a.grid.values().end(), b.grid.values().begin()));
  CHECK(std::abs(a.grid.mean()) < 1e-13 * max_abs(a.grid.values()) * 64);
  const FieldSample c = sample_cgff(model, 300.0, 6, 64);
  CHECK_FALSE(std::equal(a.grid.values().begin(), a.grid.values().end(), c.grid.values().begin()));
}

TEST_CASE("two-scale components add up to the full field") {
  for (const auto& model : {SurfaceModel::torus(), SurfaceModel::dirichlet_rectangle()}) {
    const double L = 1000.0;
    const int N = nyquist_resolution(model, L);
    const FieldSample full = sample_cgff(model, L, 21, N);
    const TwoScaleSample two = sample_two_scale(model, L, 0.5, 21, N);
    CHECK(two.low.band.upper == doctest::Approx(std::sqrt(L)));
    CHECK(two.high.band.lower == two.low.band.upper);
    // Bit-level equality of the shared coefficients.
    REQUIRE(two.low.coefficients.size() + two.high.coefficients.size() == full.coefficients.size());
    for (std::size_t n = 0; n < two.low.coefficients.size(); ++n) {
      CHECK(two.low.coefficients[n] == full.coefficients[n]);
    }
    for (std::size_t n = 0; n < two.high.coefficients.size(); ++n) {
      CHECK(two.high.coefficients[n] == full.coefficients[two.high.first_ordinal + n]);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < full.grid.values().size(); ++k) {
      worst = std::max(worst, std::abs(two.low.grid.values()[k] + two.high.grid.values()[k] - full.grid.values()[k]));
    }
    CHECK(worst <= 1e-12 * max_abs(full.grid.values()));
  }
  CHECK_THROWS_AS(sample_two_scale(SurfaceModel::torus(), 100.0, 1.0, 1, 32), Error);
  CHECK_THROWS_AS(sample_two_scale(SurfaceModel::torus(), 100.0, 0.0, 1, 32), Error);
}

TEST_CASE("pointwise variance and band statistics match spectral sums") {
  const auto model = SurfaceModel::torus();
  const double L = 100.0, alpha = 0.5;
  const int N = 32, n = 4000;
  const auto basis = BasisCache::global().get(model, L);
  const CgffSampler low_s(basis, {0.0, 10.0}, N);
  const CgffSampler high_s(basis, {10.0, L}, N);
  const int ip = 5, jp = 9, iq = 7, jq = 12;
  double sl = 0.0, sh = 0.0, shh = 0.0, slh = 0.0;
  for (int s = 0; s < n; ++s) {
    const auto seed = replicate_seed(77, std::uint64_t(s));
    const Grid lo = low_s.sample(seed, false).grid;
    const Grid hi = high_s.sample(seed, false).grid;
    const double h = hi.at(ip, jp);
    sl += lo.at(ip, jp);
    sh += h;
    shh += h * h;
    slh += lo.at(ip, jp) * hi.at(iq, jq);
  }
  const GridGeometry& g = low_s.synthesizer().geometry();
  const double var_high = band_covariance(model, L, alpha, g.node(ip, jp), g.node(ip, jp));
  const double var_low = covariance(model, 10.0, g.node(ip, jp), g.node(ip, jp));
  const double var_high_q = band_covariance(model, L, alpha, g.node(iq, jq), g.node(iq, jq));
  CHECK(var_high == doctest::Approx(covariance(model, L, g.node(ip, jp), g.node(ip, jp)) - var_low));
  // Variance estimate: standard error var * sqrt(2/n) for a Gaussian.
  CHECK(std::abs(shh / n - var_high) < 3.0 * var_high * std::sqrt(2.0 / n));
  // Independent bands: E[low(p) high(q)] = 0, SE sqrt(var_low var_high_q / n).
  const double se_cross = std::sqrt(var_low * var_high_q / n);
  CHECK(std::abs(slh / n) < 3.0 * se_cross);
  CHECK(std::abs(sl / n) < 3.0 * std::sqrt(var_low / n));
  CHECK(std::abs(sh / n) < 3.0 * std::sqrt(var_high / n));
}

TEST_CASE("field law is symmetric under sign flip") {
  // Two-sample Kolmogorov-Smirnov between sup(phi) and sup(-phi) = -inf(phi)
  // on independent replicate sets.
  const auto model = SurfaceModel::torus();
  const std::size_t n = 1500;
  auto sups = sample_suprema(model, 100.0, n, 1, {});
  auto infs = sample_suprema(model, 100.0, n, 2, {}, true);
  for (double& v : infs) v = -v;
  std::sort(sups.begin(), sups.end());
  std::sort(infs.begin(), infs.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < n) {
    if (sups[i] <= infs[j]) ++i;
    else ++j;
    ks = std::max(ks, std::abs(double(i) - double(j)) / double(n));
  }
  // Critical value at level 0.001: 1.95 sqrt(2/n).
  CHECK(ks < 1.95 * std::sqrt(2.0 / n));
}

TEST_CASE("DGFF covariance is the inverse Dirichlet Laplacian") {
  for (int N : {3, 4, 7, 12, 16}) {
    const DgffSampler s(N);
    const std::size_t m = s.mode_count();
    Eigen::MatrixXd M(m, m);
    std::vector<double> e(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      std::fill(e.begin(), e.end(), 0.0);
      e[k] = 1.0;
      const auto v = s.synthesize(e);
      for (int b = 1; b < N - 1; ++b) {
        for (int a = 1; a < N - 1; ++a) M(std::size_t(b - 1) * (N - 2) + (a - 1), k) = v[std::size_t(b) * N + a];
      }
    }
    const Eigen::MatrixXd C = M * M.transpose();
    const Eigen::MatrixXd ref = oracle::dgff_covariance(N);
    CHECK((C - ref).cwiseAbs().maxCoeff() < 1e-12);
    if (N == 3) CHECK(C(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  }
  CHECK_THROWS_AS(DgffSampler(2), Error);
}

TEST_CASE("DGFF boundary values are exactly zero") {
  const DgffSample s = sample_dgff(16, 4);
  for (int i = 0; i < 16; ++i) {
    CHECK(s.at(i, 0) == 0.0);
    CHECK(s.at(i, 15) == 0.0);
    CHECK(s.at(0, i) == 0.0);
    CHECK(s.at(15, i) == 0.0);
  }
  CHECK(s.at(7, 7) != 0.0);
}

TEST_CASE("zero shift is the identity") {
  const FieldSample s = sample_cgff(SurfaceModel::torus(), 25.0, 3, 16);
  std::vector<double> c(s.coefficients.size(), 0.5);
  const ShiftedSample out = shift_field(s, c, 0.0);
  CHECK(out.log_weight == 0.0);
  CHECK(std::equal(out.sample.grid.values().begin(), out.sample.grid.values().end(), s.grid.values().begin()));
  CHECK_THROWS_AS(shift_field(s, std::vector<double>(3, 1.0), 1.0), Error);
}

TEST_CASE("shift adds t h and its weights have unit mean") {
  const auto model = SurfaceModel::torus();
  const CgffSampler sampler(model, {0.0, 25.0}, 16);
  std::vector<double> c(sampler.size());
  for (std::size_t n = 0; n < c.size(); ++n) c[n] = 0.3 * std::cos(0.7 * n);
  const ShiftDirection h = make_shift_direction(sampler, c);
  const double t = 0.8;
  double c2 = 0.0;
  for (double v : c) c2 += v * v;

  const FieldSample first = sampler.sample(1);
  const ShiftedSample moved = shift_field(first, h, t);
  double cxi = 0.0;
  for (std::size_t n = 0; n < c.size(); ++n) cxi += c[n] * first.coefficients[n];
  CHECK(moved.log_weight == doctest::Approx(-t * cxi - t * t * c2 / 2.0));
  for (std::size_t k = 0; k < first.grid.values().size(); ++k) {
    CHECK(moved.sample.grid.values()[k] == doctest::Approx(first.grid.values()[k] + t * h.grid.values()[k]));
  }

  const int n = 10000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(shift_field(sampler.sample(replicate_seed(8, i)), h, t).log_weight);
    s1 += w;
    s2 += w * w;
  }
  const double mean = s1 / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("plain and shifted estimates of a Gaussian tail agree") {
  const auto model = SurfaceModel::torus();
  const double L = 25.0;
  const CgffSampler sampler(model, {0.0, L}, 16);
  const int i0 = 3, j0 = 5;
  const Point p0 = sampler.synthesizer().geometry().node(i0, j0);
  const double var = covariance(model, L, p0, p0);
  const double a = 2.5 * std::sqrt(var);
  const double exact = normal_tail(2.5);

  // Direction: the covariance G_L(., p0), the optimal mean shift for a
  // tail event at one node.
  const auto pairs = sampler.band_pairs();
  std::vector<double> c(pairs.size());
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    c[n] = eval_eigenfunction(model, pairs[n], p0) / std::sqrt(pairs[n].lambda);
  }
  const ShiftDirection h = make_shift_direction(sampler, c);
  const double t = a / h.grid.at(i0, j0);

  const std::size_t n = 20000;
  std::size_t hits = 0;
  double sy = 0.0, sy2 = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const FieldSample f = sampler.sample(replicate_seed(31, s));
    if (f.grid.at(i0, j0) > a) ++hits;
    const ShiftedSample m = shift_field(f, h, t);
    const double y = m.sample.grid.at(i0, j0) > a ? std::exp(m.log_weight) : 0.0;
    sy += y;
    sy2 += y * y;
  }
  const ConfidenceInterval plain = wilson_interval(hits, n);
  const double p_is = sy / n;
  const double se_is = std::sqrt(std::max(0.0, sy2 / n - p_is * p_is) / n);
  const ConfidenceInterval is{p_is - 1.96 * se_is, p_is + 1.96 * se_is};
  CHECK(plain.lower <= is.upper);
  CHECK(is.lower <= plain.upper);
  CHECK(plain.lower <= exact);
  CHECK(exact <= plain.upper);
  CHECK(is.lower <= exact);
  CHECK(exact <= is.upper);
  CHECK(se_is < (plain.upper - plain.lower) / 3.92);
}
