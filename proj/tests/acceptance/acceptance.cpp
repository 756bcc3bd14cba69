// Acceptance runner: one PASS/FAIL line per criterion.
//
//   cgff_acceptance [--criterion K] [--strict]
//
// Without --criterion every criterion runs in order. The exit status is 0
// once every requested line has been printed; --strict makes any FAIL
// line return 1 instead.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cgff/capacity.hpp"
#include "cgff/experiments.hpp"
#include "cgff/field.hpp"
#include "cgff/kernel.hpp"
#include "cgff/rng.hpp"
#include "cgff/spectra.hpp"
#include "oracles.hpp"

using namespace cgff;

namespace {

constexpr double kPi = std::numbers::pi;

// Pinned tolerances and budgets.
constexpr double kGramTol = 1e-8;
constexpr double kGramSeconds = 10.0;
constexpr double kLinkTol = 1e-10;
constexpr double kLinkSeconds = 30.0;
constexpr double kResidualVariation = 0.25;
constexpr double kResidualSeconds = 120.0;
constexpr double kSamplerSE = 3.0;
constexpr double kSamplerSeconds = 120.0;
constexpr double kAdditivityTol = 1e-12;
constexpr double kDecayFactor = 2.0;
constexpr double kTwoScaleSeconds = 60.0;
constexpr double kDiskTol = 0.02;
constexpr double kGapTol = 0.05;
constexpr double kOracleTol = 1e-8;
constexpr double kConformalTol = 0.02;
constexpr double kCapacitySeconds = 300.0;
constexpr double kSlopeLow = 0.60;
constexpr double kSlopeHigh = 1.00;
constexpr double kSupSeconds = 1800.0;
constexpr double kHoleSeconds = 1800.0;
constexpr double kDgffSE = 5.0;
constexpr double kDgffCenterSE = 3.0;
constexpr double kDgffSeconds = 120.0;
constexpr double kSynthesisSeconds = 10.0;
constexpr double kSpeedup = 5.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Point uniform_point(const SurfaceModel& m, std::uint64_t seed, std::uint64_t& ord) {
  const double x = uniform_open(seed, Stream::auxiliary, ord++);
  const double y = uniform_open(seed, Stream::auxiliary, ord++);
  return {x * m.side_x(), y * m.side_y()};
}

// ---------------------------------------------------------------------------

Outcome orthonormality() {
  const Stopwatch sw;
  const auto m = SurfaceModel::torus();
  const auto basis = enumerate_eigenpairs(m, 100.0);
  const std::size_t n = 100;
  const int N = 1024;
  const double h = m.side_x() / N;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd row(N, n);
  for (int j = 0; j < N; ++j) {
    for (std::size_t a = 0; a < n; ++a) {
      for (int i = 0; i < N; ++i) row(i, Eigen::Index(a)) = eval_eigenfunction(m, basis[a], {i * h, j * h});
    }
    G.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose());
  }
  G = G.selfadjointView<Eigen::Lower>();
  G *= h * h;
  const double err = (G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  const double t = sw.seconds();
  return {err < kGramTol && t < kGramSeconds,
          "max|G-I|=" + fmt(err) + " (tol " + fmt(kGramTol) + "), " + fmt(t, 3) + " s (limit " + fmt(kGramSeconds) + ")"};
}

Outcome link_identity() {
  const Stopwatch sw;
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& m : {SurfaceModel::torus(), SurfaceModel::dirichlet_rectangle()}) {
    std::uint64_t ord = 0;
    for (int k = 0; k < 100; ++k) {
      const Point p = uniform_point(m, 2, ord);
      const Point q = uniform_point(m, 2, ord);
      for (auto [L1, L2] : {std::pair{10.0, 100.0}, std::pair{100.0, 1000.0}}) {
        worst = std::max(worst, link_residual(m, L1, L2, p, q).relative);
        ++checks;
      }
    }
  }
  const double t = sw.seconds();
  return {worst < kLinkTol && t < kLinkSeconds, "max relative |R(L1)-R(L2)|=" + fmt(worst) + " over " +
                                                    std::to_string(checks) + " checks, " + fmt(t, 3) + " s"};
}

std::vector<PointPair> in_range_pairs(const SurfaceModel& m, std::size_t count, std::uint64_t seed) {
  const double r = m.in_range_radius();
  std::uint64_t ord = 0;
  std::vector<PointPair> out;
  while (out.size() < count) {
    const Point p = uniform_point(m, seed, ord);
    const double rho = out.empty() ? 0.0 : r * uniform_open(seed, Stream::auxiliary, ord++);
    const double theta = 2 * kPi * uniform_open(seed, Stream::auxiliary, ord++);
    Point q{p.x + rho * std::cos(theta), p.y + rho * std::sin(theta)};
    if (!m.has_boundary()) q = m.reduce(q);
    if (!m.contains(q) || !pair_in_range(m, p, q)) continue;
    out.push_back({p, q});
  }
  return out;
}

Outcome covariance_asymptotics() {
  const Stopwatch sw;
  std::string detail;
  bool pass = true;
  for (const auto& m : {SurfaceModel::torus(), SurfaceModel::dirichlet_rectangle()}) {
    const auto pairs = in_range_pairs(m, 200, 3);
    const std::vector<double> Ls{1e2, 1e3, 1e4};
    const ResidualReport rep = asymptotic_residual(m, Ls, pairs);
    double lo = 1e300, hi = 0.0;
    detail += m.name() + " max|rho|:";
    for (double L : Ls) {
      const double v = rep.max_abs_at(L);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      detail += " " + fmt(v);
    }
    const double variation = (hi - lo) / hi;
    detail += " variation " + fmt(variation) + "; ";
    pass = pass && variation < kResidualVariation && rep.in_range_count == pairs.size() * Ls.size();
  }
  const double t = sw.seconds();
  detail += fmt(t, 3) + " s";
  return {pass && t < kResidualSeconds, detail};
}

Outcome sampler_consistency() {
  const Stopwatch sw;
  const auto m = SurfaceModel::torus();
  const double L = 25.0;
  const int N = nyquist_resolution(m, L);
  const CgffSampler sampler(m, {0.0, L}, N);
  const GridGeometry& g = sampler.synthesizer().geometry();
  std::vector<std::pair<std::size_t, std::size_t>> nodes;
  std::uint64_t ord = 0;
  for (int k = 0; k < 20; ++k) {
    const auto pick = [&] { return std::size_t(uniform_open(9, Stream::auxiliary, ord++) * double(g.node_count())); };
    const std::size_t a = pick();
    nodes.push_back({a, k < 2 ? a : pick()});
  }
  const std::size_t n = 10000;
  std::vector<double> sum(nodes.size(), 0.0), sum2(nodes.size(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const FieldSample f = sampler.sample(replicate_seed(4, s), false);
    const auto v = f.grid.values();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double x = v[nodes[k].first] * v[nodes[k].second];
      sum[k] += x;
      sum2[k] += x * x;
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double mean = sum[k] / n;
    const double se = std::sqrt((sum2[k] / n - mean * mean) / (n - 1));
    const auto pi = nodes[k].first, qi = nodes[k].second;
    const Point p = g.node(int(pi % g.nx()), int(pi / g.nx()));
    const Point q = g.node(int(qi % g.nx()), int(qi / g.nx()));
    worst = std::max(worst, std::abs(mean - covariance(m, L, p, q)) / se);
  }
  const double t = sw.seconds();
  return {worst < kSamplerSE && t < kSamplerSeconds,
          "max |emp - G_L| / SE = " + fmt(worst) + " over 20 pairs, 1e4 seeds, " + fmt(t, 3) + " s"};
}

Outcome two_scale() {
  const Stopwatch sw;
  const auto m = SurfaceModel::torus();
  const double L = 1e4, alpha = 0.5;
  const int N = nyquist_resolution(m, L);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FieldSample full = sample_cgff(m, L, seed, N);
    const TwoScaleSample two = sample_two_scale(m, L, alpha, seed, N);
    double scale = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < full.grid.values().size(); ++k) {
      const double a = full.grid.values()[k];
      scale = std::max(scale, std::abs(a));
      diff = std::max(diff, std::abs(a - two.low.grid.values()[k] - two.high.grid.values()[k]));
    }
    worst = std::max(worst, diff / scale);
  }
  const double sep = 0.3 * 2 * kPi;
  double lo = 0.0, hi = 0.0;
  std::uint64_t ord = 0;
  const int pairs = 20;
  for (int k = 0; k < pairs; ++k) {
    const Point p = uniform_point(m, 6, ord);
    const double theta = 2 * kPi * uniform_open(6, Stream::auxiliary, ord++);
    const Point q{p.x + sep * std::cos(theta), p.y + sep * std::sin(theta)};
    lo += std::abs(band_covariance(m, 1e2, alpha, p, q)) / pairs;
    hi += std::abs(band_covariance(m, 1e4, alpha, p, q)) / pairs;
  }
  const double factor = lo / hi;
  const double t = sw.seconds();
  return {worst < kAdditivityTol && factor >= kDecayFactor && t < kTwoScaleSeconds,
          "additivity " + fmt(worst) + " relative; mean |G_band| " + fmt(lo) + " -> " + fmt(hi) + " (factor " +
              fmt(factor) + "), " + fmt(t, 3) + " s"};
}

Outcome capacity() {
  const Stopwatch sw;
  std::string detail;
  bool pass = true;
  SolverOptions opts;
  opts.tol = 1e-9;

  {
    const auto m = SurfaceModel::dirichlet_rectangle();
    const double R = 1.5, r = 0.3;
    const Shape inner = Disk{kPi / 2, kPi / 2, r};
    const Shape outer = Disk{kPi / 2, kPi / 2, R};
    const DomainMask mask =
        DomainMask::from_shapes(GridGeometry(m, 512), std::span(&inner, 1)).with_exterior_outside(std::span(&outer, 1));
    const double cap = solve_capacity_primal(mask, opts).primal;
    const double err = std::abs(cap / (kPi / std::log(R / r)) - 1.0);
    detail += "disk-in-disk rel err " + fmt(err) + "; ";
    pass = pass && err < kDiskTol;
  }
  {
    const auto m = SurfaceModel::dirichlet_rectangle();
    const Shape d = Disk{kPi / 2, kPi / 2, 0.1 * kPi};
    std::vector<double> gaps;
    for (int N : {256, 512, 1024}) {
      const CapacityResult c = solve_capacity(DomainMask::from_shapes(GridGeometry(m, N), std::span(&d, 1)), opts);
      gaps.push_back(c.gap / c.primal);
    }
    detail += "rectangle gaps " + fmt(gaps[0]) + " " + fmt(gaps[1]) + " " + fmt(gaps[2]) + "; ";
    pass = pass && gaps[1] < kGapTol && gaps[1] < gaps[0] && gaps[2] < gaps[1];
  }
  {
    const auto m = SurfaceModel::torus();
    const Shape d = Disk{kPi, kPi, 0.1 * 2 * kPi};
    const CapacityResult c = solve_capacity(DomainMask::from_shapes(GridGeometry(m, 512), std::span(&d, 1)), opts);
    detail += "torus gap at 512 " + fmt(c.gap / c.primal) + "; ";
    pass = pass && c.gap / c.primal < kGapTol && c.gap >= 0.0;
  }
  {
    SolverOptions tight;
    tight.tol = 1e-12;
    tight.max_sweeps = 2000000;
    double worst = 0.0;
    const std::vector<std::pair<SurfaceModel, Shape>> cases{
        {SurfaceModel::torus(), Disk{kPi, kPi, 1.3}},
        {SurfaceModel::torus(), Rect{1.0, 1.0, 3.0, 2.0}},
        {SurfaceModel::dirichlet_rectangle(), Disk{kPi / 2, kPi / 2, 0.7}},
        {SurfaceModel::dirichlet_rectangle(), Rect{0.5, 1.0, 2.0, 1.6}},
    };
    for (const auto& [model, shape] : cases) {
      for (int N : {6, 8}) {
        const DomainMask mask = DomainMask::from_shapes(GridGeometry(model, N), std::span(&shape, 1));
        const GridGeometry& g = mask.geometry();
        std::vector<std::size_t> constrained;
        std::vector<double> lower(g.node_count(), 0.0);
        for (std::size_t k = 0; k < g.node_count(); ++k) {
          if (mask.inside(k)) {
            constrained.push_back(k);
            lower[k] = 1.0;
          }
        }
        if (constrained.empty() || constrained.size() > 16) continue;
        const auto ref = oracle::active_set_minimum(g, constrained, lower);
        const CapacityResult res = solve_capacity_primal(mask, tight);
        worst = std::max(worst, std::abs(res.primal - ref.energy) / ref.energy);
        for (std::size_t k = 0; k < ref.h.size(); ++k) {
          worst = std::max(worst, std::abs(res.minimizer.values()[k] - ref.h[k]));
        }
      }
    }
    detail += "oracle max dev " + fmt(worst) + "; ";
    pass = pass && worst < kOracleTol;
  }
  {
    const auto m = SurfaceModel::dirichlet_rectangle();
    const Shape d = Disk{kPi / 2, kPi / 2, 0.3};
    double worst = 0.0;
    for (double s : {0.5, 2.0}) {
      worst = std::max(worst, conformal_invariance_check(m, std::span(&d, 1), s, 128, opts).relative_difference);
    }
    detail += "conformal max rel diff " + fmt(worst) + "; ";
    pass = pass && worst < kConformalTol;
  }
  const double t = sw.seconds();
  detail += fmt(t, 3) + " s";
  return {pass && t < kCapacitySeconds, detail};
}

Outcome supremum_growth() {
  const Stopwatch sw;
  const auto m = SurfaceModel::torus();
  std::vector<double> x, y;
  std::string detail = "medians:";
  for (double L : {1e2, 1e3, 1e4, 1e5}) {
    const auto sups = sample_suprema(m, L, 200, 7);
    x.push_back(std::log(std::sqrt(L)));
    y.push_back(median(sups));
    detail += " " + fmt(y.back());
  }
  const LinearFit fit = least_squares(x, y);
  const double t = sw.seconds();
  detail += "; slope " + fmt(fit.slope) + " (target " + fmt(sup_constant()) + "), " + fmt(t, 3) + " s";
  return {fit.slope >= kSlopeLow && fit.slope <= kSlopeHigh && t < kSupSeconds, detail};
}

Outcome hole_probability() {
  const Stopwatch sw;
  const auto m = SurfaceModel::torus();
  const Shape d = Disk{kPi, kPi, 0.1 * 2 * kPi};
  const std::size_t n = 100000;
  auto mask_for = [&](double L) {
    return DomainMask::from_shapes(GridGeometry(m, hole_resolution(m, L)), std::span(&d, 1));
  };
  HoleOptions imp;
  imp.method = EstimatorMethod::importance;
  const DomainMask m25 = mask_for(25.0);
  const TailEstimate plain = estimate_hole_probability(m, 25.0, m25, n, 11);
  const TailEstimate is25 = estimate_hole_probability(m, 25.0, m25, n, 11, imp);
  const bool overlap = plain.ci.lower <= is25.ci.upper && is25.ci.lower <= plain.ci.upper;
  std::string detail = "L=25 plain " + fmt(plain.estimate) + " [" + fmt(plain.ci.lower) + "," + fmt(plain.ci.upper) +
                       "] importance " + fmt(is25.estimate) + " [" + fmt(is25.ci.lower) + "," + fmt(is25.ci.upper) +
                       "]; rescaled:";
  std::vector<double> rescaled{is25.log_rescaled};
  for (double L : {100.0, 400.0}) {
    rescaled.push_back(estimate_hole_probability(m, L, mask_for(L), n, 11, imp).log_rescaled);
  }
  bool trend = true;
  for (std::size_t k = 0; k < rescaled.size(); ++k) {
    detail += " " + fmt(rescaled[k]);
    trend = trend && std::isfinite(rescaled[k]) && rescaled[k] < 0.0;
    if (k > 0) trend = trend && rescaled[k] < rescaled[k - 1];
  }
  const double t = sw.seconds();
  detail += std::string("; CIs ") + (overlap ? "overlap" : "disjoint") + ", trend " +
            (trend ? "strictly decreasing" : "not strictly decreasing") + ", " + fmt(t, 4) + " s";
  return {overlap && trend && t < kHoleSeconds, detail};
}

Outcome dgff_oracle() {
  const Stopwatch sw;
  const std::size_t n = 100000;
  const int N = 16, M = N - 2;
  const DgffSampler sampler(N);
  const Eigen::MatrixXd exact = oracle::dgff_covariance(N);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(M * M, M * M);
  Eigen::MatrixXd block(M * M, 64);
  std::size_t filled = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const DgffSample f = sampler.sample(replicate_seed(12, s));
    for (int b = 1; b <= M; ++b) {
      for (int a = 1; a <= M; ++a) block((b - 1) * M + (a - 1), Eigen::Index(filled)) = f.at(a, b);
    }
    if (++filled == std::size_t(block.cols()) || s + 1 == n) {
      acc.selfadjointView<Eigen::Lower>().rankUpdate(block.leftCols(Eigen::Index(filled)));
      filled = 0;
    }
  }
  acc = acc.selfadjointView<Eigen::Lower>();
  acc /= double(n);
  double worst = 0.0;
  for (int i = 0; i < M * M; ++i) {
    for (int j = 0; j < M * M; ++j) {
      const double se = std::sqrt((exact(i, i) * exact(j, j) + exact(i, j) * exact(i, j)) / double(n));
      worst = std::max(worst, std::abs(acc(i, j) - exact(i, j)) / se);
    }
  }
  const DgffSampler small(3);
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double v = small.sample(replicate_seed(13, s)).at(1, 1);
    sum += v * v;
  }
  const double var = sum / double(n);
  const double center_se = std::sqrt(2.0) * 0.25 / std::sqrt(double(n));
  const double center_dev = std::abs(var - 0.25) / center_se;
  const double t = sw.seconds();
  return {worst < kDgffSE && center_dev < kDgffCenterSE && t < kDgffSeconds,
          "N=16 max dev " + fmt(worst) + " SE; N=3 centre variance " + fmt(var, 6) + " (" + fmt(center_dev) +
              " SE), " + fmt(t, 3) + " s"};
}

Outcome performance() {
  const auto m = SurfaceModel::torus();
  const double L = 6e4;
  MonteCarloOptions one, eight;
  one.resolution = eight.resolution = 512;
  eight.threads = 8;
  sample_suprema(m, L, 2, 99, one);  // plans and basis are cached after this
  const Stopwatch s1;
  const auto a = sample_suprema(m, L, 100, 1, one);
  const double t1 = s1.seconds();
  const Stopwatch s8;
  const auto b = sample_suprema(m, L, 100, 1, eight);
  const double t8 = s8.seconds();
  const bool identical = a == b;
  const double speedup = t1 / t8;
  const unsigned hw = std::thread::hardware_concurrency();
  return {t1 < kSynthesisSeconds && identical && speedup >= kSpeedup,
          "100 samples at 512^2: " + fmt(t1, 3) + " s single-threaded, " + fmt(t8, 3) + " s on 8 workers (speedup " +
              fmt(speedup, 3) + ", need " + fmt(kSpeedup) + "), aggregates " + (identical ? "identical" : "differ") +
              ", hardware threads " + std::to_string(hw)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  bool strict = false;
  app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  app.add_flag("--strict", strict, "Exit 1 if any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{
      orthonormality,   link_identity,   covariance_asymptotics, sampler_consistency, two_scale,
      capacity,         supremum_growth, hole_probability,       dgff_oracle,         performance,
  };
  bool all = true;
  for (int k = 1; k <= int(criteria.size()); ++k) {
    if (only != 0 && k != only) continue;
    Outcome o;
    try {
      o = criteria[k - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "CRITERION " << k << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
    all = all && o.pass;
  }
  return strict && !all ? 1 : 0;
}
