#include "cgff/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cgff/error.hpp"
#include "cgff/kernel.hpp"
#include "cgff/parallel.hpp"
#include "cgff/rng.hpp"
#include "cgff/summation.hpp"

namespace cgff {

namespace {

constexpr double kZ95 = 1.959963984540054;
constexpr double kEssFloor = 50.0;

double log_sqrt(double L) { return 0.5 * std::log(L); }

double rescale_log(double p, double L) {
  const double s = log_sqrt(L);
  return p > 0.0 ? std::log(p) / (s * s) : kNaN;
}

}  // namespace

double sup_constant() noexcept { return std::sqrt(2.0 / std::numbers::pi); }

ConfidenceInterval wilson_interval(std::size_t hits, std::size_t n, double z) {
  if (n == 0) throw Error("experiments", "Wilson interval needs n > 0");
  if (hits > n) throw Error("experiments", "hits exceed sample count");
  const double nn = double(n);
  const double p = double(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == n ? 1.0 : std::min(1.0, centre + half)};
}

std::string to_string(EstimatorMethod m) { return m == EstimatorMethod::plain ? "plain" : "importance"; }

double median(std::vector<double> v) {
  if (v.empty()) throw Error("experiments", "median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid));
  return 0.5 * (lo + hi);
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("experiments", "least squares needs >= 2 points");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error("experiments", "least squares needs distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

// ---------------------------------------------------------------------------
// Supremum tail

std::vector<double> sample_suprema(const SurfaceModel& model, double L, std::size_t n, std::uint64_t seed,
                                   const MonteCarloOptions& options, bool minima) {
  const int res = options.resolution > 0 ? options.resolution : nyquist_resolution(model, L);
  const CgffSampler sampler(model, {0.0, L}, res);
  std::vector<double> out(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const FieldSample s = sampler.sample(replicate_seed(seed, i), false);
    out[i] = minima ? s.grid.min() : s.grid.max();
  });
  return out;
}

TailEstimate estimate_sup_tail(const SurfaceModel& model, double L, double threshold, std::size_t n,
                               std::uint64_t seed, const MonteCarloOptions& options) {
  if (n < 100) throw Error("experiments", "supremum tail needs n >= 100 samples");
  if (std::isnan(threshold)) throw Error("experiments", "threshold must not be NaN");
  const std::vector<double> sups = sample_suprema(model, L, n, seed, options);
  std::size_t hits = 0;
  for (double s : sups) hits += s > threshold ? 1 : 0;

  TailEstimate t;
  t.event = "sup phi_L > " + std::to_string(threshold);
  t.L = L;
  t.samples = n;
  t.method = EstimatorMethod::plain;
  t.hits = hits;
  t.estimate = double(hits) / double(n);
  t.ci = wilson_interval(hits, n);
  t.one_sided = hits == 0;
  t.standard_error = std::sqrt(t.estimate * (1.0 - t.estimate) / double(n));
  t.log_rescaled = rescale_log(t.estimate, L);
  t.effective_sample_size = double(n);
  t.median_sup = median(sups);
  t.median_sup_ratio = t.median_sup / log_sqrt(L);
  t.resolution = options.resolution > 0 ? options.resolution : nyquist_resolution(model, L);
  return t;
}

// ---------------------------------------------------------------------------
// Hole probability

int hole_resolution(const SurfaceModel& model, double L) { return 4 * nyquist_resolution(model, L); }

std::vector<double> project_to_band(const CgffSampler& sampler, const Grid& h) {
  const auto pairs = sampler.band_pairs();
  std::vector<double> c = sampler.synthesizer().analyze(pairs, h);
  for (std::size_t n = 0; n < c.size(); ++n) c[n] *= std::sqrt(pairs[n].lambda);
  return c;
}

TailEstimate estimate_hole_probability(const SurfaceModel& model, double L, const DomainMask& mask,
                                       std::size_t n, std::uint64_t seed, const HoleOptions& options) {
  const GridGeometry& g = mask.geometry();
  if (!(g.model() == model)) throw Error("experiments", "mask belongs to a different surface model");
  if (n == 0) throw Error("experiments", "hole probability needs n > 0");
  if (mask.empty()) throw Error("experiments", "domain mask is empty");
  const int min_res = hole_resolution(model, L);
  if (g.resolution() < min_res) {
    throw Error("experiments", "hole runs need resolution >= 4x Nyquist; use " + std::to_string(min_res));
  }
  const CgffSampler sampler(model, {0.0, L}, g.resolution());

  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (mask.inside(k)) nodes.push_back(k);
  }
  auto positive_on_D = [&](const Grid& f) {
    const auto v = f.values();
    return std::all_of(nodes.begin(), nodes.end(), [&](std::size_t k) { return v[k] > 0.0; });
  };

  TailEstimate t;
  t.event = "phi_L > 0 on D";
  t.L = L;
  t.samples = n;
  t.method = options.method;
  t.resolution = g.resolution();

  if (options.method == EstimatorMethod::plain) {
    std::vector<std::uint8_t> ind(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
      ind[i] = positive_on_D(sampler.sample(replicate_seed(seed, i), false).grid) ? 1 : 0;
    });
    std::size_t hits = 0;
    for (auto b : ind) hits += b;
    t.hits = hits;
    t.estimate = double(hits) / double(n);
    t.standard_error = std::sqrt(t.estimate * (1.0 - t.estimate) / double(n));
    t.effective_sample_size = double(n);
    if (hits == 0) {
      t.one_sided = true;
      t.use_importance = true;
      t.ci = {0.0, 1.0 - std::pow(0.05, 1.0 / double(n))};
    } else {
      t.ci = wilson_interval(hits, n);
    }
    t.log_rescaled = rescale_log(t.estimate, L);
    return t;
  }

  Grid h = options.shift ? *options.shift : solve_capacity_primal(mask, options.capacity).minimizer;
  if (!(h.geometry() == g)) throw Error("experiments", "shift direction grid does not match the mask");
  const ShiftDirection dir = make_shift_direction(sampler, project_to_band(sampler, h));
  const double tilt = std::isnan(options.t) ? sup_constant() * log_sqrt(L) : options.t;

  std::vector<double> Y(n), W(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const FieldSample s = sampler.sample(replicate_seed(seed, i), true);
    const ShiftedSample sh = shift_field(s, dir, tilt);
    const double w = std::exp(sh.log_weight);
    W[i] = w;
    Y[i] = positive_on_D(sh.sample.grid) ? w : 0.0;
  });

  CompensatedSum sy, sw;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sy += Y[i];
    sw += W[i];
    hits += Y[i] > 0.0 ? 1 : 0;
  }
  const double nn = double(n);
  const double mean_y = sy.value() / nn;
  const double mean_w = sw.value() / nn;
  CompensatedSum vy, vw, y2;
  for (std::size_t i = 0; i < n; ++i) {
    vy += (Y[i] - mean_y) * (Y[i] - mean_y);
    vw += (W[i] - mean_w) * (W[i] - mean_w);
    y2 += Y[i] * Y[i];
  }
  const double denom = n > 1 ? nn - 1.0 : 1.0;
  t.hits = hits;
  t.estimate = mean_y;
  t.standard_error = std::sqrt(vy.value() / denom / nn);
  t.weight_mean = mean_w;
  t.weight_standard_error = std::sqrt(vw.value() / denom / nn);
  t.effective_sample_size = y2.value() > 0.0 ? sy.value() * sy.value() / y2.value() : 0.0;
  if (mean_y > 0.0) {
    double rel = t.standard_error / mean_y;
    if (t.effective_sample_size < kEssFloor) {
      rel = std::max(rel, 1.0 / std::sqrt(t.effective_sample_size));
      t.ess_floor_applied = true;
    }
    t.ci = {mean_y * std::exp(-kZ95 * rel), mean_y * std::exp(kZ95 * rel)};
  } else {
    t.one_sided = true;
    t.ci = {0.0, 0.0};
  }
  t.log_rescaled = rescale_log(t.estimate, L);
  return t;
}

// ---------------------------------------------------------------------------
// Box embedding

Point BoxEmbedding::map(LatticePoint x) const {
  return model.reduce({origin.x + spacing * x.x, origin.y + spacing * x.y});
}

BoxEmbedding embed_box(const SurfaceModel& model, double delta, double alpha, double L,
                       std::optional<Point> origin, std::uint64_t check_seed) {
  const double delta_max = 1.0 / (2.0 * std::numbers::sqrt2);
  if (!(delta > 0.0 && delta < delta_max)) throw Error("experiments", "delta must lie in (0, 1/(2 sqrt 2))");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("experiments", "alpha must lie in [0,1)");
  if (!(L > 1.0) || !std::isfinite(L)) throw Error("experiments", "embedding needs a finite L > 1");

  BoxEmbedding e{model, delta, alpha, L, 0, {}, delta / std::sqrt(L), {}};
  const std::int64_t M = snapped_floor(std::pow(L, (1.0 - alpha) / 2.0));
  if (M < 2) throw Error("experiments", "box V_M has fewer than 2 points per side");
  if (M > 1'000'000) throw Error("experiments", "box side too large");
  e.side = int(M);
  const double extent = double(M - 1) * e.spacing;
  e.origin = origin.value_or(Point{(model.side_x() - extent) / 2.0, (model.side_y() - extent) / 2.0});

  if (model.has_boundary()) {
    if (!(e.origin.x > 0.0 && e.origin.y > 0.0 && e.origin.x + extent < model.side_x() &&
          e.origin.y + extent < model.side_y())) {
      throw Error("experiments", "embedded box leaves the rectangle interior");
    }
  } else if (!(std::numbers::sqrt2 * extent < std::min(model.side_x(), model.side_y()) / 2.0)) {
    throw Error("experiments", "embedded box exceeds the injectivity-safe region of the torus");
  }

  RatioCheck& c = e.check;
  c.min_ratio = std::numeric_limits<double>::infinity();
  c.max_ratio = 0.0;
  const double root = std::sqrt(L);
  auto test = [&](LatticePoint a, LatticePoint b) {
    const double lat = std::hypot(double(a.x - b.x), double(a.y - b.y));
    const double r = root * geodesic_distance(model, e.map(a), e.map(b)) / lat;
    c.min_ratio = std::min(c.min_ratio, r);
    c.max_ratio = std::max(c.max_ratio, r);
    ++c.pairs_checked;
  };
  if (M <= 64) {
    c.exhaustive = true;
    const int m = int(M);
    for (int k1 = 0; k1 < m * m; ++k1) {
      for (int k2 = k1 + 1; k2 < m * m; ++k2) test({k1 % m, k1 / m}, {k2 % m, k2 / m});
    }
  } else {
    std::uint64_t ord = 0;
    while (c.pairs_checked < 10000) {
      auto draw = [&] { return int(uniform_open(check_seed, Stream::auxiliary, ord++) * double(M)); };
      const LatticePoint a{draw(), draw()};
      const LatticePoint b{draw(), draw()};
      if (a.x == b.x && a.y == b.y) continue;
      test(a, b);
    }
  }
  if (c.min_ratio < delta / 2.0 || c.max_ratio > 2.0 * delta) {
    throw Error("experiments", "embedding distortion outside [delta/2, 2 delta]");
  }
  return e;
}

std::vector<std::pair<LatticePoint, LatticePoint>> random_lattice_pairs(const BoxEmbedding& e,
                                                                        std::size_t count,
                                                                        std::uint64_t seed) {
  std::vector<std::pair<LatticePoint, LatticePoint>> out;
  std::uint64_t ord = 0;
  auto draw = [&] {
    return std::min(e.side - 1, int(uniform_open(seed, Stream::auxiliary, ord++) * double(e.side)));
  };
  for (std::size_t i = 0; i < count; ++i) {
    const LatticePoint a{draw(), draw()};
    const LatticePoint b = i == 0 ? a : LatticePoint{draw(), draw()};
    out.emplace_back(a, b);
  }
  return out;
}

LogCorrelationReport check_log_correlated(const SurfaceModel& model, double L, double alpha,
                                          const BoxEmbedding& embedding,
                                          const std::vector<std::pair<LatticePoint, LatticePoint>>& pairs) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("experiments", "alpha must lie in [0,1)");
  if (!(embedding.model == model)) throw Error("experiments", "embedding belongs to a different model");
  const double two_pi = 2.0 * std::numbers::pi;
  const double ls = log_sqrt(L);
  LogCorrelationReport rep;
  if (alpha == 0.0) rep.max_rescaled_residual = 0.0;
  CompensatedSum sum;
  auto check_point = [&](LatticePoint p) {
    if (p.x < 0 || p.y < 0 || p.x >= embedding.side || p.y >= embedding.side) {
      throw Error("experiments", "lattice point outside the embedded box");
    }
  };
  for (const auto& [x, y] : pairs) {
    check_point(x);
    check_point(y);
    LogCorrelationRow row;
    row.x = x;
    row.y = y;
    row.lattice_distance = std::hypot(double(x.x - y.x), double(x.y - y.y));
    const Point p = embedding.map(x);
    const Point q = embedding.map(y);
    row.covariance = alpha == 0.0 ? covariance(model, L, p, q) : band_covariance(model, L, alpha, p, q);
    const double lp = log_plus(row.lattice_distance);
    row.predicted = (1.0 - alpha) / two_pi * ls - lp / two_pi;
    row.residual = std::abs(row.covariance - row.predicted);
    if (alpha == 0.0) {
      row.rescaled_residual = std::abs(two_pi * row.covariance - ls + lp);
      rep.max_rescaled_residual = std::max(rep.max_rescaled_residual, row.rescaled_residual);
    }
    rep.max_residual = std::max(rep.max_residual, row.residual);
    sum += row.residual;
    rep.rows.push_back(row);
  }
  if (!rep.rows.empty()) rep.mean_residual = sum.value() / double(rep.rows.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Low-band statistics

double low_point_area(const FieldSample& low, const DomainMask& mask, double eta, double L) {
  if (!(mask.geometry() == low.grid.geometry())) throw Error("experiments", "mask grid does not match the sample");
  if (!(L > 1.0)) throw Error("experiments", "low-point area needs L > 1");
  const double threshold = (sup_constant() - eta) * log_sqrt(L);
  const auto v = low.grid.values();
  std::size_t count = 0;
  for (std::size_t k = 0; k < v.size(); ++k) count += (mask.inside(k) && v[k] < threshold) ? 1 : 0;
  return double(count) * mask.geometry().cell_area();
}

double modulus_of_continuity(const FieldSample& low, double delta, double alpha, double L) {
  if (!(delta >= 0.0)) throw Error("experiments", "delta must be >= 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("experiments", "alpha must lie in [0,1)");
  if (!(L > 0.0)) throw Error("experiments", "L must be > 0");
  const GridGeometry& g = low.grid.geometry();
  const double scale = std::pow(L, -alpha / 2.0);
  if (std::max(g.hx(), g.hy()) > scale / 2.0) {
    throw Error("experiments", "grid spacing does not resolve the L^(-alpha/2) scale; refine the grid");
  }
  const double r = delta * scale;
  const int Rx = int(std::floor(r / g.hx()));
  const int Ry = int(std::floor(r / g.hy()));
  const int nx = g.nx();
  const int ny = g.ny();
  const auto v = low.grid.values();
  double best = 0.0;
  for (int dj = 0; dj <= Ry; ++dj) {
    for (int di = -Rx; di <= Rx; ++di) {
      if (dj == 0 && di <= 0) continue;
      if (std::hypot(di * g.hx(), dj * g.hy()) > r * (1.0 + 1e-12)) continue;
      for (int j = 0; j < ny; ++j) {
        int j2 = j + dj;
        if (g.periodic()) j2 %= ny;
        else if (j2 >= ny) continue;
        for (int i = 0; i < nx; ++i) {
          int i2 = i + di;
          if (g.periodic()) i2 = ((i2 % nx) + nx) % nx;
          else if (i2 < 0 || i2 >= nx) continue;
          best = std::max(best, std::abs(v[g.index(i, j)] - v[g.index(i2, j2)]));
        }
      }
    }
  }
  return best;
}

}  // namespace cgff
