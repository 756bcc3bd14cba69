#include "cgff/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

#include "cgff/error.hpp"
#include "cgff/field.hpp"
#include "cgff/kernel.hpp"
#include "cgff/summation.hpp"
#include "fftw_support.hpp"

namespace cgff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Stencil {
  double wx;  // weight of horizontal edges
  double wy;  // weight of vertical edges
  double diag() const noexcept { return 2.0 * (wx + wy); }
};

Stencil stencil(const GridGeometry& g) { return {g.hy() / g.hx(), g.hx() / g.hy()}; }

// Neighbour indices; only valid for interior nodes on the rectangle.
struct Neighbours {
  std::size_t left, right, down, up;
};

Neighbours neighbours(const GridGeometry& g, int i, int j) {
  const int nx = g.nx();
  const int ny = g.ny();
  if (g.periodic()) {
    const int il = i == 0 ? nx - 1 : i - 1;
    const int ir = i == nx - 1 ? 0 : i + 1;
    const int jd = j == 0 ? ny - 1 : j - 1;
    const int ju = j == ny - 1 ? 0 : j + 1;
    return {g.index(il, j), g.index(ir, j), g.index(i, jd), g.index(i, ju)};
  }
  return {g.index(i - 1, j), g.index(i + 1, j), g.index(i, j - 1), g.index(i, j + 1)};
}

// Smallest eigenvalue strictly above the cutoff, or a lower bound for it.
double first_omitted(const SurfaceModel& m, double L) {
  if (!m.isotropic()) return L;
  const double unit = m.wavenumber_x() * m.wavenumber_x();
  return double(snapped_floor(L / unit) + 1) * unit;
}

double sinc(double x) noexcept { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

double area_weighted_mean(const GridGeometry& g, std::span<const double> h) {
  return Grid(g, std::vector<double>(h.begin(), h.end())).mean();
}

}  // namespace

// ---------------------------------------------------------------------------
// Shapes and masks

bool shape_contains(const SurfaceModel& model, const Shape& shape, Point p) {
  if (const auto* d = std::get_if<Disk>(&shape)) {
    if (model.has_boundary()) return std::hypot(p.x - d->cx, p.y - d->cy) <= d->r;
    return geodesic_distance(model, p, {d->cx, d->cy}) <= d->r;
  }
  const auto& r = std::get<Rect>(shape);
  auto in = [&](Point q) { return q.x >= r.x0 && q.x <= r.x1 && q.y >= r.y0 && q.y <= r.y1; };
  if (model.has_boundary()) return in(p);
  for (int sx = -1; sx <= 1; ++sx) {
    for (int sy = -1; sy <= 1; ++sy) {
      if (in({p.x + sx * model.side_x(), p.y + sy * model.side_y()})) return true;
    }
  }
  return false;
}

Shape scale_shape(const Shape& shape, double s) {
  if (const auto* d = std::get_if<Disk>(&shape)) return Disk{s * d->cx, s * d->cy, s * d->r};
  const auto& r = std::get<Rect>(shape);
  return Rect{s * r.x0, s * r.y0, s * r.x1, s * r.y1};
}

DomainMask::DomainMask(GridGeometry geometry, std::vector<std::uint8_t> inside,
                       std::vector<std::uint8_t> exterior)
    : geometry_(geometry), inside_(std::move(inside)), exterior_(std::move(exterior)) {
  if (inside_.size() != geometry_.node_count()) throw Error("capacity", "mask size does not match the grid");
  if (exterior_.empty()) exterior_.assign(inside_.size(), 0);
  if (exterior_.size() != inside_.size()) throw Error("capacity", "exterior size does not match the grid");
  for (auto& v : inside_) v = v != 0;
  for (auto& v : exterior_) v = v != 0;
  count_ = static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), 1));
}

DomainMask DomainMask::from_shapes(const GridGeometry& geometry, std::span<const Shape> shapes) {
  std::vector<std::uint8_t> in(geometry.node_count(), 0);
  for (int j = 0; j < geometry.ny(); ++j) {
    for (int i = 0; i < geometry.nx(); ++i) {
      const Point p = geometry.node(i, j);
      for (const auto& s : shapes) {
        if (shape_contains(geometry.model(), s, p)) {
          in[geometry.index(i, j)] = 1;
          break;
        }
      }
    }
  }
  return DomainMask(geometry, std::move(in));
}

DomainMask DomainMask::with_exterior_outside(std::span<const Shape> keep) const {
  std::vector<std::uint8_t> ext(geometry_.node_count(), 0);
  for (int j = 0; j < geometry_.ny(); ++j) {
    for (int i = 0; i < geometry_.nx(); ++i) {
      const Point p = geometry_.node(i, j);
      bool kept = false;
      for (const auto& s : keep) kept = kept || shape_contains(geometry_.model(), s, p);
      ext[geometry_.index(i, j)] = kept ? 0 : 1;
    }
  }
  return DomainMask(geometry_, inside_, std::move(ext));
}

bool DomainMask::held_zero(std::size_t k) const noexcept {
  if (exterior_[k] != 0) return true;
  if (geometry_.periodic()) return false;
  const int i = static_cast<int>(k % geometry_.nx());
  const int j = static_cast<int>(k / geometry_.nx());
  return geometry_.on_boundary(i, j);
}

std::size_t DomainMask::free_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t k = 0; k < inside_.size(); ++k) n += held_zero(k) ? 0 : 1;
  return n;
}

double DomainMask::boundary_distance() const noexcept {
  if (geometry_.periodic()) return kInf;
  const auto& m = geometry_.model();
  double d = kInf;
  for (int j = 0; j < geometry_.ny(); ++j) {
    for (int i = 0; i < geometry_.nx(); ++i) {
      if (!inside(i, j)) continue;
      const Point p = geometry_.node(i, j);
      d = std::min({d, p.x, m.side_x() - p.x, p.y, m.side_y() - p.y});
    }
  }
  return d;
}

std::vector<std::size_t> DomainMask::boundary_layer() const {
  std::vector<std::size_t> out;
  const int nx = geometry_.nx();
  const int ny = geometry_.ny();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!inside(i, j)) continue;
      if (!geometry_.periodic() && geometry_.on_boundary(i, j)) {
        out.push_back(geometry_.index(i, j));
        continue;
      }
      const Neighbours nb = neighbours(geometry_, i, j);
      if (!inside_[nb.left] || !inside_[nb.right] || !inside_[nb.down] || !inside_[nb.up]) {
        out.push_back(geometry_.index(i, j));
      }
    }
  }
  return out;
}

void DomainMask::validate_for_capacity() const {
  if (empty()) throw Error("capacity", "domain mask is empty");
  if (geometry_.periodic() && std::count(exterior_.begin(), exterior_.end(), 1) > 0) {
    throw Error("capacity", "exterior (held-zero) nodes are only supported on the rectangle");
  }
  std::size_t free_nodes = 0;
  for (std::size_t k = 0; k < inside_.size(); ++k) {
    if (held_zero(k)) {
      if (inside_[k]) {
        throw Error("capacity", "domain touches the outer boundary or the exterior region");
      }
    } else {
      ++free_nodes;
    }
  }
  if (count_ >= free_nodes) throw Error("capacity", "domain mask covers the whole surface");
}

// ---------------------------------------------------------------------------
// Discrete operator

std::vector<double> apply_laplacian(const GridGeometry& g, std::span<const double> h) {
  if (h.size() != g.node_count()) throw Error("capacity", "grid function has the wrong size");
  const Stencil st = stencil(g);
  const int nx = g.nx();
  const int ny = g.ny();
  std::vector<double> out(h.size(), 0.0);
  auto edge = [&](std::size_t a, std::size_t b, double w) {
    const double d = w * (h[a] - h[b]);
    out[a] += d;
    out[b] -= d;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      if (i + 1 < nx) edge(k, g.index(i + 1, j), st.wx);
      else if (g.periodic()) edge(k, g.index(0, j), st.wx);
      if (j + 1 < ny) edge(k, g.index(i, j + 1), st.wy);
      else if (g.periodic()) edge(k, g.index(i, 0), st.wy);
    }
  }
  return out;
}

double dirichlet_energy(const GridGeometry& g, std::span<const double> h) {
  if (h.size() != g.node_count()) throw Error("capacity", "grid function has the wrong size");
  const Stencil st = stencil(g);
  const int nx = g.nx();
  const int ny = g.ny();
  CompensatedSum e;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double v = h[g.index(i, j)];
      if (i + 1 < nx || g.periodic()) {
        const double d = v - h[g.index(i + 1 < nx ? i + 1 : 0, j)];
        e += st.wx * d * d;
      }
      if (j + 1 < ny || g.periodic()) {
        const double d = v - h[g.index(i, j + 1 < ny ? j + 1 : 0)];
        e += st.wy * d * d;
      }
    }
  }
  return 0.5 * e.value();
}

// ---------------------------------------------------------------------------
// Projected SOR

ObstacleProblem::ObstacleProblem(const GridGeometry& g)
    : geometry(g),
      fixed(g.node_count(), 0),
      fixed_value(g.node_count(), 0.0),
      lower(g.node_count(), -kInf),
      load(g.node_count(), 0.0) {
  if (!g.periodic()) {
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        if (g.on_boundary(i, j)) fixed[g.index(i, j)] = 1;
      }
    }
  }
}

double obstacle_objective(const ObstacleProblem& p, std::span<const double> h) {
  CompensatedSum lin;
  for (std::size_t k = 0; k < h.size(); ++k) lin += p.load[k] * h[k];
  return dirichlet_energy(p.geometry, h) + lin.value();
}

namespace {

void check_problem(const ObstacleProblem& p) {
  const std::size_t n = p.geometry.node_count();
  if (p.fixed.size() != n || p.fixed_value.size() != n || p.lower.size() != n || p.load.size() != n) {
    throw Error("capacity", "obstacle problem arrays do not match the grid");
  }
  const GridGeometry& g = p.geometry;
  if (!g.periodic()) {
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        if (g.on_boundary(i, j) && !p.fixed[g.index(i, j)]) {
          throw Error("capacity", "rectangle boundary nodes must be fixed");
        }
      }
    }
  }
}

double projected_residual(const ObstacleProblem& p, std::span<const double> h) {
  const GridGeometry& g = p.geometry;
  const Stencil st = stencil(g);
  const double diag = st.diag();
  double r = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (p.fixed[k]) continue;
      const Neighbours nb = neighbours(g, i, j);
      double grad = diag * h[k] - st.wx * (h[nb.left] + h[nb.right]) - st.wy * (h[nb.down] + h[nb.up]) +
                    p.load[k];
      if (h[k] <= p.lower[k]) grad = std::min(grad, 0.0);
      r = std::max(r, std::abs(grad) / diag);
    }
  }
  return r;
}

void sweep(const ObstacleProblem& p, std::vector<double>& h, double omega) {
  const GridGeometry& g = p.geometry;
  const Stencil st = stencil(g);
  const double inv_diag = 1.0 / st.diag();
  const int nx = g.nx();
  const int ny = g.ny();
  for (int color = 0; color < 2; ++color) {
    for (int j = 0; j < ny; ++j) {
      for (int i = (color + j) & 1; i < nx; i += 2) {
        const std::size_t k = g.index(i, j);
        if (p.fixed[k]) continue;
        const Neighbours nb = neighbours(g, i, j);
        const double gs =
            (st.wx * (h[nb.left] + h[nb.right]) + st.wy * (h[nb.down] + h[nb.up]) - p.load[k]) * inv_diag;
        const double v = h[k] + omega * (gs - h[k]);
        h[k] = v < p.lower[k] ? p.lower[k] : v;
      }
    }
  }
}

void enforce_constraints(const ObstacleProblem& p, std::vector<double>& h) {
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (p.fixed[k]) h[k] = p.fixed_value[k];
    else if (h[k] < p.lower[k]) h[k] = p.lower[k];
  }
}

// Injection onto the grid with half the resolution; loads scale with cell area.
ObstacleProblem coarsen(const ObstacleProblem& p) {
  const GridGeometry& g = p.geometry;
  ObstacleProblem c(GridGeometry(g.model(), g.resolution() / 2));
  const GridGeometry& cg = c.geometry;
  const double scale = cg.cell_area() / g.cell_area();
  for (int j = 0; j < cg.ny(); ++j) {
    for (int i = 0; i < cg.nx(); ++i) {
      const std::size_t kc = cg.index(i, j);
      const std::size_t kf = g.index(2 * i, 2 * j);
      c.fixed[kc] = p.fixed[kf] || c.fixed[kc];
      c.fixed_value[kc] = p.fixed_value[kf];
      c.lower[kc] = p.lower[kf];
      c.load[kc] = scale * p.load[kf];
    }
  }
  return c;
}

std::vector<double> prolong(const GridGeometry& coarse, std::span<const double> hc, const GridGeometry& fine) {
  std::vector<double> h(fine.node_count());
  const int cnx = coarse.nx();
  const int cny = coarse.ny();
  auto at = [&](int i, int j) {
    if (coarse.periodic()) {
      i %= cnx;
      j %= cny;
    }
    return hc[coarse.index(i, j)];
  };
  for (int j = 0; j < fine.ny(); ++j) {
    for (int i = 0; i < fine.nx(); ++i) {
      const int i0 = i / 2;
      const int j0 = j / 2;
      const int i1 = (i & 1) ? i0 + 1 : i0;
      const int j1 = (j & 1) ? j0 + 1 : j0;
      h[fine.index(i, j)] = 0.25 * (at(i0, j0) + at(i1, j0) + at(i0, j1) + at(i1, j1));
    }
  }
  return h;
}

}  // namespace

SolverReport solve_obstacle(const ObstacleProblem& problem, const SolverOptions& options,
                            std::span<const double> initial) {
  check_problem(problem);
  if (!(options.tol > 0.0)) throw Error("capacity", "tolerance must be > 0");
  if (options.max_sweeps < 0) throw Error("capacity", "max_sweeps must be >= 0");
  const GridGeometry& g = problem.geometry;
  const int N = g.resolution();
  const double omega =
      options.omega > 0.0 ? options.omega : 2.0 / (1.0 + std::sin(std::numbers::pi / N));
  if (!(omega > 0.0 && omega < 2.0)) throw Error("capacity", "relaxation factor must lie in (0,2)");
  const int every = std::max(1, options.check_every);

  SolverReport report;
  if (!initial.empty()) {
    if (initial.size() != g.node_count()) throw Error("capacity", "initial guess has the wrong size");
    report.h.assign(initial.begin(), initial.end());
  } else if (options.multilevel && N >= 64 && N % 2 == 0) {
    const ObstacleProblem coarse = coarsen(problem);
    SolverOptions copt = options;
    copt.record_history = false;
    try {
      const SolverReport c = solve_obstacle(coarse, copt);
      report.h = prolong(coarse.geometry, c.h, g);
    } catch (const ConvergenceError&) {
      report.h.assign(g.node_count(), 0.0);
    }
  } else {
    report.h.assign(g.node_count(), 0.0);
  }
  enforce_constraints(problem, report.h);

  auto record = [&] {
    if (options.record_history) report.energy_history.push_back(obstacle_objective(problem, report.h));
  };
  record();
  report.residual = projected_residual(problem, report.h);
  while (report.residual >= options.tol) {
    if (report.sweeps >= options.max_sweeps) {
      throw ConvergenceError("capacity",
                             "projected SOR did not converge in " + std::to_string(options.max_sweeps) +
                                 " sweeps (residual " + std::to_string(report.residual) + ")",
                             report.residual);
    }
    const int batch = std::min(every, options.max_sweeps - report.sweeps);
    for (int s = 0; s < batch; ++s) sweep(problem, report.h, omega);
    report.sweeps += batch;
    record();
    report.residual = projected_residual(problem, report.h);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Primal capacity

CapacityResult solve_capacity_primal(const DomainMask& mask, const SolverOptions& options) {
  const GridGeometry& g = mask.geometry();
  CapacityResult result(g);
  if (mask.empty() && !g.periodic()) return result;
  mask.validate_for_capacity();

  ObstacleProblem problem(g);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (mask.held_zero(k)) problem.fixed[k] = 1;
    if (mask.inside(k)) problem.lower[k] = 1.0;
  }

  if (!g.periodic()) {
    SolverReport r = solve_obstacle(problem, options);
    result.primal = dirichlet_energy(g, r.h);
    result.sweeps = r.sweeps;
    result.residual = r.residual;
    result.energy_history = std::move(r.energy_history);
    result.minimizer = Grid(g, std::move(r.h));
    result.mean = result.minimizer.mean();
    return result;
  }

  // Torus: secant on the multiplier of the zero-mean constraint. The mean of
  // the inner minimizer is affine in tau once the whole of D is active.
  const double area = g.cell_area();
  SolverOptions inner_options = options;
  auto inner = [&](double tau, std::span<const double> warm) {
    std::fill(problem.load.begin(), problem.load.end(), tau * area);
    return solve_obstacle(problem, inner_options, warm);
  };
  // tau = 0: h = 1 is optimal (no load, constants cost nothing).
  double tau0 = 0.0;
  std::vector<double> h0(g.node_count(), 1.0);
  double m0 = 1.0;
  double tau1 = 1.0;
  SolverReport r1 = inner(tau1, {});
  double m1 = area_weighted_mean(g, r1.h);
  int sweeps = r1.sweeps;
  const double mean_tol = std::max(options.tol, 1e-12);
  const double tol_floor = 1e-14;
  std::vector<double> guess(g.node_count());
  for (int it = 0; std::abs(m1) > mean_tol; ++it) {
    if (it >= 50) {
      throw ConvergenceError("capacity", "mean-constraint secant iteration did not converge", std::abs(m1));
    }
    if (m1 == m0) throw Error("capacity", "mean-constraint secant iteration failed to bracket");
    const double tau2 = tau1 - m1 * (tau1 - tau0) / (m1 - m0);
    // The minimizer is affine in tau while the contact set is unchanged.
    const double s = (tau2 - tau1) / (tau1 - tau0);
    for (std::size_t k = 0; k < guess.size(); ++k) {
      guess[k] = std::max(problem.lower[k], r1.h[k] + s * (r1.h[k] - h0[k]));
    }
    SolverReport r2 = inner(tau2, guess);
    double m2 = area_weighted_mean(g, r2.h);
    // Too loose an inner tolerance leaves the mean short of mean_tol; resolve
    // more tightly from the same start.
    while (std::abs(m2) > mean_tol && (r2.sweeps == 0 || m2 == m1) && inner_options.tol > tol_floor) {
      inner_options.tol = std::max(tol_floor, inner_options.tol * 1e-2);
      sweeps += r2.sweeps;
      r2 = inner(tau2, r2.h);
      m2 = area_weighted_mean(g, r2.h);
    }
    sweeps += r2.sweeps;
    tau0 = tau1;
    m0 = m1;
    h0 = std::move(r1.h);
    tau1 = tau2;
    m1 = m2;
    r1 = std::move(r2);
    if (std::abs(tau1 - tau0) <= 1e-14 * std::abs(tau1)) break;
  }
  result.primal = dirichlet_energy(g, r1.h);
  result.sweeps = sweeps;
  result.residual = r1.residual;
  result.energy_history = std::move(r1.energy_history);
  result.tau = tau1;
  result.minimizer = Grid(g, std::move(r1.h));
  result.mean = m1;
  return result;
}

// ---------------------------------------------------------------------------
// sigma(f) and the dual bound

double grid_spectral_limit(const GridGeometry& g) {
  const SurfaceModel& m = g.model();
  const int N = g.resolution();
  const int kmax = g.periodic() ? N / 2 - 1 : N - 1;
  if (kmax < 1) throw Error("capacity", "grid too coarse for any spectral mode");
  const double wx = m.wavenumber_x() * kmax;
  const double wy = m.wavenumber_y() * kmax;
  return std::min(wx * wx, wy * wy);
}

SigmaResult sigma_quadratic(const Grid& f, double L_trunc) {
  const GridGeometry& g = f.geometry();
  const SurfaceModel& m = g.model();
  const double limit = grid_spectral_limit(g);
  const double L = L_trunc > 0.0 ? L_trunc : limit;
  if (L > limit * (1.0 + 1e-12)) {
    throw Error("capacity", "truncation cutoff " + std::to_string(L) + " exceeds the grid limit " +
                                std::to_string(limit));
  }
  // Rectangle boundary values are not part of an admissible function.
  Grid fv = f;
  if (!g.periodic()) {
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        if (g.on_boundary(i, j)) fv.at(i, j) = 0.0;
      }
    }
  }

  auto basis = BasisCache::global().get(m, L);
  const auto pairs = basis->pairs().first(basis->count_at_most(L));
  const SpectralSynthesizer synth(m, g.resolution());
  std::vector<double> c = synth.analyze(pairs, fv);

  CompensatedSum norm2, total, sigma;
  for (double v : fv.values()) norm2 += v * v * g.cell_area();
  if (g.periodic()) {
    CompensatedSum mass;
    for (double v : fv.values()) mass += v * g.cell_area();
    total += mass.value() * mass.value() / m.volume();
  }
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    total += c[n] * c[n];
    sigma += c[n] * c[n] / pairs[n].lambda;
  }
  SigmaResult out;
  out.value = sigma.value();
  out.tail = std::max(0.0, norm2.value() - total.value()) / first_omitted(m, L);
  out.L_trunc = L;
  return out;
}

double cell_spectral_limit(const GridGeometry& g) {
  const SurfaceModel& m = g.model();
  const double k = 2.0 * g.resolution();
  return std::min(std::pow(m.wavenumber_x() * k, 2), std::pow(m.wavenumber_y() * k, 2));
}

SigmaResult sigma_cells(const GridGeometry& g, std::span<const double> cells, double L_trunc) {
  const SurfaceModel& m = g.model();
  const int N = g.resolution();
  const std::size_t ncell = std::size_t(N) * N;
  if (cells.size() != ncell) throw Error("capacity", "cell function must have resolution^2 entries");
  const double L = L_trunc > 0.0 ? L_trunc : cell_spectral_limit(g);
  const double wx = m.wavenumber_x();
  const double wy = m.wavenumber_y();
  const double area = g.cell_area();
  const SpectralCutoff cut(m, L);

  CompensatedSum norm2, mass;
  for (double v : cells) {
    norm2 += v * v * area;
    mass += v * area;
  }
  CompensatedSum total, sigma;
  auto add = [&](double c, double lambda) {
    total += c * c;
    sigma += c * c / lambda;
  };
  auto admitted = [&](std::int32_t k1, std::int32_t k2, double lambda) {
    EigenPair e;
    e.k1 = k1;
    e.k2 = k2;
    e.norm2 = std::int64_t{k1} * k1 + std::int64_t{k2} * k2;
    e.lambda = lambda;
    return cut.admits(e);
  };
  const auto kx_max = static_cast<std::int32_t>(std::floor(std::sqrt(L) / wx)) + 1;
  const auto ky_max = static_cast<std::int32_t>(std::floor(std::sqrt(L) / wy)) + 1;

  if (g.periodic()) {
    // S(k) = sum_c F_c exp(-i k.center_c) = phase(k) * DFT[F](k mod N).
    const int half = N / 2 + 1;
    auto in = detail::fftw_array<double>(ncell);
    auto out = detail::fftw_array<fftw_complex>(std::size_t(N) * half);
    std::copy(cells.begin(), cells.end(), in.get());
    {
      const detail::FftwPlan plan = [&] {
        std::lock_guard lock(detail::fftw_planner_mutex());
        return detail::FftwPlan(fftw_plan_dft_r2c_2d(N, N, in.get(), out.get(), FFTW_ESTIMATE));
      }();
      fftw_execute(plan.get());
    }
    auto dft = [&](std::int64_t k1, std::int64_t k2) {
      const std::int64_t a = ((k1 % N) + N) % N;
      const std::int64_t b = ((k2 % N) + N) % N;
      if (a < half) {
        const auto& z = out.get()[b * half + a];
        return std::complex<double>(z[0], z[1]);
      }
      const auto& z = out.get()[((N - b) % N) * half + (N - a)];
      return std::complex<double>(z[0], -z[1]);
    };
    total += mass.value() * mass.value() / m.volume();
    const double norm = std::sqrt(2.0 / m.volume());
    for (std::int32_t k1 = 0; k1 <= kx_max; ++k1) {
      for (std::int32_t k2 = -ky_max; k2 <= ky_max; ++k2) {
        if (k1 == 0 && k2 <= 0) continue;
        const double lambda = wx * wx * double(k1) * k1 + wy * wy * double(k2) * k2;
        if (!admitted(k1, k2, lambda)) continue;
        const double ax = wx * k1 * g.hx() / 2.0;
        const double ay = wy * k2 * g.hy() / 2.0;
        const std::complex<double> S = std::polar(1.0, -(ax + ay)) * dft(k1, k2);
        const double scale = norm * area * sinc(ax) * sinc(ay);
        add(scale * S.real(), lambda);
        add(-scale * S.imag(), lambda);
      }
    }
  } else {
    // Type-II sine transform: Y(m, n) = 4 sum_c F_c sin(pi m (i+1/2)/N) sin(pi n (j+1/2)/N).
    auto buf = detail::fftw_array<double>(ncell);
    std::copy(cells.begin(), cells.end(), buf.get());
    {
      const detail::FftwPlan plan = [&] {
        std::lock_guard lock(detail::fftw_planner_mutex());
        return detail::FftwPlan(fftw_plan_r2r_2d(N, N, buf.get(), buf.get(), FFTW_RODFT10, FFTW_RODFT10, FFTW_ESTIMATE));
      }();
      fftw_execute(plan.get());
    }
    auto fold = [&](std::int64_t k) -> std::int64_t {
      const std::int64_t r = k % (2 * N);
      if (r == 0) return -1;
      return r <= N ? r : 2 * N - r;
    };
    const double norm = 2.0 / std::sqrt(m.volume());
    for (std::int32_t k1 = 1; k1 <= kx_max; ++k1) {
      const std::int64_t a = fold(k1);
      for (std::int32_t k2 = 1; k2 <= ky_max; ++k2) {
        const double lambda = wx * wx * double(k1) * k1 + wy * wy * double(k2) * k2;
        if (!admitted(k1, k2, lambda)) continue;
        const std::int64_t b = fold(k2);
        if (a < 0 || b < 0) {
          add(0.0, lambda);
          continue;
        }
        const double Y = buf.get()[(b - 1) * N + (a - 1)] / 4.0;
        add(norm * area * sinc(wx * k1 * g.hx() / 2.0) * sinc(wy * k2 * g.hy() / 2.0) * Y, lambda);
      }
    }
  }
  SigmaResult res;
  res.value = sigma.value();
  res.tail = std::max(0.0, norm2.value() - total.value()) / first_omitted(m, L);
  res.L_trunc = L;
  return res;
}

std::vector<double> witness_cells(const DomainMask& mask, const Grid& f) {
  const GridGeometry& g = mask.geometry();
  if (!(f.geometry() == g)) throw Error("capacity", "witness grid does not match the mask");
  const int N = g.resolution();
  auto node = [&](int i, int j) { return g.index(g.periodic() ? i % N : i, g.periodic() ? j % N : j); };
  // Cell (i, j) has corners (i, j), (i+1, j), (i, j+1), (i+1, j+1).
  std::vector<char> full(std::size_t(N) * N, 0);
  std::vector<int> adjacent(g.node_count(), 0);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const std::size_t c[4] = {node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)};
      if (!std::all_of(c, c + 4, [&](std::size_t k) { return mask.inside(k); })) continue;
      full[std::size_t(j) * N + i] = 1;
      for (std::size_t k : c) ++adjacent[k];
    }
  }
  std::vector<double> cells(std::size_t(N) * N, 0.0);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      if (!full[std::size_t(j) * N + i]) continue;
      double v = 0.0;
      for (std::size_t k : {node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)}) {
        v += f.values()[k] / adjacent[k];
      }
      cells[std::size_t(j) * N + i] = v;
    }
  }
  return cells;
}

DualResult dual_capacity(const DomainMask& mask, const Grid& f, double L_trunc) {
  const GridGeometry& g = mask.geometry();
  if (!(f.geometry() == g)) throw Error("capacity", "witness grid does not match the mask");
  double scale = 0.0;
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (mask.inside(k)) scale = std::max(scale, std::abs(f.values()[k]));
  }
  Grid fd(g);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (!mask.inside(k)) continue;
    double v = f.values()[k];
    if (v < 0.0) {
      if (v < -1e-9 * scale) throw Error("capacity", "dual witness must be >= 0 on D");
      v = 0.0;
    }
    fd.values()[k] = v;
  }
  const std::vector<double> cells = witness_cells(mask, fd);
  CompensatedSum integral;
  for (double v : cells) integral += v * g.cell_area();
  DualResult out;
  out.integral = integral.value();
  out.sigma = sigma_cells(g, cells, L_trunc);
  if (!(out.sigma.upper() > 0.0) || !(out.integral > 0.0)) {
    throw Error("capacity", "dual witness vanishes on D (sigma(1_D f) = 0)");
  }
  out.value = out.integral * out.integral / (2.0 * out.sigma.upper());
  return out;
}

// ---------------------------------------------------------------------------
// Equilibrium potential

EquilibriumPotential equilibrium_potential(const DomainMask& mask, const SolverOptions& options,
                                           std::span<const double> initial) {
  mask.validate_for_capacity();
  const GridGeometry& g = mask.geometry();
  EquilibriumPotential out(g);
  ObstacleProblem problem(g);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (mask.held_zero(k)) problem.fixed[k] = 1;
    if (mask.inside(k)) {
      problem.fixed[k] = 1;
      problem.fixed_value[k] = g.periodic() ? 0.0 : 1.0;
    }
  }

  if (!g.periodic()) {
    SolverOptions o = options;
    o.record_history = false;
    SolverReport r = solve_obstacle(problem, o, initial);
    out.h = Grid(g, std::move(r.h));
    out.sweeps = r.sweeps;
    out.residual = r.residual;
  } else {
    // u solves A u = cell_area off D with u = 0 on D; h = 1 - tau u.
    std::fill(problem.load.begin(), problem.load.end(), -g.cell_area());
    SolverOptions o = options;
    o.record_history = false;
    SolverReport r = solve_obstacle(problem, o);
    out.sweeps = r.sweeps;
    out.residual = r.residual;
    const double mean_u = area_weighted_mean(g, r.h);
    auto mean_h = [&](double tau) { return 1.0 - tau * mean_u; };
    double t0 = 0.0, t1 = 1.0;
    double m0 = mean_h(t0), m1 = mean_h(t1);
    if (!(mean_u > 0.0) || m0 == m1) {
      throw Error("capacity", "secant iteration for tau failed to bracket a zero mean");
    }
    for (int it = 0; it < 8 && m1 != 0.0 && m1 != m0; ++it) {
      const double t2 = t1 - m1 * (t1 - t0) / (m1 - m0);
      t0 = t1;
      m0 = m1;
      t1 = t2;
      m1 = mean_h(t1);
    }
    out.tau = t1;
    for (std::size_t k = 0; k < g.node_count(); ++k) out.h.values()[k] = 1.0 - out.tau * r.h[k];
  }

  const std::vector<double> Ah = apply_laplacian(g, out.h.values());
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    out.witness.values()[k] = mask.inside(k) ? Ah[k] / g.cell_area() + out.tau : 0.0;
  }
  return out;
}

CapacityResult solve_capacity(const DomainMask& mask, const SolverOptions& options) {
  CapacityResult result = solve_capacity_primal(mask, options);
  if (mask.empty()) return result;
  const std::span<const double> warm =
      mask.geometry().periodic() ? std::span<const double>{} : result.minimizer.values();
  const EquilibriumPotential eq = equilibrium_potential(mask, options, warm);
  result.dual = dual_capacity(mask, eq.witness).value;
  result.gap = result.primal - result.dual;
  return result;
}

ConformalCheck conformal_invariance_check(const SurfaceModel& model, std::span<const Shape> shapes, double s,
                                          int resolution, const SolverOptions& options) {
  if (!model.has_boundary()) throw Error("capacity", "conformal check needs the rectangle model");
  if (!(s > 0.0) || !std::isfinite(s)) throw Error("capacity", "scale must be finite and > 0");
  const double scaled_res = s * resolution;
  const long rounded = std::lround(scaled_res);
  if (std::abs(scaled_res - double(rounded)) > 1e-9 * scaled_res || rounded < 2) {
    throw Error("capacity", "scale times resolution must be an integer >= 2");
  }
  const SurfaceModel scaled = SurfaceModel::dirichlet_rectangle(s * model.side_x(), s * model.side_y());
  std::vector<Shape> scaled_shapes;
  for (const auto& sh : shapes) scaled_shapes.push_back(scale_shape(sh, s));

  const DomainMask a = DomainMask::from_shapes(GridGeometry(model, resolution), shapes);
  const DomainMask b = DomainMask::from_shapes(GridGeometry(scaled, int(rounded)), scaled_shapes);
  try {
    b.validate_for_capacity();
  } catch (const Error& e) {
    throw Error("capacity", std::string("scaled mask is invalid: ") + e.what());
  }
  ConformalCheck out;
  out.cap_original = solve_capacity_primal(a, options).primal;
  out.cap_scaled = solve_capacity_primal(b, options).primal;
  out.relative_difference = std::abs(out.cap_scaled - out.cap_original) / out.cap_original;
  return out;
}

}  // namespace cgff
