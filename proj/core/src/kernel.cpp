#include "cgff/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cgff/error.hpp"
#include "cgff/summation.hpp"

namespace cgff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_cutoff(double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw Error("kernel-lab", "cutoff L must be finite and > 0");
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("kernel-lab", "alpha must lie in (0,1)");
}

struct Prefix {
  std::shared_ptr<const SpectralBasis> basis;
  std::size_t count;
};

Prefix prefix(const SurfaceModel& model, double L) {
  require_cutoff(L);
  auto basis = BasisCache::global().get(model, L);
  const std::size_t n = basis->count_at_most(L);
  return {std::move(basis), n};
}

double boundary_distance(const SurfaceModel& model, Point p) {
  return std::min({p.x, model.side_x() - p.x, p.y, model.side_y() - p.y});
}

}  // namespace

double log_plus(double a) noexcept { return a > 1.0 ? std::log(a) : 0.0; }

std::shared_ptr<const SpectralBasis> BasisCache::get(const SurfaceModel& model, double L) {
  require_cutoff(L);
  std::lock_guard lock(mutex_);
  for (auto& b : bases_) {
    if (b->model() == model) {
      if (b->cutoff() < L) b = std::make_shared<const SpectralBasis>(enumerate_eigenpairs(model, L));
      return b;
    }
  }
  bases_.push_back(std::make_shared<const SpectralBasis>(enumerate_eigenpairs(model, L)));
  return bases_.back();
}

BasisCache& BasisCache::global() {
  static BasisCache cache;
  return cache;
}

double covariance_sum(const SpectralBasis& basis, std::size_t first, std::size_t last, Point p, Point q) {
  const SurfaceModel& m = basis.model();
  CompensatedSum s;
  for (std::size_t n = first; n < last; ++n) {
    const EigenPair& e = basis[n];
    s += eval_eigenfunction(m, e, p) * eval_eigenfunction(m, e, q) / e.lambda;
  }
  return s.value();
}

double projector_sum(const SpectralBasis& basis, std::size_t first, std::size_t last, Point p, Point q) {
  const SurfaceModel& m = basis.model();
  CompensatedSum s;
  for (std::size_t n = first; n < last; ++n) {
    const EigenPair& e = basis[n];
    s += eval_eigenfunction(m, e, p) * eval_eigenfunction(m, e, q);
  }
  return s.value();
}

double covariance(const SurfaceModel& model, double L, Point p, Point q) {
  const Prefix pre = prefix(model, L);
  return covariance_sum(*pre.basis, 0, pre.count, p, q);
}

double projector_kernel(const SurfaceModel& model, double L, Point p, Point q) {
  const Prefix pre = prefix(model, L);
  return projector_sum(*pre.basis, 0, pre.count, p, q);
}

double band_covariance(const SurfaceModel& model, double L, double alpha, Point p, Point q) {
  require_alpha(alpha);
  const Prefix pre = prefix(model, L);
  const std::size_t low = pre.basis->count_at_most(std::pow(L, alpha));
  return covariance_sum(*pre.basis, low, pre.count, p, q);
}

bool pair_in_range(const SurfaceModel& model, Point p, Point q) {
  const double r = model.in_range_radius();
  if (geodesic_distance(model, p, q) >= r) return false;
  if (model.has_boundary()) return boundary_distance(model, p) >= r && boundary_distance(model, q) >= r;
  return true;
}

double ResidualReport::max_abs_at(double L) const {
  double m = 0.0;
  for (const auto& r : rows) {
    if (r.in_range && r.L == L) m = std::max(m, std::abs(r.residual));
  }
  return m;
}

ResidualReport asymptotic_residual(const SurfaceModel& model, std::span<const double> Ls,
                                   std::span<const PointPair> pairs) {
  ResidualReport report;
  if (Ls.empty()) return report;
  for (double L : Ls) require_cutoff(L);
  const double L_max = *std::max_element(Ls.begin(), Ls.end());
  auto basis = BasisCache::global().get(model, L_max);

  CompensatedSum abs_sum;
  for (double L : Ls) {
    const std::size_t n = basis->count_at_most(L);
    const double root = std::sqrt(L);
    for (const auto& pq : pairs) {
      ResidualRow row;
      row.L = L;
      row.p = pq.p;
      row.q = pq.q;
      row.distance = geodesic_distance(model, pq.p, pq.q);
      row.covariance = covariance_sum(*basis, 0, n, pq.p, pq.q);
      row.predicted = (std::log(root) - log_plus(root * row.distance)) / kTwoPi;
      row.residual = row.covariance - row.predicted;
      row.in_range = pair_in_range(model, pq.p, pq.q);
      if (row.in_range) {
        ++report.in_range_count;
        report.max_abs = std::max(report.max_abs, std::abs(row.residual));
        abs_sum += std::abs(row.residual);
      }
      report.rows.push_back(row);
    }
  }
  if (report.in_range_count > 0) report.mean_abs = abs_sum.value() / double(report.in_range_count);
  return report;
}

namespace {

struct LinkTerms {
  double R = 0.0;
  double scale = 0.0;
};

LinkTerms link_terms(const SpectralBasis& basis, double L, Point p, Point q) {
  const SurfaceModel& m = basis.model();
  const std::size_t count = basis.count_at_most(L);
  CompensatedSum g, e, integral;
  for (std::size_t n = 0; n < count; ++n) {
    const EigenPair& pair = basis[n];
    const double t = eval_eigenfunction(m, pair, p) * eval_eigenfunction(m, pair, q);
    g += t / pair.lambda;
    e += t;
    integral += t * (1.0 / std::max(1.0, pair.lambda) - 1.0 / L);
  }
  const double G = g.value();
  const double E = e.value() / L;
  const double I = integral.value();
  return {G - E - I, std::max({std::abs(G), std::abs(E), std::abs(I)})};
}

}  // namespace

double link_remainder(const SurfaceModel& model, double L, Point p, Point q) {
  const Prefix pre = prefix(model, L);
  return link_terms(*pre.basis, L, p, q).R;
}

LinkResidual link_residual(const SurfaceModel& model, double L1, double L2, Point p, Point q) {
  if (!(L1 > 1.0)) throw Error("kernel-lab", "link identity needs L1 > 1");
  if (!(L2 > L1)) throw Error("kernel-lab", "link identity needs L1 < L2");
  const Prefix pre = prefix(model, L2);
  const LinkTerms a = link_terms(*pre.basis, L1, p, q);
  const LinkTerms b = link_terms(*pre.basis, L2, p, q);
  LinkResidual out;
  out.R1 = a.R;
  out.R2 = b.R;
  out.absolute = std::abs(a.R - b.R);
  out.scale = std::max(a.scale, b.scale);
  out.relative = out.scale > 0.0 ? out.absolute / out.scale : out.absolute;
  return out;
}

double derivative_kernel(const SurfaceModel& model, double L, Point p, Point q, DerivativeOrder a,
                         DerivativeOrder b) {
  if (a.dx < 0 || a.dy < 0 || b.dx < 0 || b.dy < 0) {
    throw Error("kernel-lab", "derivative orders must be non-negative");
  }
  if (a.total() + b.total() > 6) throw Error("kernel-lab", "total derivative order must be <= 6");
  const Prefix pre = prefix(model, L);
  CompensatedSum s;
  for (std::size_t n = 0; n < pre.count; ++n) {
    const EigenPair& e = (*pre.basis)[n];
    s += eval_eigenfunction_derivative(model, e, p, a) * eval_eigenfunction_derivative(model, e, q, b) /
         e.lambda;
  }
  return s.value();
}

double derivative_kernel_diag(const SurfaceModel& model, double L, int d1, int d2, Point p) {
  if (d1 < 0 || d2 < 0) throw Error("kernel-lab", "derivative orders must be non-negative");
  if (d1 + d2 == 0) throw Error("kernel-lab", "order (0,0) is the covariance itself; use covariance()");
  return derivative_kernel(model, L, p, p, {d1, 0}, {d2, 0});
}

double derivative_kernel_diag(const SurfaceModel& model, double L, int d1, int d2) {
  return derivative_kernel_diag(model, L, d1, d2, {model.side_x() / 2.0, model.side_y() / 2.0});
}

}  // namespace cgff
