#include "cgff/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "cgff/error.hpp"

namespace cgff {

namespace {

constexpr double kPi = std::numbers::pi;

// cos/sin shifted by quarter periods: the n-th derivative of cos (or sin).
double trig_derivative(Parity parity, double theta, int n) {
  const int phase = (n + (parity == Parity::sine ? 3 : 0)) % 4;
  switch (phase) {
    case 0: return std::cos(theta);
    case 1: return -std::sin(theta);
    case 2: return -std::cos(theta);
    default: return std::sin(theta);
  }
}

double sine_derivative(double theta, int n) { return trig_derivative(Parity::sine, theta, n); }

}  // namespace

SurfaceModel::SurfaceModel(SurfaceKind kind, double side_x, double side_y)
    : kind_(kind), side_x_(side_x), side_y_(side_y) {
  if (!(side_x > 0.0) || !(side_y > 0.0) || !std::isfinite(side_x) || !std::isfinite(side_y)) {
    throw Error("surface-spectra", "side lengths must be finite and positive");
  }
}

SurfaceModel SurfaceModel::torus(double side_x, double side_y) {
  return SurfaceModel(SurfaceKind::torus, side_x, side_y);
}

SurfaceModel SurfaceModel::dirichlet_rectangle(double side_x, double side_y) {
  return SurfaceModel(SurfaceKind::dirichlet_rectangle, side_x, side_y);
}

double SurfaceModel::wavenumber_x() const noexcept {
  return (kind_ == SurfaceKind::torus ? 2.0 * kPi : kPi) / side_x_;
}

double SurfaceModel::wavenumber_y() const noexcept {
  return (kind_ == SurfaceKind::torus ? 2.0 * kPi : kPi) / side_y_;
}

bool SurfaceModel::contains(Point p) const noexcept {
  if (kind_ == SurfaceKind::torus) return std::isfinite(p.x) && std::isfinite(p.y);
  return p.x >= 0.0 && p.x <= side_x_ && p.y >= 0.0 && p.y <= side_y_;
}

Point SurfaceModel::reduce(Point p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw Error("surface-spectra", "point coordinates must be finite");
  }
  if (kind_ == SurfaceKind::torus) {
    auto wrap = [](double v, double side) {
      double r = std::fmod(v, side);
      if (r < 0.0) r += side;
      return r >= side ? 0.0 : r;
    };
    return {wrap(p.x, side_x_), wrap(p.y, side_y_)};
  }
  if (!contains(p)) {
    throw Error("surface-spectra", "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                       ") lies outside the rectangle");
  }
  return p;
}

double SurfaceModel::in_range_radius() const noexcept {
  return std::min(side_x_, side_y_) / 4.0;
}

std::string SurfaceModel::name() const {
  return kind_ == SurfaceKind::torus ? "torus" : "dirichlet-rectangle";
}

double geodesic_distance(const SurfaceModel& model, Point p, Point q) {
  if (model.kind() == SurfaceKind::dirichlet_rectangle) {
    return std::hypot(p.x - q.x, p.y - q.y);
  }
  p = model.reduce(p);
  q = model.reduce(q);
  double dx = std::abs(p.x - q.x);
  double dy = std::abs(p.y - q.y);
  dx = std::min(dx, model.side_x() - dx);
  dy = std::min(dy, model.side_y() - dy);
  return std::hypot(dx, dy);
}

double eval_eigenfunction(const SurfaceModel& model, const EigenPair& pair, Point p) {
  return eval_eigenfunction_derivative(model, pair, p, {});
}

double eval_eigenfunction_derivative(const SurfaceModel& model, const EigenPair& pair, Point p,
                                     DerivativeOrder order) {
  if (order.dx < 0 || order.dy < 0) {
    throw Error("surface-spectra", "derivative orders must be non-negative");
  }
  p = model.reduce(p);
  const double fx = model.wavenumber_x() * pair.k1;
  const double fy = model.wavenumber_y() * pair.k2;
  const double scale = std::pow(fx, order.dx) * std::pow(fy, order.dy);
  if (model.kind() == SurfaceKind::torus) {
    const double theta = fx * p.x + fy * p.y;
    return pair.norm * scale * trig_derivative(pair.parity, theta, order.total());
  }
  return pair.norm * scale * sine_derivative(fx * p.x, order.dx) * sine_derivative(fy * p.y, order.dy);
}

std::int64_t snapped_floor(double x) {
  if (!std::isfinite(x)) throw Error("surface-spectra", "cutoff must be finite");
  const double f = std::floor(x);
  const double next = f + 1.0;
  if (next - x <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::int64_t>(next);
  return static_cast<std::int64_t>(f);
}

SpectralCutoff::SpectralCutoff(const SurfaceModel& model, double L) : value_(L) {
  if (model.isotropic()) {
    const double unit = model.wavenumber_x() * model.wavenumber_x();
    integer_ = true;
    bound_ = L > 0.0 ? snapped_floor(L / unit) : 0;
  }
}

bool SpectralCutoff::admits(const EigenPair& pair) const noexcept {
  if (integer_) return pair.norm2 <= bound_;
  return pair.lambda <= value_ * (1.0 + 1e-12);
}

SpectralBasis::SpectralBasis(SurfaceModel model, double cutoff, std::vector<EigenPair> pairs)
    : model_(model), cutoff_(cutoff), pairs_(std::move(pairs)) {
  for (const auto& p : pairs_) {
    max_k1_ = std::max(max_k1_, std::abs(p.k1));
    max_k2_ = std::max(max_k2_, std::abs(p.k2));
  }
}

std::size_t SpectralBasis::count_at_most(double L) const {
  if (!(L > 0.0)) return 0;
  const SpectralCutoff cut(model_, L);
  auto it = std::partition_point(pairs_.begin(), pairs_.end(),
                                 [&](const EigenPair& p) { return cut.admits(p); });
  return static_cast<std::size_t>(it - pairs_.begin());
}

SpectralBasis enumerate_eigenpairs(const SurfaceModel& model, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw Error("surface-spectra", "cutoff L must be finite and > 0");
  }
  const SpectralCutoff cut(model, L);
  const double wx = model.wavenumber_x();
  const double wy = model.wavenumber_y();
  const auto kx_max = static_cast<std::int32_t>(std::floor(std::sqrt(L) / wx)) + 1;
  const auto ky_max = static_cast<std::int32_t>(std::floor(std::sqrt(L) / wy)) + 1;

  std::vector<EigenPair> pairs;
  auto consider = [&](std::int32_t k1, std::int32_t k2, Parity parity, double norm) {
    EigenPair e;
    e.k1 = k1;
    e.k2 = k2;
    e.parity = parity;
    e.norm2 = std::int64_t{k1} * k1 + std::int64_t{k2} * k2;
    e.lambda = wx * wx * double(k1) * k1 + wy * wy * double(k2) * k2;
    e.norm = norm;
    if (cut.admits(e)) pairs.push_back(e);
  };

  if (model.kind() == SurfaceKind::torus) {
    const double norm = std::sqrt(2.0 / model.volume());
    for (std::int32_t k1 = 0; k1 <= kx_max; ++k1) {
      for (std::int32_t k2 = -ky_max; k2 <= ky_max; ++k2) {
        if (k1 == 0 && k2 <= 0) continue;
        consider(k1, k2, Parity::cosine, norm);
        consider(k1, k2, Parity::sine, norm);
      }
    }
  } else {
    const double norm = 2.0 / std::sqrt(model.volume());
    for (std::int32_t m = 1; m <= kx_max; ++m) {
      for (std::int32_t n = 1; n <= ky_max; ++n) consider(m, n, Parity::sine, norm);
    }
  }

  const bool integer_order = model.isotropic();
  std::sort(pairs.begin(), pairs.end(), [&](const EigenPair& a, const EigenPair& b) {
    if (integer_order) {
      if (a.norm2 != b.norm2) return a.norm2 < b.norm2;
    } else if (a.lambda != b.lambda) {
      return a.lambda < b.lambda;
    }
    return std::tie(a.k1, a.k2, a.parity) < std::tie(b.k1, b.k2, b.parity);
  });
  return SpectralBasis(model, L, std::move(pairs));
}

}  // namespace cgff
