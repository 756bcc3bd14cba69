#pragma once

// Exact spectral sums for the covariance kernel G_L, the projector kernel
// E_L, band kernels and their derivatives, plus residual diagnostics for the
// logarithmic covariance asymptotics.

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "cgff/spectra.hpp"

namespace cgff {

/// ln+(a) = max(ln a, 0), with ln+(0) = 0.
double log_plus(double a) noexcept;

/// Thread-safe store of one eigenbasis per surface model, grown on demand.
/// Kernels at cutoff L use the prefix of the cached basis with lambda <= L.
class BasisCache {
 public:
  std::shared_ptr<const SpectralBasis> get(const SurfaceModel& model, double L);
  static BasisCache& global();

 private:
  std::mutex mutex_;
  std::vector<std::shared_ptr<const SpectralBasis>> bases_;
};

/// G_L(p,q) = sum_{0<lambda_n<=L} psi_n(p) psi_n(q) / lambda_n.
double covariance(const SurfaceModel& model, double L, Point p, Point q);

/// E_L(p,q) = sum_{0<lambda_n<=L} psi_n(p) psi_n(q).
double projector_kernel(const SurfaceModel& model, double L, Point p, Point q);

/// G_L - G_{L^alpha}, summed directly over the band (L^alpha, L].
double band_covariance(const SurfaceModel& model, double L, double alpha, Point p, Point q);

/// Same sums over an explicit prefix [first, last) of a basis.
double covariance_sum(const SpectralBasis& basis, std::size_t first, std::size_t last, Point p, Point q);
double projector_sum(const SpectralBasis& basis, std::size_t first, std::size_t last, Point p, Point q);

struct PointPair {
  Point p;
  Point q;
};

struct ResidualRow {
  double L = 0.0;
  Point p;
  Point q;
  double distance = 0.0;
  double covariance = 0.0;
  double predicted = 0.0;  ///< (1/2pi)(ln sqrt(L) - ln+(sqrt(L) d))
  double residual = 0.0;   ///< covariance - predicted
  bool in_range = false;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;  ///< one per (L, pair), L-major
  double max_abs = 0.0;           ///< over in-range rows only
  double mean_abs = 0.0;
  std::size_t in_range_count = 0;

  /// max |residual| over in-range rows at one cutoff.
  double max_abs_at(double L) const;
};

/// True when the pair is close enough for the asymptotics to apply: the
/// distance is below the model's in-range radius and, on the rectangle, both
/// points keep that distance from the boundary.
bool pair_in_range(const SurfaceModel& model, Point p, Point q);

ResidualReport asymptotic_residual(const SurfaceModel& model, std::span<const double> Ls,
                                   std::span<const PointPair> pairs);

struct LinkResidual {
  double absolute = 0.0;  ///< |R(L1) - R(L2)|
  double scale = 0.0;     ///< largest magnitude among the sums entering R
  double relative = 0.0;  ///< absolute / scale
  double R1 = 0.0;
  double R2 = 0.0;
};

/// R(L) = G_L - E_L/L - int_1^L E_l / l^2 dl, with the integral in closed form
/// sum psi_n(p) psi_n(q) (1/max(1, lambda_n) - 1/L). Requires 1 < L1 < L2.
LinkResidual link_residual(const SurfaceModel& model, double L1, double L2, Point p, Point q);

/// R(L) at a single cutoff.
double link_remainder(const SurfaceModel& model, double L, Point p, Point q);

/// sum_n (d^a psi_n)(p) (d^b psi_n)(q) / lambda_n with a + b of total order <= 6.
double derivative_kernel(const SurfaceModel& model, double L, Point p, Point q, DerivativeOrder a,
                         DerivativeOrder b);

/// Diagonal kernel with d1 x-derivatives at the first point and d2 at the
/// second, evaluated at p (default: centre of the fundamental domain).
double derivative_kernel_diag(const SurfaceModel& model, double L, int d1, int d2);
double derivative_kernel_diag(const SurfaceModel& model, double L, int d1, int d2, Point p);

}  // namespace cgff
