#pragma once

// Explicit Laplacian eigenbases on the two flat model surfaces:
//   * the closed flat torus [0,a) x [0,b) (periodic), and
//   * the rectangle [0,a] x [0,b] with Dirichlet boundary conditions.
//
// The Laplacian is the positive operator -d^2/dx^2 - d^2/dy^2. The constant
// mode of the torus is excluded everywhere, so every eigenvalue is > 0.

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace cgff {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class SurfaceKind { torus, dirichlet_rectangle };

class SurfaceModel {
 public:
  static SurfaceModel torus(double side_x = 2.0 * std::numbers::pi,
                            double side_y = 2.0 * std::numbers::pi);
  static SurfaceModel dirichlet_rectangle(double side_x = std::numbers::pi,
                                          double side_y = std::numbers::pi);

  SurfaceKind kind() const noexcept { return kind_; }
  double side_x() const noexcept { return side_x_; }
  double side_y() const noexcept { return side_y_; }
  double volume() const noexcept { return side_x_ * side_y_; }
  bool has_boundary() const noexcept { return kind_ == SurfaceKind::dirichlet_rectangle; }
  bool isotropic() const noexcept { return side_x_ == side_y_; }

  /// Angular frequency of lattice index 1 along each axis
  /// (2*pi/side on the torus, pi/side on the rectangle).
  double wavenumber_x() const noexcept;
  double wavenumber_y() const noexcept;

  /// Torus: wraps p into [0,a) x [0,b). Rectangle: returns p unchanged and
  /// throws if it lies outside [0,a] x [0,b].
  Point reduce(Point p) const;
  bool contains(Point p) const noexcept;

  /// Pairs closer than this are treated as in range for the covariance
  /// asymptotics: half of the torus injectivity radius (min side / 4).
  double in_range_radius() const noexcept;

  std::string name() const;

  friend bool operator==(const SurfaceModel&, const SurfaceModel&) = default;

 private:
  SurfaceModel(SurfaceKind kind, double side_x, double side_y);

  SurfaceKind kind_;
  double side_x_;
  double side_y_;
};

/// Flat distance; on the torus the minimum over the nearest lattice
/// translates of q.
double geodesic_distance(const SurfaceModel& model, Point p, Point q);

enum class Parity : std::uint8_t { cosine = 0, sine = 1 };

/// One eigenpair. On the torus (k1,k2) is a half-lattice representative
/// (k1 > 0, or k1 == 0 and k2 > 0) and the parity selects cos/sin of k.x.
/// On the rectangle (k1,k2) = (m,n) >= 1 and the parity is always sine.
struct EigenPair {
  std::int32_t k1 = 0;
  std::int32_t k2 = 0;
  Parity parity = Parity::cosine;
  std::int64_t norm2 = 0;  ///< k1^2 + k2^2
  double lambda = 0.0;
  double norm = 0.0;  ///< L2-normalization constant of the eigenfunction
};

struct DerivativeOrder {
  int dx = 0;
  int dy = 0;
  int total() const noexcept { return dx + dy; }
};

/// Value of the normalized eigenfunction at p. Points outside the
/// fundamental domain are wrapped (torus) or rejected (rectangle).
double eval_eigenfunction(const SurfaceModel& model, const EigenPair& pair, Point p);

/// Partial derivative d^dx/dx d^dy/dy of the eigenfunction at p.
double eval_eigenfunction_derivative(const SurfaceModel& model, const EigenPair& pair,
                                     Point p, DerivativeOrder order);

/// Exact band membership test. For isotropic models this compares the
/// integer norm |k|^2 against an integer bound, so membership is bit-stable.
class SpectralCutoff {
 public:
  SpectralCutoff(const SurfaceModel& model, double L);

  bool admits(const EigenPair& pair) const noexcept;
  double value() const noexcept { return value_; }

 private:
  bool integer_ = false;
  std::int64_t bound_ = 0;
  double value_ = 0.0;
};

/// All eigenpairs with 0 < lambda <= L, ordered by (lambda, k1, k2, parity).
class SpectralBasis {
 public:
  SpectralBasis(SurfaceModel model, double cutoff, std::vector<EigenPair> pairs);

  const SurfaceModel& model() const noexcept { return model_; }
  double cutoff() const noexcept { return cutoff_; }
  std::span<const EigenPair> pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const EigenPair& operator[](std::size_t i) const { return pairs_[i]; }

  /// Length of the prefix with lambda <= L (the basis for a smaller cutoff).
  std::size_t count_at_most(double L) const;

  /// Largest |k1| and |k2| present in the basis.
  std::int32_t max_index_x() const noexcept { return max_k1_; }
  std::int32_t max_index_y() const noexcept { return max_k2_; }

 private:
  SurfaceModel model_;
  double cutoff_;
  std::vector<EigenPair> pairs_;
  std::int32_t max_k1_ = 0;
  std::int32_t max_k2_ = 0;
};

SpectralBasis enumerate_eigenpairs(const SurfaceModel& model, double L);

/// Floor of x, snapping values within 1e-9 (relative) below an integer up
/// to it. Used for all eigenvalue cutoffs such as L^alpha.
std::int64_t snapped_floor(double x);

}  // namespace cgff
