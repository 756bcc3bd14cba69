#pragma once

// Capacity of a domain D on a model surface:
//   cap(D) = inf { 1/2 int |grad h|^2 : h >= 1 on D, h admissible },
// where admissible means zero mean on the torus and zero boundary values on
// the rectangle. Discretized with the 5-point Laplacian on a GridGeometry.

#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "cgff/grid.hpp"
#include "cgff/spectra.hpp"

namespace cgff {

/// Disk of radius r centred at (cx, cy), absolute coordinates.
struct Disk {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

/// Axis-aligned rectangle [x0,x1] x [y0,y1], absolute coordinates.
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

using Shape = std::variant<Disk, Rect>;

/// True when p lies in the shape (periodically on the torus).
bool shape_contains(const SurfaceModel& model, const Shape& shape, Point p);

Shape scale_shape(const Shape& shape, double s);

/// Indicator of D on grid nodes, plus optional nodes held at zero
/// ("exterior"), which lets a masked region stand in for an outer boundary.
class DomainMask {
 public:
  DomainMask(GridGeometry geometry, std::vector<std::uint8_t> inside,
             std::vector<std::uint8_t> exterior = {});

  /// Nodes whose position lies in the union of `shapes`.
  static DomainMask from_shapes(const GridGeometry& geometry, std::span<const Shape> shapes);

  /// Copy with every node outside the union of `keep` held at zero.
  DomainMask with_exterior_outside(std::span<const Shape> keep) const;

  const GridGeometry& geometry() const noexcept { return geometry_; }
  bool inside(int i, int j) const noexcept { return inside_[geometry_.index(i, j)] != 0; }
  bool inside(std::size_t k) const noexcept { return inside_[k] != 0; }
  /// Node held at zero: outer rectangle boundary or exterior.
  bool held_zero(std::size_t k) const noexcept;
  std::span<const std::uint8_t> indicator() const noexcept { return inside_; }
  std::span<const std::uint8_t> exterior() const noexcept { return exterior_; }

  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  /// Number of nodes that may take any value (neither held at zero).
  std::size_t free_count() const noexcept;
  /// count() * cell area.
  double area() const noexcept { return double(count_) * geometry_.cell_area(); }

  /// Smallest distance from a D node to the outer boundary (+inf on the torus).
  double boundary_distance() const noexcept;
  /// D nodes with at least one 4-neighbour outside D.
  std::vector<std::size_t> boundary_layer() const;

  /// Throws unless D is nonempty, proper, disjoint from nodes held at zero.
  void validate_for_capacity() const;

 private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> inside_;
  std::vector<std::uint8_t> exterior_;
  std::size_t count_ = 0;
};

/// (A h)_k with A the 5-point Laplacian in energy form:
/// 1/2 h^T A h = 1/2 sum over edges (hy/hx or hx/hy) (h_a - h_b)^2.
std::vector<double> apply_laplacian(const GridGeometry& geometry, std::span<const double> h);

/// 1/2 h^T A h, summed edge by edge.
double dirichlet_energy(const GridGeometry& geometry, std::span<const double> h);

/// minimize 1/2 h^T A h + load^T h  s.t.  h >= lower, h = fixed_value on fixed.
struct ObstacleProblem {
  GridGeometry geometry;
  std::vector<std::uint8_t> fixed;
  std::vector<double> fixed_value;
  std::vector<double> lower;
  std::vector<double> load;

  explicit ObstacleProblem(const GridGeometry& g);
};

struct SolverOptions {
  double tol = 1e-8;
  int max_sweeps = 100000;
  double omega = 0.0;  ///< 0 selects 2/(1+sin(pi/N))
  int check_every = 10;
  bool record_history = true;
  bool multilevel = true;  ///< warm start from a coarsened problem
};

struct SolverReport {
  std::vector<double> h;
  int sweeps = 0;
  double residual = 0.0;
  /// Objective after every `check_every` sweeps (index 0: initial guess).
  std::vector<double> energy_history;
};

/// Projected red-black SOR. The residual is the max-norm of the projected
/// gradient divided by the diagonal of A. Throws ConvergenceError if it is
/// still above tol after max_sweeps.
SolverReport solve_obstacle(const ObstacleProblem& problem, const SolverOptions& options,
                            std::span<const double> initial = {});

double obstacle_objective(const ObstacleProblem& problem, std::span<const double> h);

struct CapacityResult {
  double primal = 0.0;
  Grid minimizer;
  double dual = 0.0;
  double gap = 0.0;  ///< primal - dual
  int sweeps = 0;
  double residual = 0.0;
  double mean = 0.0;  ///< area-weighted mean of the minimizer
  double tau = 0.0;   ///< mean-constraint multiplier (torus)
  std::vector<double> energy_history;

  explicit CapacityResult(const GridGeometry& g) : minimizer(g) {}
};

/// Primal obstacle solve. Torus: an outer secant iteration on the multiplier
/// tau of the zero-mean constraint, with inner solves of
/// min 1/2 h^T A h + tau * sum(cell_area * h) s.t. h >= 1 on D.
/// An empty mask is accepted on the rectangle (capacity 0).
CapacityResult solve_capacity_primal(const DomainMask& mask, const SolverOptions& options = {});

struct SigmaResult {
  double value = 0.0;  ///< truncated sum over lambda <= L_trunc
  double tail = 0.0;   ///< upper bound on the omitted part
  double L_trunc = 0.0;
  double upper() const noexcept { return value + tail; }
};

/// sigma(f) = sum_n <psi_n, f>^2 / lambda_n over lambda_n <= L_trunc for the
/// band-limited interpolant of the nodes, with
/// tail <= (||f||^2 - mass already counted) / (first omitted eigenvalue).
/// L_trunc <= 0 selects the largest cutoff resolved by the grid.
SigmaResult sigma_quadratic(const Grid& f, double L_trunc = 0.0);

/// Largest cutoff whose modes are all resolved on the grid.
double grid_spectral_limit(const GridGeometry& geometry);

/// sigma of the piecewise-constant function equal to cells[j*N + i] on the
/// cell [x_i, x_{i+1}] x [y_j, y_{j+1}] (N = resolution). Its coefficients
/// are exact for every mode, so the cutoff may exceed the grid limit;
/// L_trunc <= 0 selects cell_spectral_limit.
SigmaResult sigma_cells(const GridGeometry& geometry, std::span<const double> cells, double L_trunc = 0.0);

/// Default cutoff of sigma_cells: wavenumbers up to 2N per axis.
double cell_spectral_limit(const GridGeometry& geometry);

/// Spreads nodal mass f(node) * cell_area over the adjacent cells whose four
/// corners lie in D, so the result is supported on the union of those cells.
/// Nodes of D without such a cell drop out.
std::vector<double> witness_cells(const DomainMask& mask, const Grid& f);

struct DualResult {
  double value = 0.0;     ///< (int f)^2 / (2 * sigma upper bound)
  double integral = 0.0;  ///< int f over the witness cells
  SigmaResult sigma;
};

/// Dual lower bound from a witness f >= 0 on D (values off D ignored). The
/// witness is evaluated as the cell function of witness_cells, which is
/// supported where every admissible grid function's piecewise-linear
/// interpolant is >= 1; the bound therefore holds against the grid primal.
DualResult dual_capacity(const DomainMask& mask, const Grid& f, double L_trunc = 0.0);

struct EquilibriumPotential {
  Grid h;
  double tau = 0.0;
  Grid witness;  ///< (A h)/cell_area + tau on D nodes, 0 elsewhere
  int sweeps = 0;
  double residual = 0.0;

  explicit EquilibriumPotential(const GridGeometry& g) : h(g), witness(g) {}
};

/// h = 1 on D, harmonic up to -tau off D (tau fixing zero mean on the torus;
/// tau = 0 with zero outer data on the rectangle).
EquilibriumPotential equilibrium_potential(const DomainMask& mask, const SolverOptions& options = {},
                                           std::span<const double> initial = {});

/// Primal solve followed by the equilibrium-potential dual bound.
CapacityResult solve_capacity(const DomainMask& mask, const SolverOptions& options = {});

struct ConformalCheck {
  double cap_original = 0.0;
  double cap_scaled = 0.0;
  double relative_difference = 0.0;
};

/// Capacity of D (given by shapes) in a rectangle model and of s*D in the
/// rectangle scaled by s, at equal grid spacing (resolution s*N).
ConformalCheck conformal_invariance_check(const SurfaceModel& model, std::span<const Shape> shapes,
                                          double s, int resolution, const SolverOptions& options = {});

}  // namespace cgff
