#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgff/spectra.hpp"

namespace cgff {

/// Node layout of an evaluation grid with `resolution` intervals per side.
/// Torus: resolution^2 periodic nodes at (a*i/N, b*j/N), 0 <= i,j < N.
/// Rectangle: (N+1)^2 nodes including both boundaries, 0 <= i,j <= N.
class GridGeometry {
 public:
  GridGeometry(const SurfaceModel& model, int resolution);

  const SurfaceModel& model() const noexcept { return model_; }
  int resolution() const noexcept { return resolution_; }
  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  std::size_t node_count() const noexcept { return std::size_t(nx_) * std::size_t(ny_); }
  double hx() const noexcept { return hx_; }
  double hy() const noexcept { return hy_; }
  double cell_area() const noexcept { return hx_ * hy_; }
  bool periodic() const noexcept { return !model_.has_boundary(); }

  std::size_t index(int i, int j) const noexcept { return std::size_t(j) * std::size_t(nx_) + std::size_t(i); }
  Point node(int i, int j) const noexcept { return {hx_ * i, hy_ * j}; }
  bool on_boundary(int i, int j) const noexcept {
    return !periodic() && (i == 0 || j == 0 || i == nx_ - 1 || j == ny_ - 1);
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

 private:
  SurfaceModel model_;
  int resolution_;
  int nx_;
  int ny_;
  double hx_;
  double hy_;
};

/// Real values on a GridGeometry, stored row-major with rows along y:
/// value(i, j) = values[j * nx + i].
class Grid {
 public:
  explicit Grid(GridGeometry geometry);
  Grid(GridGeometry geometry, std::vector<double> values);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }

  double& at(int i, int j) noexcept { return values_[geometry_.index(i, j)]; }
  double at(int i, int j) const noexcept { return values_[geometry_.index(i, j)]; }

  double max() const;
  double min() const;
  /// Area-weighted mean over the surface (boundary nodes of the rectangle
  /// carry zero weight since every admissible function vanishes there).
  double mean() const;

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
};

}  // namespace cgff
