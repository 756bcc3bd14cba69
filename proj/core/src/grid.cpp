#include "cgff/grid.hpp"

#include <algorithm>

#include "cgff/error.hpp"

namespace cgff {

GridGeometry::GridGeometry(const SurfaceModel& model, int resolution)
    : model_(model), resolution_(resolution) {
  if (resolution < 2) throw Error("grid", "resolution must be at least 2");
  const int nodes = model.has_boundary() ? resolution + 1 : resolution;
  nx_ = nodes;
  ny_ = nodes;
  hx_ = model.side_x() / resolution;
  hy_ = model.side_y() / resolution;
}

Grid::Grid(GridGeometry geometry) : geometry_(geometry), values_(geometry.node_count(), 0.0) {}

Grid::Grid(GridGeometry geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
  if (values_.size() != geometry_.node_count()) {
    throw Error("grid", "value count does not match the grid geometry");
  }
}

double Grid::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Grid::min() const { return *std::min_element(values_.begin(), values_.end()); }

double Grid::mean() const {
  double sum = 0.0;
  for (int j = 0; j < geometry_.ny(); ++j) {
    for (int i = 0; i < geometry_.nx(); ++i) {
      if (!geometry_.on_boundary(i, j)) sum += at(i, j);
    }
  }
  return sum * geometry_.cell_area() / geometry_.model().volume();
}

}  // namespace cgff
