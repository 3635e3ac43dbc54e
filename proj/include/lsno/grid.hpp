#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "lsno/errors.hpp"

namespace lsno {

/// Uniform rectangular space-time grid.
///
/// dim == 1: curves y(t); nx is 1 and the nt time nodes are inclusive,
///           t_j = t0 + j*(t1-t0)/(nt-1).
/// dim == 2: fields u(x,t); the spatial axis is periodic with nx nodes
///           x_i = x0 + i*(x1-x0)/nx (right endpoint excluded), the time
///           axis is inclusive as above.
struct GridDesc {
  int dim = 1;
  int nx = 1;
  int nt = 0;
  int channels = 1;
  double x0 = 0.0, x1 = 1.0;
  double t0 = 0.0, t1 = 1.0;

  std::int64_t nodes() const { return static_cast<std::int64_t>(nx) * nt; }
  std::int64_t value_count() const { return nodes() * channels; }

  double node_x(int i) const { return x0 + i * (x1 - x0) / nx; }
  double node_t(int j) const {
    return nt > 1 ? t0 + j * (t1 - t0) / (nt - 1) : t0;
  }

  bool operator==(const GridDesc& o) const = default;
};

/// Discretized function on a GridDesc. Storage is row-major with space
/// slowest: value(ix, it, c) = values[(ix*nt + it)*channels + c].
struct GridFunction {
  GridDesc grid;
  Eigen::ArrayXd values;

  GridFunction() = default;
  GridFunction(GridDesc g, Eigen::ArrayXd v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.value_count())
      throw DimensionError("grid function value count does not match grid");
  }

  double& at(int ix, int it, int c) {
    return values[(static_cast<std::int64_t>(ix) * grid.nt + it) * grid.channels + c];
  }
  double at(int ix, int it, int c) const {
    return values[(static_cast<std::int64_t>(ix) * grid.nt + it) * grid.channels + c];
  }

  static GridFunction zeros(const GridDesc& g) {
    return GridFunction(g, Eigen::ArrayXd::Zero(g.value_count()));
  }
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b) {
  if (!(a.grid == b.grid)) throw DimensionError("grid functions live on different grids");
}

}  // namespace lsno
