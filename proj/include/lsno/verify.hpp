#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lsno/grid.hpp"
#include "lsno/tensor.hpp"

namespace lsno {

struct PropertyResult {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // how far from the threshold (positive = slack)
  std::string detail;
};

/// Central finite difference of f at x with step h.
double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5);

/// Max relative error between the recorded gradient of `loss` and central
/// differences over the listed tensors (all of their entries, or
/// `probe_limit` deterministic probes per tensor when positive).
/// `loss` must rebuild the scalar from current tensor values.
double max_grad_rel_error(const std::function<double()>& loss_value,
                          const std::function<Tensor()>& loss_graph,
                          const std::vector<Tensor>& leaves, double fd_step = 1e-5,
                          int probe_limit = 0);

/// Random band-limited curves with an analytically known derivative bound;
/// used by the quadrature and eps-net properties.
struct SmoothFunction {
  std::function<double(double)> f;
  double derivative_bound = 0.0;  // sup|f'| <= this, by construction
};
SmoothFunction random_smooth_function(std::uint64_t seed, int modes = 5);

/// Random smooth grid functions on a curve grid (dim 1, given channel
/// count): band-limited Fourier series.
GridFunction random_grid_function(const GridDesc& grid, std::uint64_t seed);

/// The property suite behind `verify` and the theorem-surrogate acceptance
/// checks: gradient finite-difference checks for every primitive and the
/// end-to-end loss, quadrature exactness and the rectangle error bound,
/// eps-net coverage, the fixed-mode projection bound, and the coefficient
/// simplex in both modes. eps_override > 0 fixes the net radius instead of
/// the pairwise-distance quantile.
std::vector<PropertyResult> run_property_suite(std::uint64_t seed, double eps_override = 0.0);

}  // namespace lsno
