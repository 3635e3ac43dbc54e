#include <cmath>
#include <limits>

#include "lsno/data.hpp"
#include "lsno/rng.hpp"

namespace lsno {

Sample make_sample(GridFunction target) {
  const GridDesc& g = target.grid;
  Sample s;
  s.init0.resize(static_cast<std::int64_t>(g.nx) * g.channels);
  s.init1.resize(static_cast<std::int64_t>(g.nx) * g.channels);
  for (int ix = 0; ix < g.nx; ++ix)
    for (int c = 0; c < g.channels; ++c) {
      s.init0[static_cast<std::int64_t>(ix) * g.channels + c] = target.at(ix, 0, c);
      s.init1[static_cast<std::int64_t>(ix) * g.channels + c] = target.at(ix, g.nt - 1, c);
    }
  s.target = std::move(target);
  return s;
}

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

Eigen::Vector2d forcing(double t, const Eigen::Vector2d& z0) {
  return z0 + Eigen::Vector2d(std::cos(t), std::cos(t + 3.14159265358979323846));
}

// One application of the right-hand side on the discrete time grid, using
// the trapezoid rule on [0, t_j] (node-aligned upper limits).
Eigen::MatrixXd apply_rhs(const Eigen::MatrixXd& y, const Eigen::Vector2d& z0, int nt) {
  const double h = 1.0 / (nt - 1);
  Eigen::MatrixXd integrand(nt, 2);  // A(t-s) tanh(2 pi y(s)) rows, per fixed t
  Eigen::MatrixXd out(nt, 2);
  for (int j = 0; j < nt; ++j) {
    const double tj = j * h;
    for (int i = 0; i <= j; ++i) {
      const double arg = kTwoPi * (tj - i * h);
      const double c = std::cos(arg), s = std::sin(arg);
      const double g0 = std::tanh(kTwoPi * y(i, 0));
      const double g1 = std::tanh(kTwoPi * y(i, 1));
      integrand(i, 0) = c * g0 - s * g1;
      integrand(i, 1) = -s * g0 - c * g1;
    }
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    if (j >= 1) {
      for (int i = 0; i <= j; ++i) {
        const double w = (i == 0 || i == j) ? h / 2.0 : h;
        acc += w * integrand.row(i).transpose();
      }
    }
    out.row(j) = (acc + forcing(tj, z0)).transpose();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd solve_ie(const Eigen::Vector2d& z0, const IEKernelSpec& spec) {
  if (spec.nt < 2) throw ParameterError("solve_ie: needs at least 2 time nodes");
  if (spec.tolerance <= 0.0) throw ParameterError("solve_ie: tolerance must be positive");
  const int nt = spec.nt;
  const double h = 1.0 / (nt - 1);

  Eigen::MatrixXd y(nt, 2);
  for (int j = 0; j < nt; ++j) y.row(j) = forcing(j * h, z0).transpose();

  double update = std::numeric_limits<double>::infinity();
  for (int it = 0; it < spec.max_iterations; ++it) {
    Eigen::MatrixXd next = apply_rhs(y, z0, nt);
    update = (next - y).cwiseAbs().maxCoeff();
    y = std::move(next);
    if (update < spec.tolerance) return y;
  }
  throw ConvergenceError("solve_ie: no convergence after " +
                         std::to_string(spec.max_iterations) +
                         " iterations (residual " + std::to_string(update) + ")");
}

double ie_residual(const Eigen::MatrixXd& y, const Eigen::Vector2d& z0, const IEKernelSpec& spec) {
  return (apply_rhs(y, z0, spec.nt) - y).cwiseAbs().maxCoeff();
}

Dataset gen_spirals(int count, const IEKernelSpec& spec, std::uint64_t seed) {
  if (count < 1) throw ParameterError("gen_spirals: count must be >= 1");
  Dataset ds;
  ds.grid = GridDesc{.dim = 1, .nx = 1, .nt = spec.nt, .channels = 2,
                     .x0 = 0.0, .x1 = 0.0, .t0 = 0.0, .t1 = 1.0};
  ds.meta.generator = "spirals";
  ds.meta.seed = seed;
  ds.meta.params = {ds.grid.x0, ds.grid.x1, ds.grid.t0, ds.grid.t1,
                    spec.z0_lo, spec.z0_hi, spec.tolerance,
                    static_cast<double>(spec.max_iterations)};

  ds.samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    Eigen::Vector2d z0(rng.uniform(spec.z0_lo, spec.z0_hi),
                       rng.uniform(spec.z0_lo, spec.z0_hi));
    Eigen::MatrixXd y = solve_ie(z0, spec);
    GridFunction traj = GridFunction::zeros(ds.grid);
    for (int j = 0; j < spec.nt; ++j) {
      traj.at(0, j, 0) = y(j, 0);
      traj.at(0, j, 1) = y(j, 1);
    }
    ds.samples.push_back(make_sample(std::move(traj)));
  }
  return ds;
}

}  // namespace lsno
