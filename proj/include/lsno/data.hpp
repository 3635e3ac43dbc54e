#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lsno/grid.hpp"

namespace lsno {

/// One training pair: snapshots available at initialization (t = 0 and
/// t = 1, each nx*channels values) and the full target trajectory they are
/// drawn from.
struct Sample {
  Eigen::ArrayXd init0;
  Eigen::ArrayXd init1;
  GridFunction target;
};

struct DatasetMeta {
  std::string generator;
  std::uint64_t seed = 0;
  std::vector<double> params;  // [x0, x1, t0, t1, generator-specific...]
};

struct Dataset {
  GridDesc grid;
  std::vector<Sample> samples;
  DatasetMeta meta;

  int count() const { return static_cast<int>(samples.size()); }
};

/// Extract the t=0 / t=1 snapshots from a trajectory and wrap it as a Sample.
Sample make_sample(GridFunction target);

// ---- integral-equation spirals ---------------------------------------------

/// Volterra setup y(t) = int_0^t A(t-s) tanh(2 pi y(s)) ds + z0 + f(t) on
/// [0, 1], with A the 2x2 kernel [[cos, -sin], [-sin, -cos]] of 2 pi (t-s)
/// and f(t) = (cos t, cos(t+pi)). Solved by fixed-point iteration with the
/// trapezoid rule on the time grid.
struct IEKernelSpec {
  int nt = 100;               // time nodes on [0, 1]
  double z0_lo = -2.0, z0_hi = 2.0;
  double tolerance = 1e-9;    // sup-norm update threshold
  int max_iterations = 200;
};

/// Converged trajectory as an [nt x 2] matrix (rows are time nodes).
Eigen::MatrixXd solve_ie(const Eigen::Vector2d& z0, const IEKernelSpec& spec);

/// Sup-norm defect ||y - RHS(y)|| of a trajectory under the same
/// discretization; the independent self-check of the solver.
double ie_residual(const Eigen::MatrixXd& y, const Eigen::Vector2d& z0, const IEKernelSpec& spec);

Dataset gen_spirals(int count, const IEKernelSpec& spec, std::uint64_t seed);

// ---- viscous Burgers --------------------------------------------------------

/// u_t + u u_x = nu u_xx on the periodic unit interval, pseudo-spectral with
/// 2/3-rule dealiasing and integrating-factor RK4 substeps.
struct BurgersSpec {
  int s = 64;          // spatial resolution (power of two)
  int nt = 50;         // stored snapshots at uniform times in [0, 1]
  double nu = 0.1;
  // Initial condition: Gaussian random field with Fourier coefficient
  // variance amp * (k^2 + tau^2)^(-decay) for angular wavenumber k = 2 pi m,
  // up to cutoff_mode. amp = tau^(2 decay) gives the mean mode unit variance.
  double tau = 5.0;
  double decay = 2.0;
  double amp = 625.0;
  int cutoff_mode = 16;
  double cfl = 0.5;

  void validate() const;
};

/// Snapshot matrix [s x nt]; column j is u(., t_j).
Eigen::MatrixXd solve_burgers(const Eigen::VectorXd& u0, const BurgersSpec& spec);

/// Random initial profile of the spec's Gaussian random field, s nodes.
Eigen::VectorXd burgers_initial_condition(const BurgersSpec& spec, std::uint64_t sample_seed);

Dataset gen_burgers(int count, const BurgersSpec& spec, std::uint64_t seed);

}  // namespace lsno
