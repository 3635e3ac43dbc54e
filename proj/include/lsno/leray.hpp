#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "lsno/epsnet.hpp"
#include "lsno/nn.hpp"

namespace lsno {

/// Nonnegative coefficient vector on the probability simplex: the image of
/// the coordinate isomorphism applied to a projected span element.
struct LerayCoefficients {
  Eigen::VectorXd q;
};

/// Unconstrained output coefficients b = f(q).
struct OutputCoefficients {
  Eigen::VectorXd b;
};

/// Fixed-mode projection coefficients q_i = mu_i(x) / sum_j mu_j(x) against
/// an eps-net of stored grid functions. Throws NotCoveredError when every
/// mu vanishes (the input is outside the net's reach, so the projection
/// hypothesis fails and silently continuing would be wrong).
LerayCoefficients project_fixed(const GridFunction& x, const EpsNet& net);

/// Learned-mode coefficients q_i = mu^i(y) / max(sum_j mu^j(y), guard),
/// differentiable end-to-end through the mu-networks. Parameters of
/// network i live under prefix mu/<i>/.
Tensor project_learned(Tape& tape, const Tensor& y, const ParamStore& store,
                       const MuNetSpec& mu_spec, int n_basis, double denom_guard = 1e-8);

/// Coordinates of the grid nodes as g-network inputs: [nodes, dim] with the
/// node ordering of GridFunction storage (t for curves, (x,t) for fields).
Tensor grid_points(const GridDesc& grid);

/// Stacked basis evaluations g_i(points): [n, batch, M].
Tensor evaluate_basis(Tape& tape, const ParamStore& store, const MlpSpec& g_spec, int n_basis,
                      const Tensor& points);

/// Basis matrix [n, batch*M] with row i the flattened g_i(points); the
/// layout matmul-ready for reconstruction.
Tensor basis_matrix(Tape& tape, const ParamStore& store, const MlpSpec& g_spec, int n_basis,
                    const Tensor& points);

/// psi = sum_i b_i g_i evaluated on `grid`; linear in b.
GridFunction reconstruct(const OutputCoefficients& b, const ParamStore& store,
                         const MlpSpec& g_spec, int n_basis, const GridDesc& grid);

}  // namespace lsno
