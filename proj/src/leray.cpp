#include "lsno/leray.hpp"

namespace lsno {

LerayCoefficients project_fixed(const GridFunction& x, const EpsNet& net) {
  if (net.size() == 0) throw ParameterError("project_fixed: empty net");
  Eigen::VectorXd mu(net.size());
  for (int i = 0; i < net.size(); ++i) mu[i] = mu_fixed(x, net.centers[i], net.eps, net.norm);
  const double total = mu.sum();
  if (total <= 0.0)
    throw NotCoveredError("input is farther than eps from every net center");
  return LerayCoefficients{mu / total};
}

Tensor project_learned(Tape& tape, const Tensor& y, const ParamStore& store,
                       const MuNetSpec& mu_spec, int n_basis, double denom_guard) {
  std::vector<Tensor> mus;
  mus.reserve(n_basis);
  for (int i = 0; i < n_basis; ++i)
    mus.push_back(mu_forward(tape, store, "mu/" + std::to_string(i) + "/", mu_spec, y));
  Tensor raw = concat(tape, mus);                       // [n]
  Tensor total = clamp_min(tape, sum(tape, raw), denom_guard);
  return div(tape, raw, total);
}

Tensor grid_points(const GridDesc& grid) {
  const std::int64_t n = grid.nodes();
  if (grid.dim == 1) {
    Eigen::ArrayXd pts(n);
    for (int j = 0; j < grid.nt; ++j) pts[j] = grid.node_t(j);
    return Tensor::from_array({n, 1}, std::move(pts));
  }
  Eigen::ArrayXd pts(n * 2);
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.nt; ++j) {
      const std::int64_t node = static_cast<std::int64_t>(i) * grid.nt + j;
      pts[node * 2] = grid.node_x(i);
      pts[node * 2 + 1] = grid.node_t(j);
    }
  return Tensor::from_array({n, 2}, std::move(pts));
}

Tensor evaluate_basis(Tape& tape, const ParamStore& store, const MlpSpec& g_spec, int n_basis,
                      const Tensor& points) {
  const Index batch = points.shape()[0];
  const Index m = g_spec.output_width();
  std::vector<Tensor> parts;
  parts.reserve(n_basis);
  for (int i = 0; i < n_basis; ++i) {
    Tensor gi = mlp_forward(tape, store, "g/" + std::to_string(i) + "/", g_spec, points);
    parts.push_back(reshape(tape, gi, {1, batch, m}));
  }
  return concat(tape, parts);
}

Tensor basis_matrix(Tape& tape, const ParamStore& store, const MlpSpec& g_spec, int n_basis,
                    const Tensor& points) {
  const Index batch = points.shape()[0];
  const Index m = g_spec.output_width();
  std::vector<Tensor> rows;
  rows.reserve(n_basis);
  for (int i = 0; i < n_basis; ++i) {
    Tensor gi = mlp_forward(tape, store, "g/" + std::to_string(i) + "/", g_spec, points);
    rows.push_back(reshape(tape, gi, {1, batch * m}));
  }
  return concat(tape, rows);
}

GridFunction reconstruct(const OutputCoefficients& b, const ParamStore& store,
                         const MlpSpec& g_spec, int n_basis, const GridDesc& grid) {
  if (b.b.size() != n_basis) throw DimensionError("reconstruct: coefficient count != n");
  Tape tape;
  tape.set_recording(false);
  Tensor points = grid_points(grid);
  Tensor basis = basis_matrix(tape, store, g_spec, n_basis, points);
  Tensor coeff = Tensor::from_array({1, static_cast<Index>(b.b.size())},
                                    Eigen::ArrayXd(b.b.array()));
  // Same matmul kernel as the training path, so reconstruction at a node is
  // bit-identical no matter what grid it is part of.
  Tensor psi = matmul(tape, coeff, basis);
  return GridFunction(grid, psi.values());
}

}  // namespace lsno
