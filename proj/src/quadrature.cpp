#include "lsno/quadrature.hpp"

#include <cmath>

namespace lsno {

QuadratureRule make_rule(QuadKind kind, int k, double a, double b) {
  if (a >= b) throw ParameterError("make_rule: requires a < b");
  if (k < 2) throw ParameterError("make_rule: needs at least 2 nodes");
  if (kind == QuadKind::simpson && (k < 3 || k % 2 == 0))
    throw ParameterError("make_rule: simpson needs an odd node count >= 3");

  QuadratureRule rule;
  rule.kind = kind;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(k);
  rule.weights.resize(k);

  switch (kind) {
    case QuadKind::rectangle_forward: {
      const double h = (b - a) / k;
      for (int i = 0; i < k; ++i) {
        rule.nodes[i] = a + i * h;
        rule.weights[i] = h;
      }
      break;
    }
    case QuadKind::trapezoid: {
      const double h = (b - a) / (k - 1);
      for (int i = 0; i < k; ++i) {
        rule.nodes[i] = a + i * h;
        rule.weights[i] = (i == 0 || i == k - 1) ? h / 2.0 : h;
      }
      break;
    }
    case QuadKind::simpson: {
      const double h = (b - a) / (k - 1);
      for (int i = 0; i < k; ++i) {
        rule.nodes[i] = a + i * h;
        if (i == 0 || i == k - 1)
          rule.weights[i] = h / 3.0;
        else
          rule.weights[i] = (i % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
      }
      break;
    }
  }
  return rule;
}

double integrate(const Eigen::VectorXd& values, const QuadratureRule& rule) {
  if (values.size() != rule.nodes.size())
    throw DimensionError("integrate: sample count does not match rule nodes");
  return rule.weights.dot(values);
}

ProductRule tensor_product_rule(const QuadratureRule& rx, const QuadratureRule& rt) {
  ProductRule prod;
  prod.rx = rx;
  prod.rt = rt;
  const auto nx = rx.weights.size(), nt = rt.weights.size();
  prod.weights.resize(nx * nt);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < nt; ++j) prod.weights[i * nt + j] = rx.weights[i] * rt.weights[j];
  return prod;
}

double integrate(const Eigen::VectorXd& values, const ProductRule& rule) {
  if (values.size() != rule.weights.size())
    throw DimensionError("integrate: sample count does not match product rule");
  return rule.weights.dot(values);
}

Eigen::VectorXd node_weights(const GridDesc& grid, QuadKind kind) {
  Eigen::VectorXd wt;
  if (grid.nt == 1) {
    wt = Eigen::VectorXd::Constant(1, grid.t1 - grid.t0 == 0.0 ? 1.0 : grid.t1 - grid.t0);
  } else {
    wt = make_rule(kind, grid.nt, grid.t0, grid.t1).weights;
  }
  if (grid.dim == 1) return wt;

  // Periodic spatial axis: uniform weights (the periodic trapezoid rule).
  const double hx = (grid.x1 - grid.x0) / grid.nx;
  Eigen::VectorXd w(grid.nodes());
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.nt; ++j) w[static_cast<std::int64_t>(i) * grid.nt + j] = hx * wt[j];
  return w;
}

double lp_norm(const GridFunction& f, const NormSpec& spec) {
  if (spec.p < 1.0) throw ParameterError("lp_norm: p must be >= 1");
  const int ch = f.grid.channels;
  const std::int64_t n = f.grid.nodes();

  if (spec.p == kInfNorm) return f.values.abs().maxCoeff();

  Eigen::VectorXd node_mag(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < ch; ++c) {
      const double v = f.values[i * ch + c];
      s += v * v;
    }
    node_mag[i] = std::sqrt(s);
  }

  const Eigen::VectorXd w = node_weights(f.grid, spec.kind);
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += w[i] * std::pow(node_mag[i], spec.p);
  return std::pow(acc, 1.0 / spec.p);
}

double lp_norm(const Eigen::VectorXd& values, double p, const QuadratureRule& rule) {
  if (p < 1.0) throw ParameterError("lp_norm: p must be >= 1");
  if (p == kInfNorm) return values.cwiseAbs().maxCoeff();
  if (values.size() != rule.nodes.size())
    throw DimensionError("lp_norm: sample count does not match rule nodes");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    acc += rule.weights[i] * std::pow(std::abs(values[i]), p);
  return std::pow(acc, 1.0 / p);
}

double error_bound(int k, double a, double b, const SmoothnessSpec& smooth) {
  if (k < 1) throw ParameterError("error_bound: k must be >= 1");
  return (b - a) * smooth.rho / (2.0 * k);
}

}  // namespace lsno
