#pragma once

#include <Eigen/Core>
#include <limits>

#include "lsno/errors.hpp"
#include "lsno/grid.hpp"

namespace lsno {

enum class QuadKind { rectangle_forward, trapezoid, simpson };

/// Weighted-sum approximation of an integral over [a, b]. Weights are
/// nonnegative and sum to b - a.
struct QuadratureRule {
  QuadKind kind = QuadKind::trapezoid;
  double a = 0.0, b = 1.0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Uniform rule with k nodes. The forward rectangle rule places its nodes
/// at the k left endpoints a + i*(b-a)/k; trapezoid and simpson use the
/// inclusive grid a + i*(b-a)/(k-1). simpson needs an odd k >= 3.
QuadratureRule make_rule(QuadKind kind, int k, double a, double b);

double integrate(const Eigen::VectorXd& values, const QuadratureRule& rule);

/// 2-D tensor-product rule: nodes are the Cartesian product, weights the
/// products, flattened row-major with the x index slowest.
struct ProductRule {
  QuadratureRule rx, rt;
  Eigen::VectorXd weights;
};

ProductRule tensor_product_rule(const QuadratureRule& rx, const QuadratureRule& rt);

double integrate(const Eigen::VectorXd& values, const ProductRule& rule);

constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Which L^p norm to use and how to approximate its integral. The rule kind
/// is instantiated on the grid of the function being measured (tensor
/// product over both axes for 2-D grids; the periodic spatial axis gets
/// uniform weights).
struct NormSpec {
  double p = 2.0;  // >= 1, or kInfNorm
  QuadKind kind = QuadKind::trapezoid;
};

/// Quadrature-approximated L^p norm of a grid function. Multi-channel
/// values enter through the per-node Euclidean channel norm; p = inf is the
/// max of |value| over nodes and channels.
double lp_norm(const GridFunction& f, const NormSpec& spec);

/// 1-D flavor against an explicit rule; `values` are samples at the rule's
/// nodes.
double lp_norm(const Eigen::VectorXd& values, double p, const QuadratureRule& rule);

/// Per-node quadrature weights the NormSpec induces on a grid.
Eigen::VectorXd node_weights(const GridDesc& grid, QuadKind kind);

/// Analytic smoothness budget of the test-function generators: rho bounds
/// sup|u'| (and sup|u| where used) on the Hoelder ball C^{kappa,alpha}.
struct SmoothnessSpec {
  double rho = 1.0;
  int kappa = 1;
  double alpha = 1.0;
};

/// Uniform forward-rectangle error bound (b-a)*rho / (2k) for functions
/// with sup|u'| <= rho.
double error_bound(int k, double a, double b, const SmoothnessSpec& smooth);

}  // namespace lsno
