#pragma once

#include <vector>

#include "lsno/grid.hpp"
#include "lsno/quadrature.hpp"

namespace lsno {

/// Finite family {x_i} covering a sample set: every sample used to build
/// the net lies within eps of some center under the chosen norm.
struct EpsNet {
  std::vector<GridFunction> centers;
  double eps = 0.0;
  NormSpec norm;

  int size() const { return static_cast<int>(centers.size()); }
};

/// Min / max of sum_j mu_j over a sample set, plus the indices whose sum
/// vanished (uncovered empty iff m_hat > 0).
struct CoverageReport {
  double m_hat = 0.0;
  double M_hat = 0.0;
  std::vector<int> uncovered;
};

double distance(const GridFunction& a, const GridFunction& b, const NormSpec& norm);

/// Cutoff weight max(0, eps - ||x - center||), the quadrature-approximated
/// mu when p < inf.
double mu_fixed(const GridFunction& x, const GridFunction& center, double eps,
                const NormSpec& norm);

/// First-fit greedy cover: scan in order, admit a sample as a new center iff
/// its distance to every existing center exceeds eps*(1 - slack). The slack
/// keeps admitted centers away from the coverage boundary so sum_j mu_j
/// stays bounded below on the samples.
EpsNet build_greedy(const std::vector<GridFunction>& samples, double eps, const NormSpec& norm,
                    double slack = 0.05);

CoverageReport verify_coverage(const std::vector<GridFunction>& samples, const EpsNet& net);

/// All n*(n-1)/2 pairwise distances, ascending.
std::vector<double> pairwise_distances(const std::vector<GridFunction>& samples,
                                       const NormSpec& norm);

/// Radius heuristic: the given quantile of the pairwise-distance
/// distribution. Not from any reference; just a usable default.
double suggest_eps(const std::vector<GridFunction>& samples, const NormSpec& norm,
                   double quantile = 0.4);

}  // namespace lsno
