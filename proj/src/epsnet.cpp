#include "lsno/epsnet.hpp"

#include <algorithm>
#include <cmath>

namespace lsno {

double distance(const GridFunction& a, const GridFunction& b, const NormSpec& norm) {
  require_same_grid(a, b);
  GridFunction diff(a.grid, (a.values - b.values).eval());
  return lp_norm(diff, norm);
}

double mu_fixed(const GridFunction& x, const GridFunction& center, double eps,
                const NormSpec& norm) {
  const double d = distance(x, center, norm);
  return d > eps ? 0.0 : eps - d;
}

EpsNet build_greedy(const std::vector<GridFunction>& samples, double eps, const NormSpec& norm,
                    double slack) {
  if (samples.empty()) throw ParameterError("build_greedy: sample set is empty");
  if (eps <= 0.0) throw ParameterError("build_greedy: eps must be positive");
  for (const GridFunction& s : samples) require_same_grid(samples.front(), s);

  EpsNet net;
  net.eps = eps;
  net.norm = norm;
  const double admit = eps * (1.0 - slack);
  for (const GridFunction& s : samples) {
    bool covered = false;
    for (const GridFunction& c : net.centers) {
      if (distance(s, c, norm) <= admit) {
        covered = true;
        break;
      }
    }
    if (!covered) net.centers.push_back(s);
  }
  return net;
}

CoverageReport verify_coverage(const std::vector<GridFunction>& samples, const EpsNet& net) {
  CoverageReport report;
  report.m_hat = std::numeric_limits<double>::infinity();
  report.M_hat = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    double total = 0.0;
    for (const GridFunction& c : net.centers) total += mu_fixed(samples[i], c, net.eps, net.norm);
    report.m_hat = std::min(report.m_hat, total);
    report.M_hat = std::max(report.M_hat, total);
    if (total == 0.0) report.uncovered.push_back(i);
  }
  if (samples.empty()) report.m_hat = report.M_hat = 0.0;
  return report;
}

std::vector<double> pairwise_distances(const std::vector<GridFunction>& samples,
                                       const NormSpec& norm) {
  std::vector<double> out;
  out.reserve(samples.size() * (samples.size() - 1) / 2);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      out.push_back(distance(samples[i], samples[j], norm));
  std::sort(out.begin(), out.end());
  return out;
}

double suggest_eps(const std::vector<GridFunction>& samples, const NormSpec& norm,
                   double quantile) {
  if (quantile < 0.0 || quantile > 1.0) throw ParameterError("suggest_eps: quantile in [0,1]");
  std::vector<double> d = pairwise_distances(samples, norm);
  if (d.empty()) throw ParameterError("suggest_eps: need at least two samples");
  const auto idx = static_cast<std::size_t>(quantile * (d.size() - 1));
  return d[idx];
}

}  // namespace lsno
