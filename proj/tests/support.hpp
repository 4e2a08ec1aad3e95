#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/axial_basis.hpp"

namespace ptrap::test {

/// Axial basis from analytic per-volt potentials on a uniform grid.
inline AxialBasis sampled_basis(const std::vector<std::function<double(double)>>& fns, double lo,
                                double hi, double spacing) {
  const int n = static_cast<int>(std::lround((hi - lo) / spacing)) + 1;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, lo, hi);
  Eigen::MatrixXd v(n, static_cast<Eigen::Index>(fns.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < fns.size(); ++j) {
    for (int i = 0; i < n; ++i) v(i, static_cast<Eigen::Index>(j)) = fns[j](x[i]);
    names.push_back("E" + std::to_string(j + 1));
  }
  return AxialBasis(x, v, names);
}

/// Single electrode with V(x) = x^2 / 2 per volt.
inline AxialBasis quadratic_basis(double half_span = 20e-6, double spacing = 0.05e-6) {
  return sampled_basis({[](double x) { return 0.5 * x * x; }}, -half_span, half_span, spacing);
}

/// Two Gaussian bumps standing in for neighbouring DC segments.
inline AxialBasis gaussian_pair(double separation = 60e-6, double width = 30e-6,
                                double spacing = 0.1e-6) {
  auto bump = [width](double c) {
    return [c, width](double x) { return std::exp(-(x - c) * (x - c) / (2.0 * width * width)); };
  };
  return sampled_basis({bump(0.0), bump(separation)}, -60e-6, separation + 60e-6, spacing);
}

}  // namespace ptrap::test
