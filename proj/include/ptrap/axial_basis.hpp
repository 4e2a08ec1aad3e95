#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/spline.hpp"

namespace ptrap {

/// Per-electrode unit-voltage potentials V_i(x) sampled on the trap axis,
/// with cubic splines for V, V', V'' between samples.
class AxialBasis {
 public:
  AxialBasis() = default;
  /// `samples` has one row per grid point and one column per electrode.
  AxialBasis(Eigen::VectorXd x_grid, Eigen::MatrixXd samples, std::vector<std::string> names);

  int electrode_count() const { return static_cast<int>(splines_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const Eigen::VectorXd& grid() const { return grid_; }
  const Eigen::MatrixXd& samples() const { return samples_; }
  double x_min() const { return grid_[0]; }
  double x_max() const { return grid_[grid_.size() - 1]; }
  bool contains(double x) const { return x >= x_min() && x <= x_max(); }

  /// V_i and derivatives at x. Throws std::out_of_range outside the grid.
  SplineSample<double> operator()(int electrode, double x) const;

  /// Voltage-weighted sum sum_i u_i V_i(x) and its derivatives.
  SplineSample<double> combined(const Eigen::VectorXd& voltages, double x) const;

  /// Sum of the sampled columns weighted by `voltages`, on the grid.
  Eigen::VectorXd combined_samples(const Eigen::VectorXd& voltages) const;

  /// Basis restricted to the listed electrode columns, in that order.
  AxialBasis select(const std::vector<int>& columns) const;

 private:
  Eigen::VectorXd grid_;
  Eigen::MatrixXd samples_;
  std::vector<std::string> names_;
  std::vector<CubicSpline<double>> splines_;
};

/// Local minimum of sum_i u_i V_i(x) on [lo, hi] by safeguarded Newton on the
/// first derivative. Returns NaN when the bracket holds no interior minimum
/// with positive curvature.
double locate_minimum(const AxialBasis& basis, const Eigen::VectorXd& voltages, double lo,
                      double hi, double tolerance = 1e-13);

}  // namespace ptrap
