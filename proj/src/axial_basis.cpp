#include "ptrap/axial_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ptrap {

AxialBasis::AxialBasis(Eigen::VectorXd x_grid, Eigen::MatrixXd samples,
                       std::vector<std::string> names)
    : grid_(std::move(x_grid)), samples_(std::move(samples)), names_(std::move(names)) {
  if (samples_.rows() != grid_.size()) {
    throw std::invalid_argument("AxialBasis: sample rows must match grid size");
  }
  if (names_.size() != static_cast<std::size_t>(samples_.cols())) {
    throw std::invalid_argument("AxialBasis: one name per electrode column required");
  }
  splines_.reserve(samples_.cols());
  for (Eigen::Index c = 0; c < samples_.cols(); ++c) {
    splines_.emplace_back(grid_, samples_.col(c));
  }
}

SplineSample<double> AxialBasis::operator()(int electrode, double x) const {
  return splines_.at(electrode)(x);
}

SplineSample<double> AxialBasis::combined(const Eigen::VectorXd& voltages, double x) const {
  if (voltages.size() != electrode_count()) {
    throw std::invalid_argument("AxialBasis: voltage count does not match electrodes");
  }
  SplineSample<double> sum;
  for (int i = 0; i < electrode_count(); ++i) {
    if (voltages[i] == 0.0) continue;
    const auto s = splines_[i](x);
    sum.value += voltages[i] * s.value;
    sum.d1 += voltages[i] * s.d1;
    sum.d2 += voltages[i] * s.d2;
    sum.d3 += voltages[i] * s.d3;
  }
  return sum;
}

Eigen::VectorXd AxialBasis::combined_samples(const Eigen::VectorXd& voltages) const {
  if (voltages.size() != electrode_count()) {
    throw std::invalid_argument("AxialBasis: voltage count does not match electrodes");
  }
  return samples_ * voltages;
}

AxialBasis AxialBasis::select(const std::vector<int>& columns) const {
  Eigen::MatrixXd s(samples_.rows(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> n;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    s.col(static_cast<Eigen::Index>(c)) = samples_.col(columns[c]);
    n.push_back(names_.at(columns[c]));
  }
  return AxialBasis(grid_, std::move(s), std::move(n));
}

double locate_minimum(const AxialBasis& basis, const Eigen::VectorXd& voltages, double lo,
                      double hi, double tolerance) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  lo = std::max(lo, basis.x_min());
  hi = std::min(hi, basis.x_max());
  if (!(hi > lo)) return nan;

  // Coarse scan for the lowest sample, then bracket the sign change of the
  // slope around it.
  const int n = 64;
  double best_x = lo, best_v = basis.combined(voltages, lo).value;
  for (int i = 1; i <= n; ++i) {
    const double x = i == n ? hi : lo + (hi - lo) * i / n;
    const double v = basis.combined(voltages, x).value;
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  const double step = (hi - lo) / n;
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  double fa = basis.combined(voltages, a).d1;
  double fb = basis.combined(voltages, b).d1;
  if (!(fa < 0.0 && fb > 0.0)) return nan;

  double x = best_x;
  for (int it = 0; it < 100; ++it) {
    const auto s = basis.combined(voltages, x);
    if (s.d1 < 0.0) a = x; else b = x;
    double next = (s.d2 > 0.0) ? x - s.d1 / s.d2 : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const bool done = std::abs(next - x) <= tolerance || (b - a) <= tolerance;
    x = next;
    if (done) break;
  }
  if (basis.combined(voltages, x).d2 <= 0.0) return nan;
  return x;
}

}  // namespace ptrap
