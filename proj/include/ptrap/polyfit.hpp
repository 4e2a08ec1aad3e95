#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace ptrap {

/// Least-squares polynomial fit of f(x) on [center - half_width, center + half_width].
template <typename Scalar = double>
struct PolynomialFit {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;  // f ~ sum c_n (x - center)^n
  Scalar center{};
  Scalar half_width{};
  Scalar residual{};       // RMS misfit at the samples
  Scalar condition{};      // condition number of the scaled design matrix
};

/// Chebyshev nodes of the first kind mapped to [center - h, center + h].
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> chebyshev_nodes(Scalar center, Scalar half_width,
                                                         int count) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(count);
  const Scalar pi = Scalar(3.14159265358979323846);
  for (int i = 0; i < count; ++i) {
    x[i] = center - half_width * std::cos(pi * (Scalar(i) + Scalar(0.5)) / Scalar(count));
  }
  return x;
}

/// Fits in the scaled variable s = (x - center) / half_width and rescales, so
/// the design matrix stays well conditioned for any window size.
template <typename Scalar = double>
PolynomialFit<Scalar> fit_polynomial(const std::function<Scalar(Scalar)>& f, Scalar center,
                                     Scalar half_width, int order, int samples = 0) {
  if (order < 0) throw std::invalid_argument("fit_polynomial: negative order");
  if (!(half_width > Scalar(0))) throw std::invalid_argument("fit_polynomial: empty window");
  if (samples == 0) samples = 4 * (order + 1) + 16;
  if (samples < order + 1) throw std::invalid_argument("fit_polynomial: too few samples");

  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Vector x = chebyshev_nodes<Scalar>(center, half_width, samples);
  Matrix design(samples, order + 1);
  Vector y(samples);
  for (int i = 0; i < samples; ++i) {
    const Scalar s = (x[i] - center) / half_width;
    Scalar p = 1;
    for (int n = 0; n <= order; ++n) {
      design(i, n) = p;
      p *= s;
    }
    y[i] = f(x[i]);
  }
  Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  PolynomialFit<Scalar> out;
  out.center = center;
  out.half_width = half_width;
  out.condition = sv[0] / sv[sv.size() - 1];
  Vector c = svd.solve(y);
  out.residual = std::sqrt((design * c - y).squaredNorm() / Scalar(samples));
  Scalar scale = 1;
  for (int n = 0; n <= order; ++n) {
    c[n] /= scale;
    scale *= half_width;
  }
  out.coefficients = std::move(c);
  return out;
}

}  // namespace ptrap
