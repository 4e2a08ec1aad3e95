#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace ptrap {

/// Value and first three derivatives of a piecewise cubic at one point.
template <typename Scalar>
struct SplineSample {
  Scalar value{};
  Scalar d1{};
  Scalar d2{};
  Scalar d3{};
};

/// Interpolating cubic spline with not-a-knot end conditions.
///
/// Nodes must be strictly increasing and at least four. Queries outside
/// [front, back] throw std::out_of_range.
template <typename Scalar = double>
class CubicSpline {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  CubicSpline() = default;

  CubicSpline(Vector nodes, Vector values) : x_(std::move(nodes)), y_(std::move(values)) {
    const Eigen::Index n = x_.size();
    if (n < 4 || y_.size() != n) {
      throw std::invalid_argument("CubicSpline: need >= 4 nodes and matching values");
    }
    for (Eigen::Index i = 1; i < n; ++i) {
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("CubicSpline: nodes not increasing");
    }
    const Scalar span = x_[n - 1] - x_[0];
    const Scalar h0 = span / Scalar(n - 1);
    uniform_ = true;
    for (Eigen::Index i = 1; i < n && uniform_; ++i) {
      using std::abs;
      uniform_ = abs((x_[i] - x_[i - 1]) - h0) <= Scalar(1e-9) * h0;
    }
    solve_moments();
  }

  Eigen::Index size() const { return x_.size(); }
  const Vector& nodes() const { return x_; }
  const Vector& values() const { return y_; }
  const Vector& moments() const { return m_; }
  Scalar front() const { return x_[0]; }
  Scalar back() const { return x_[x_.size() - 1]; }
  bool contains(Scalar x) const { return x >= front() && x <= back(); }

  SplineSample<Scalar> operator()(Scalar x) const {
    const Eigen::Index i = interval(x);
    const Scalar h = x_[i + 1] - x_[i];
    const Scalar a = (x_[i + 1] - x) / h;
    const Scalar b = (x - x_[i]) / h;
    SplineSample<Scalar> s;
    s.value = a * y_[i] + b * y_[i + 1] +
              ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / Scalar(6);
    s.d1 = (y_[i + 1] - y_[i]) / h -
           (Scalar(3) * a * a - Scalar(1)) / Scalar(6) * h * m_[i] +
           (Scalar(3) * b * b - Scalar(1)) / Scalar(6) * h * m_[i + 1];
    s.d2 = a * m_[i] + b * m_[i + 1];
    s.d3 = (m_[i + 1] - m_[i]) / h;
    return s;
  }

 private:
  Eigen::Index interval(Scalar x) const {
    if (!contains(x)) throw std::out_of_range("CubicSpline: query outside node range");
    const Eigen::Index n = x_.size();
    Eigen::Index i;
    if (uniform_) {
      const Scalar h = (back() - front()) / Scalar(n - 1);
      using std::floor;
      i = static_cast<Eigen::Index>(floor((x - front()) / h));
      i = std::clamp<Eigen::Index>(i, 0, n - 2);
      // Guard against rounding at node boundaries.
      if (x < x_[i] && i > 0) --i;
      else if (x > x_[i + 1] && i < n - 2) ++i;
    } else {
      const auto it = std::upper_bound(x_.data(), x_.data() + n, x);
      i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(it - x_.data()) - 1, 0, n - 2);
    }
    return i;
  }

  // Second-derivative moments. Interior rows are the usual C2 conditions; the
  // not-a-knot rows are eliminated into the first and last interior rows so
  // the system stays tridiagonal.
  void solve_moments() {
    const Eigen::Index n = x_.size();
    Vector h(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];

    const Eigen::Index k = n - 2;  // unknowns M1..M_{n-2}
    Vector lower(k), diag(k), upper(k), rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index i = r + 1;
      lower[r] = h[i - 1];
      diag[r] = Scalar(2) * (h[i - 1] + h[i]);
      upper[r] = h[i];
      rhs[r] = Scalar(6) * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
    }
    // M0 = ((h0 + h1) M1 - h0 M2) / h1
    {
      const Scalar h0 = h[0], h1 = h[1];
      diag[0] += h0 * (h0 + h1) / h1;
      upper[0] -= h0 * h0 / h1;
      lower[0] = 0;
    }
    // M_{n-1} = ((hb + ha) M_{n-2} - hb M_{n-3}) / ha, ha = h[n-3], hb = h[n-2]
    {
      const Scalar ha = h[n - 3], hb = h[n - 2];
      diag[k - 1] += hb * (ha + hb) / ha;
      lower[k - 1] -= hb * hb / ha;
      upper[k - 1] = 0;
    }
    if (k == 2) {
      // Both not-a-knot rows touch the same pair of unknowns.
      Eigen::Matrix<Scalar, 2, 2> a;
      a << diag[0], upper[0], lower[1], diag[1];
      const Eigen::Matrix<Scalar, 2, 1> sol = a.fullPivLu().solve(rhs);
      m_.resize(n);
      m_[1] = sol[0];
      m_[2] = sol[1];
    } else {
      // Thomas algorithm.
      for (Eigen::Index r = 1; r < k; ++r) {
        const Scalar w = lower[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
      }
      m_.resize(n);
      m_[k] = rhs[k - 1] / diag[k - 1];
      for (Eigen::Index r = k - 2; r >= 0; --r) {
        m_[r + 1] = (rhs[r] - upper[r] * m_[r + 2]) / diag[r];
      }
    }
    m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
    m_[n - 1] = ((h[n - 3] + h[n - 2]) * m_[n - 2] - h[n - 2] * m_[n - 3]) / h[n - 3];
  }

  Vector x_;
  Vector y_;
  Vector m_;
  bool uniform_ = false;
};

}  // namespace ptrap
