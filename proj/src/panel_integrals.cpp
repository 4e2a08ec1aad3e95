#include "ptrap/panel_integrals.hpp"

#include <array>
#include <cmath>

namespace ptrap {

namespace {

// ln(y + r) with r = sqrt(y^2 + q2), stable for y < 0.
double log_y_plus_r(double y, double r, double q2) {
  if (y >= 0.0) return std::log(y + r);
  return std::log(q2 / (r - y));
}

// Antiderivative of 1/R over the plane, F(X,Y,Z) with d^2F/dXdY = 1/R.
double corner_term(double x, double y, double z, double r) {
  double f = 0.0;
  if (x != 0.0) f += x * log_y_plus_r(y, r, x * x + z * z);
  if (y != 0.0) f += y * log_y_plus_r(x, r, y * y + z * z);
  if (z != 0.0) f -= z * std::atan(x * y / (z * r));
  return f;
}

constexpr std::array<double, 4> kGauss4X = {-0.8611363115940526, -0.3399810435848563,
                                            0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGauss4W = {0.3478548451374538, 0.6521451548625461,
                                            0.6521451548625461, 0.3478548451374538};

Vec3 bilinear(const Panel& p, double s, double t) {
  return (1 - s) * (1 - t) * p.vertices[0] + s * (1 - t) * p.vertices[1] +
         s * t * p.vertices[2] + (1 - s) * t * p.vertices[3];
}

// Gauss 4x4 on each of n x n sub-patches of the bilinear surface.
PanelIntegral bilinear_quadrature(const Panel& p, const Vec3& x, int n) {
  PanelIntegral out;
  const double h = 1.0 / n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const double s = (a + 0.5 * (kGauss4X[i] + 1.0)) * h;
          const double t = (b + 0.5 * (kGauss4X[j] + 1.0)) * h;
          const Vec3 ds = (1 - t) * (p.vertices[1] - p.vertices[0]) +
                          t * (p.vertices[2] - p.vertices[3]);
          const Vec3 dt = (1 - s) * (p.vertices[3] - p.vertices[0]) +
                          s * (p.vertices[2] - p.vertices[1]);
          const double w = kGauss4W[i] * kGauss4W[j] * 0.25 * h * h * ds.cross(dt).norm();
          const Vec3 d = x - bilinear(p, s, t);
          const double r = d.norm();
          out.value += w / r;
          out.gradient -= w * d / (r * r * r);
        }
      }
    }
  }
  return out;
}

// Integral of 1/r over the flat triangle (apex, a, b) seen from its apex.
double apex_triangle(const Vec3& apex, const Vec3& a, const Vec3& b) {
  const Vec3 e = (b - a).normalized();
  const Vec3 foot = a + (apex - a).dot(e) * e;
  const double h = (apex - foot).norm();
  if (h == 0.0) return 0.0;
  const double ta = (a - foot).dot(e);
  const double tb = (b - foot).dot(e);
  return h * (std::asinh(tb / h) - std::asinh(ta / h));
}

}  // namespace

PanelIntegral rectangle_integral(const Panel& panel, const Vec3& p) {
  const Vec3 d = p - panel.centroid;
  const double xi = d.dot(panel.u);
  const double eta = d.dot(panel.v);
  const double zeta = d.dot(panel.normal);
  const double xs[2] = {-panel.half_u - xi, panel.half_u - xi};
  const double ys[2] = {-panel.half_v - eta, panel.half_v - eta};
  const double z2 = zeta * zeta;

  double value = 0.0;
  double d_xi = 0.0;
  double d_eta = 0.0;
  double d_zeta = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double sign = (i == j) ? 1.0 : -1.0;
      const double x = xs[i];
      const double y = ys[j];
      const double r = std::sqrt(x * x + y * y + z2);
      value += sign * corner_term(x, y, zeta, r);
      d_xi -= sign * log_y_plus_r(y, r, x * x + z2);
      d_eta -= sign * log_y_plus_r(x, r, y * y + z2);
      if (zeta != 0.0) d_zeta -= sign * std::atan(x * y / (zeta * r));
    }
  }
  PanelIntegral out;
  out.value = value;
  out.gradient = d_xi * panel.u + d_eta * panel.v + d_zeta * panel.normal;
  return out;
}

PanelIntegral quad_integral(const Panel& panel, const Vec3& p) {
  const double ratio = (p - panel.centroid).norm() / panel.size();
  int n = 1;
  if (ratio < 1.0) n = 8;
  else if (ratio < 4.0) n = 4;
  else if (ratio < 10.0) n = 2;
  return bilinear_quadrature(panel, p, n);
}

double self_integral(const Panel& panel) {
  if (panel.rectangular) return rectangle_integral(panel, panel.centroid).value;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    sum += apex_triangle(panel.centroid, panel.vertices[i], panel.vertices[(i + 1) % 4]);
  }
  return sum;
}

PanelIntegral panel_integral(const Panel& panel, const Vec3& p) {
  return panel.rectangular ? rectangle_integral(panel, p) : quad_integral(panel, p);
}

double influence(const Panel& source, const Vec3& p, bool self) {
  if (self) return self_integral(source);
  return panel_integral(source, p).value;
}

}  // namespace ptrap
