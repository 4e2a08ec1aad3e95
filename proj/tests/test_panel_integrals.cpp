#include <doctest.h>

#include <cmath>

#include "ptrap/panel_integrals.hpp"

using namespace ptrap;

namespace {

// Tensor Gauss-Legendre reference for 1/|p - r'| over a rectangle, with the
// rectangle split into sub-cells so near points stay accurate.
double brute_force(const Panel& panel, const Vec3& p, int cells = 64) {
  static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  double sum = 0.0;
  const double du = 2.0 * panel.half_u / cells, dv = 2.0 * panel.half_v / cells;
  for (int a = 0; a < cells; ++a) {
    for (int b = 0; b < cells; ++b) {
      const double cu = -panel.half_u + (a + 0.5) * du;
      const double cv = -panel.half_v + (b + 0.5) * dv;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          const Vec3 r = panel.centroid + (cu + 0.5 * du * xg[i]) * panel.u +
                         (cv + 0.5 * dv * xg[j]) * panel.v;
          sum += wg[i] * wg[j] * 0.25 * du * dv / (p - r).norm();
        }
      }
    }
  }
  return sum;
}

Panel unit_square() {
  return Panel::rectangle(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.5);
}

}  // namespace

TEST_CASE("self term of a unit square equals 4 ln(1 + sqrt 2)") {
  const double exact = 4.0 * std::log(1.0 + std::sqrt(2.0));
  CHECK(self_integral(unit_square()) == doctest::Approx(exact).epsilon(1e-12));
  const Panel quad = Panel::quad(Vec3(-0.5, -0.5, 0), Vec3(0.5, -0.5, 0), Vec3(0.5, 0.5, 0),
                                 Vec3(-0.5, 0.5, 0));
  CHECK(self_integral(quad) == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("rectangle integral against brute-force quadrature") {
  const Panel p = Panel::rectangle(Vec3(1, 2, 3), Vec3(1, 1, 0), Vec3(-1, 1, 0), 0.3, 0.7);
  for (const Vec3& q : {Vec3(1.2, 2.1, 3.4), Vec3(3, 0, 1), Vec3(1.0, 2.0, 3.05)}) {
    CHECK(rectangle_integral(p, q).value == doctest::Approx(brute_force(p, q)).epsilon(1e-7));
  }
}

TEST_CASE("far field approaches area over distance") {
  const Panel p = unit_square();
  const Vec3 q(0, 0, 1000.0);
  CHECK(rectangle_integral(p, q).value == doctest::Approx(1.0 / 1000.0).epsilon(1e-6));
}

TEST_CASE("analytic gradient matches finite differences") {
  const Panel p = Panel::rectangle(Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 0.4, 0.25);
  const Vec3 q(0.3, -0.2, 0.15);
  const Vec3 g = rectangle_integral(p, q).gradient;
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = Vec3::Unit(k) * h;
    const double fd = (rectangle_integral(p, q + e).value - rectangle_integral(p, q - e).value) /
                      (2.0 * h);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("quadrature path agrees with the closed form") {
  const Panel r = Panel::rectangle(Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.2);
  const Panel q = Panel::quad(Vec3(-0.5, -0.2, 0), Vec3(0.5, -0.2, 0), Vec3(0.5, 0.2, 0),
                              Vec3(-0.5, 0.2, 0));
  for (const Vec3& pt : {Vec3(0.1, 0.1, 0.3), Vec3(2, 1, 0.5), Vec3(0.6, 0.0, 0.05)}) {
    CHECK(quad_integral(q, pt).value == doctest::Approx(rectangle_integral(r, pt).value).epsilon(1e-5));
    const Vec3 gq = quad_integral(q, pt).gradient, gr = rectangle_integral(r, pt).gradient;
    CHECK((gq - gr).norm() <= 1e-4 * gr.norm());
  }
}
