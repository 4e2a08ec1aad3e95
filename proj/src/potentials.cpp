#include "ptrap/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "ptrap/cache.hpp"
#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"
#include "ptrap/polyfit.hpp"

namespace ptrap {

IonSpecies IonSpecies::calcium40() {
  return {39.962590863 * constants::atomic_mass_unit, constants::elementary_charge, "40Ca+"};
}

void IonSpecies::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("ion: mass must be > 0");
  if (charge == 0.0 || !std::isfinite(charge)) throw ConfigError("ion: charge must be nonzero");
}

void DriveConfig::validate() const {
  if (!(omega_rf > 0.0) || !std::isfinite(omega_rf)) {
    throw ConfigError("drive: omega_rf must be > 0");
  }
  if (!std::isfinite(u_rf) || !std::isfinite(u_dc)) throw ConfigError("drive: non-finite voltage");
}

RadialMultipoleFit fit_radial(const ScalarField& field, const Vec3& center, double radius,
                              int order, int samples) {
  if (order < 4) throw ConfigError("fit_radial: order must be >= 4");
  if (!(radius > 0.0)) throw ConfigError("fit_radial: radius must be > 0");

  // Radial Hessian by central differences; its eigenvectors are the
  // principal axes of the quadrupole term.
  const double h = 0.25 * radius;
  auto at = [&](double dy, double dz) { return field(center + Vec3(0.0, dy, dz)); };
  const double f0 = at(0, 0);
  const double hyy = (at(h, 0) - 2 * f0 + at(-h, 0)) / (h * h);
  const double hzz = (at(0, h) - 2 * f0 + at(0, -h)) / (h * h);
  const double hyz = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
  Eigen::Matrix2d hess;
  hess << hyy, hyz, hyz, hzz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(hess);
  // Largest eigenvalue first: the axis of positive curvature.
  const Eigen::Vector2d major = es.eigenvectors().col(1);
  const Eigen::Vector2d minor = es.eigenvectors().col(0);

  RadialMultipoleFit out;
  out.center = center;
  out.radius = radius;
  out.axis = Vec3(0.0, major[0], major[1]);
  out.axis_minor = Vec3(0.0, minor[0], minor[1]);

  auto fit_along = [&](const Vec3& dir) {
    const std::function<double(double)> f = [&](double r) { return field(center + r * dir); };
    const auto fit = fit_polynomial<double>(f, 0.0, radius, order, samples);
    if (fit.condition > 1e8) {
      throw SolverError("fit_radial: ill-conditioned fit (too few samples)");
    }
    return fit;
  };
  const auto fa = fit_along(out.axis);
  const auto fb = fit_along(out.axis_minor);
  out.coefficients = fa.coefficients;
  out.coefficients_minor = fb.coefficients;
  out.residual = std::max(fa.residual, fb.residual);
  return out;
}

AxialPolynomialFit fit_axial(const AxialBasis& basis, const Eigen::VectorXd& voltages,
                             double center, double window, int order) {
  if (!(window > 0.0)) throw ConfigError("fit_axial: window must be > 0");
  const double half = 0.5 * window;
  const double x0 = locate_minimum(basis, voltages, center - half, center + half);
  if (!std::isfinite(x0)) throw SolverError("fit_axial: no potential minimum in window");
  if (x0 - half < basis.x_min() || x0 + half > basis.x_max()) {
    throw SolverError("fit_axial: fit window extends beyond the sampled axis");
  }
  const std::function<double(double)> f = [&](double x) {
    return basis.combined(voltages, x).value;
  };
  const auto fit = fit_polynomial<double>(f, x0, half, order);
  AxialPolynomialFit out;
  out.coefficients = fit.coefficients;
  out.center = x0;
  out.window = window;
  out.residual = fit.residual;
  return out;
}

StabilityParams stability(double c2, const DriveConfig& drive, const IonSpecies& ion) {
  drive.validate();
  ion.validate();
  const double w2 = drive.omega_rf * drive.omega_rf;
  StabilityParams p;
  p.a = 4.0 * ion.charge * drive.u_dc * c2 / (ion.mass * w2);
  p.q = 2.0 * ion.charge * drive.u_rf * c2 / (ion.mass * w2);
  return p;
}

double secular_frequency(const StabilityParams& params, double omega_rf) {
  const double radicand = params.a + 0.5 * params.q * params.q;
  if (radicand < 0.0) throw SolverError("secular_frequency: a + q^2/2 < 0, ion not trapped");
  return 0.5 * omega_rf * std::sqrt(radicand);
}

double axial_frequency(const AxialPolynomialFit& fit, double applied_scale, const IonSpecies& ion) {
  ion.validate();
  const double k = 2.0 * ion.charge * applied_scale * fit.d(2);
  if (!(k > 0.0)) throw SolverError("axial_frequency: anti-trapping curvature (e U d2 <= 0)");
  return std::sqrt(k / ion.mass);
}

double voltage_for_axial_frequency(const AxialPolynomialFit& fit, double omega,
                                   const IonSpecies& ion) {
  ion.validate();
  if (fit.d(2) == 0.0) throw SolverError("voltage_for_axial_frequency: d2 is zero");
  return ion.mass * omega * omega / (2.0 * ion.charge * fit.d(2));
}

double pseudopotential(const PseudopotentialFields& fields, const DriveConfig& drive,
                       const IonSpecies& ion, const Vec3& r) {
  const Vec3 g = fields.rf_gradient(r);
  const double e = ion.charge;
  double psi = e * e * g.squaredNorm() * drive.u_rf * drive.u_rf /
               (4.0 * ion.mass * drive.omega_rf * drive.omega_rf);
  if (fields.dc_potential) psi += e * fields.dc_potential(r);
  return psi;
}

TrapCharacterization pseudopotential_depth(const PseudopotentialFields& fields,
                                           const DriveConfig& drive, const IonSpecies& ion,
                                           const DepthSearch& search) {
  drive.validate();
  ion.validate();
  if (!fields.rf_gradient) throw ConfigError("pseudopotential_depth: missing RF field");
  auto psi = [&](const Vec3& r) { return pseudopotential(fields, drive, ion, r); };

  // Newton iteration with a finite-difference gradient and Hessian.
  const double h = search.newton_step;
  auto derivatives = [&](const Vec3& r, Vec3& grad, Eigen::Matrix3d& hess) {
    const double f0 = psi(r);
    for (int i = 0; i < 3; ++i) {
      const Vec3 ei = h * Vec3::Unit(i);
      const double fp = psi(r + ei), fm = psi(r - ei);
      grad[i] = (fp - fm) / (2 * h);
      hess(i, i) = (fp - 2 * f0 + fm) / (h * h);
      for (int j = i + 1; j < 3; ++j) {
        const Vec3 ej = h * Vec3::Unit(j);
        hess(i, j) = hess(j, i) =
            (psi(r + ei + ej) - psi(r + ei - ej) - psi(r - ei + ej) + psi(r - ei - ej)) /
            (4 * h * h);
      }
    }
    return f0;
  };

  Vec3 r = search.start;
  Vec3 grad;
  Eigen::Matrix3d hess;
  for (int it = 0; it < 30; ++it) {
    derivatives(r, grad, hess);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hess);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw SolverError("pseudopotential_depth: no bounded minimum found near the start point");
    }
    Vec3 step = -hess.ldlt().solve(grad);
    const double limit = 10.0 * h;
    if (step.norm() > limit) step *= limit / step.norm();
    r += step;
    if (step.norm() < 1e-12) break;
  }
  const double psi_min = derivatives(r, grad, hess);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hess);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw SolverError("pseudopotential_depth: no bounded minimum found");
  }

  TrapCharacterization out;
  out.minimum = r;
  // Radial frequency from the weaker curvature perpendicular to x.
  Eigen::Matrix2d radial = hess.block<2, 2>(1, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> rs(radial);
  out.omega_rad = std::sqrt(std::max(0.0, rs.eigenvalues().minCoeff()) / ion.mass);

  const Vec3 dirs[6] = {Vec3::UnitY(), -Vec3::UnitY(), Vec3::UnitZ(),
                        -Vec3::UnitZ(), Vec3::UnitX(), -Vec3::UnitX()};
  const int steps = static_cast<int>(std::ceil(search.ray_length / search.ray_step));
  double depth = std::numeric_limits<double>::infinity();
  for (const Vec3& d : dirs) {
    double barrier = 0.0;
    for (int s = 1; s <= steps; ++s) {
      const Vec3 p = r + (s * search.ray_step) * d;
      if (fields.surface_distance && fields.surface_distance(p) < search.ray_step) break;
      barrier = std::max(barrier, psi(p) - psi_min);
    }
    const double ev = barrier / constants::elementary_charge;
    out.barriers.push_back(ev);
    depth = std::min(depth, ev);
  }
  out.depth = depth;
  if (fields.surface_distance) out.R = fields.surface_distance(r);
  return out;
}

PseudopotentialFields trap_fields(const std::vector<BasisPotential>& basis,
                                  const Eigen::VectorXd& dc_voltages) {
  if (basis.empty()) throw ConfigError("trap_fields: empty basis");
  const ElectrodeMesh& mesh = *basis.front().solution.mesh;
  const int ne = mesh.electrode_count();
  if (dc_voltages.size() != ne) throw ConfigError("trap_fields: voltage count mismatch");
  Eigen::VectorXd rf = Eigen::VectorXd::Zero(ne);
  rf[mesh.electrode_id("RF1")] = 1.0;
  rf[mesh.electrode_id("RF2")] = 1.0;
  Eigen::VectorXd dc = dc_voltages;
  dc[mesh.electrode_id("RF1")] = 0.0;
  dc[mesh.electrode_id("RF2")] = 0.0;

  auto rf_solution = std::make_shared<const ChargeSolution>(superpose(basis, rf));
  PseudopotentialFields f;
  f.rf_gradient = [rf_solution](const Vec3& p) { return evaluate(*rf_solution, p).gradient; };
  if (dc.cwiseAbs().maxCoeff() > 0.0) {
    auto dc_solution = std::make_shared<const ChargeSolution>(superpose(basis, dc));
    f.dc_potential = [dc_solution](const Vec3& p) { return evaluate(*dc_solution, p).potential; };
  }
  MeshPtr m = basis.front().solution.mesh;
  f.surface_distance = [m](const Vec3& p) { return m->surface_distance(p); };
  return f;
}

namespace {

std::vector<BasisPotential> solve_basis(const TrapGeometryParams& params,
                                        const SweepOptions& options) {
  auto mesh = std::make_shared<const ElectrodeMesh>(
      build_two_layer(params, options.refinement, options.mesh));
  return cached_basis_potentials(mesh, options.cache_dir);
}

}  // namespace

RadialSweepRow radial_point(const TrapGeometryParams& params, const SweepOptions& options) {
  const auto basis = solve_basis(params, options);
  const ElectrodeMesh& mesh = *basis.front().solution.mesh;
  Eigen::VectorXd rf = Eigen::VectorXd::Zero(mesh.electrode_count());
  rf[mesh.electrode_id("RF1")] = 1.0;
  rf[mesh.electrode_id("RF2")] = 1.0;
  const ChargeSolution sol = superpose(basis, rf);
  const ScalarField field = [&](const Vec3& p) { return evaluate(sol, p).potential; };
  const auto fit = fit_radial(field, Vec3::Zero(), options.radial_radius_factor * params.rf_dc_gap,
                              options.fit_order);
  RadialSweepRow row;
  row.c1 = fit.c(1);
  row.c2 = fit.c(2);
  row.c3 = fit.c(3);
  row.c4 = fit.c(4);
  row.c4_over_c2 = row.c4 / row.c2;
  return row;
}

AxialSweepRow axial_point(const TrapGeometryParams& params, const SweepOptions& options) {
  if (options.segment_voltage == 0.0) throw ConfigError("axial sweep: segment voltage is zero");
  const auto basis = solve_basis(params, options);
  const auto segments = segment_bases(basis);
  const int mid = params.n_segments / 2;
  const double c = params.segment_center(mid);
  const double k = params.segment_width;
  const double window = options.axial_window_factor * k;

  // 0.1 um grid wide enough for the fit window around a slightly shifted minimum.
  const double span = 0.5 * window + std::max(0.25 * k, 10e-6);
  const int n = static_cast<int>(std::ceil(2.0 * span / 0.1e-6)) + 1;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(n, c - span, c + span);
  const AxialBasis axial = axial_line_scan({segments[mid]}, grid);
  Eigen::VectorXd u(1);
  u[0] = options.segment_voltage;
  const auto fit = fit_axial(axial, u, c, window, options.fit_order);
  AxialSweepRow row;
  row.d2 = fit.d(2) / std::abs(options.segment_voltage);
  row.d4 = fit.d(4) / std::abs(options.segment_voltage);
  return row;
}

namespace {

// Sweep points are independent; each worker owns its output slot. Threads
// beyond one split the points, the BEM inside each point stays sequential
// so the results do not depend on the thread count.
template <typename Row, typename Fn>
std::vector<Row> run_sweep(const TrapGeometryParams& base, std::string_view name,
                           const std::vector<double>& values, int threads, Fn point) {
  const auto points = sweep_parameter(base, name, values);
  std::vector<Row> rows(points.size());
  std::vector<std::string> errors(points.size());
  const int n = static_cast<int>(points.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, threads)) if (threads > 1)
  for (int i = 0; i < n; ++i) {
    try {
      rows[i] = point(points[i]);
      rows[i].value = values[i];
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      std::ostringstream msg;
      msg << "sweep " << name << " = " << values[i] << ": " << errors[i];
      throw SolverError(msg.str());
    }
  }
  return rows;
}

}  // namespace

std::vector<RadialSweepRow> radial_sweep(const TrapGeometryParams& base, std::string_view name,
                                         const std::vector<double>& values,
                                         const SweepOptions& options, int threads) {
  return run_sweep<RadialSweepRow>(base, name, values, threads, [&](TrapGeometryParams p) {
    if (options.fit_row) p.axial_extent = p.electrode_length = p.n_segments * p.segment_pitch();
    return radial_point(p, options);
  });
}

std::vector<AxialSweepRow> axial_sweep(const TrapGeometryParams& base, std::string_view name,
                                       const std::vector<double>& values,
                                       const SweepOptions& options, int threads) {
  return run_sweep<AxialSweepRow>(base, name, values, threads, [&](TrapGeometryParams p) {
    if (options.fit_row) p.axial_extent = p.electrode_length = p.n_segments * p.segment_pitch();
    return axial_point(p, options);
  });
}

double refined_peak(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw ConfigError("refined_peak: need at least three matching samples");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (std::abs(y[i]) > std::abs(y[best])) best = i;
  }
  if (best == 0 || best + 1 == y.size()) return x[best];
  // Parabola through three points, possibly non-uniform.
  const double x0 = x[best - 1], x1 = x[best], x2 = x[best + 1];
  const double y0 = std::abs(y[best - 1]), y1 = std::abs(y[best]), y2 = std::abs(y[best + 1]);
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curv = (d12 - d01) / (x2 - x0);
  if (curv >= 0.0) return x1;
  return 0.5 * (x0 + x1) - d01 / (2.0 * curv);
}

double first_zero_crossing(const std::vector<double>& x, const std::vector<double>& y) {
  for (std::size_t i = 1; i < y.size() && i < x.size(); ++i) {
    if ((y[i - 1] > 0.0) != (y[i] > 0.0)) {
      return x[i - 1] + (x[i] - x[i - 1]) * y[i - 1] / (y[i - 1] - y[i]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void write_radial_sweep_csv(std::ostream& out, const std::vector<RadialSweepRow>& rows) {
  out << "swept_value,c2,c4,c4_over_c2\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.value << ',' << r.c2 << ',' << r.c4 << ',' << r.c4_over_c2 << '\n';
  }
}

void write_axial_sweep_csv(std::ostream& out, const std::vector<AxialSweepRow>& rows) {
  out << "swept_value,d2,d4\n";
  out.precision(10);
  for (const auto& r : rows) out << r.value << ',' << r.d2 << ',' << r.d4 << '\n';
}

}  // namespace ptrap
