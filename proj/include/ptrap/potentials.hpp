#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/axial_basis.hpp"
#include "ptrap/electrostatics.hpp"
#include "ptrap/geometry.hpp"

namespace ptrap {

struct IonSpecies {
  double mass = 0.0;    // kg
  double charge = 0.0;  // C
  std::string label;

  static IonSpecies calcium40();
  void validate() const;
};

struct DriveConfig {
  double u_rf = 0.0;      // V, amplitude
  double u_dc = 0.0;      // V
  double omega_rf = 0.0;  // rad/s

  void validate() const;
};

/// Polynomial expansion of the potential along the two radial principal axes
/// through `center`. `coefficients[n]` is c_n along the axis of positive
/// curvature, `coefficients_minor[n]` along the perpendicular one. Per volt.
struct RadialMultipoleFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd coefficients_minor;
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  Vec3 axis_minor = Vec3::UnitZ();
  double radius = 0.0;
  double residual = 0.0;  // worst RMS misfit of the two axis fits, V

  double c(int n) const { return n < coefficients.size() ? coefficients[n] : 0.0; }
};

/// Taylor-like expansion of the axial potential about its minimum.
struct AxialPolynomialFit {
  Eigen::VectorXd coefficients;  // d_n, V/m^n for the given voltages
  double center = 0.0;           // location of the minimum, m
  double window = 0.0;           // full width of the fit interval, m
  double residual = 0.0;

  double d(int n) const { return n < coefficients.size() ? coefficients[n] : 0.0; }
};

struct StabilityParams {
  double a = 0.0;
  double q = 0.0;

  /// Inside the lowest stability region in the small-a regime.
  bool lowest_region() const { return std::abs(a) < 0.05 && std::abs(q) <= 0.9; }
};

struct TrapCharacterization {
  double R = 0.0;          // m, nearest electrode surface from the minimum
  double omega_sec = 0.0;  // rad/s, lowest-order Mathieu estimate
  double omega_rad = 0.0;  // rad/s, from the pseudopotential curvature
  double omega_ax = 0.0;   // rad/s
  double depth = 0.0;      // eV
  Vec3 minimum = Vec3::Zero();
  std::vector<double> barriers;  // eV, per escape direction +y,-y,+z,-z,+x,-x
};

using ScalarField = std::function<double(const Vec3&)>;
using VectorField = std::function<Vec3(const Vec3&)>;

/// Least-squares fit of `field` on Chebyshev samples along the two principal
/// axes of its radial (y, z) Hessian at `center`.
RadialMultipoleFit fit_radial(const ScalarField& field, const Vec3& center, double radius,
                              int order, int samples = 0);

/// Locates the minimum of sum_i u_i V_i(x) within `window` around `center`
/// and fits a polynomial of `order` over a window of that width about it.
AxialPolynomialFit fit_axial(const AxialBasis& basis, const Eigen::VectorXd& voltages,
                             double center, double window, int order);

StabilityParams stability(double c2, const DriveConfig& drive, const IonSpecies& ion);

/// omega_rf/2 sqrt(a + q^2/2). Throws SolverError when the radicand is <= 0.
double secular_frequency(const StabilityParams& params, double omega_rf);

/// sqrt(2 e U d2 / m) for a fit taken per volt and scaled by U.
double axial_frequency(const AxialPolynomialFit& fit, double applied_scale, const IonSpecies& ion);

/// Inverse of axial_frequency: the scale U that yields `omega`.
double voltage_for_axial_frequency(const AxialPolynomialFit& fit, double omega,
                                   const IonSpecies& ion);

struct DepthSearch {
  Vec3 start = Vec3::Zero();
  double ray_length = 400e-6;  // m, length of each escape ray
  double ray_step = 1e-6;      // m
  double newton_step = 1e-6;   // m, finite-difference step for the minimum search
};

struct PseudopotentialFields {
  VectorField rf_gradient;            // grad of the unit-amplitude RF potential, V/m per V
  ScalarField dc_potential;           // static potential, V (may be empty)
  ScalarField surface_distance;       // m (may be empty)
};

/// Psi(r) = e^2 |grad phi_rf|^2 U_rf^2 / (4 m omega_rf^2) + e phi_dc(r), in J.
double pseudopotential(const PseudopotentialFields& fields, const DriveConfig& drive,
                       const IonSpecies& ion, const Vec3& r);

/// Minimum of Psi near `search.start`, then the lowest barrier along the six
/// axis-aligned escape rays. Fills R, omega_rad, depth and minimum.
TrapCharacterization pseudopotential_depth(const PseudopotentialFields& fields,
                                           const DriveConfig& drive, const IonSpecies& ion,
                                           const DepthSearch& search = {});

/// Field callbacks of a solved trap: RF from the RF1+RF2 unit solve, DC from
/// the given electrode voltages (DC labels only).
PseudopotentialFields trap_fields(const std::vector<BasisPotential>& basis,
                                  const Eigen::VectorXd& dc_voltages);

// Sweeps. Each point is an independent BEM solve.

struct RadialSweepRow {
  double value = 0.0;  // swept parameter, m
  double c2 = 0.0;
  double c4 = 0.0;
  double c4_over_c2 = 0.0;
  double c1 = 0.0;
  double c3 = 0.0;
};

struct AxialSweepRow {
  double value = 0.0;  // swept parameter, m
  double d2 = 0.0;     // per volt, trapping sign for the applied voltage
  double d4 = 0.0;
};

struct SweepOptions {
  int refinement = 1;
  MeshOptions mesh;
  int fit_order = 6;
  double radial_radius_factor = 0.1;  // radius = factor * g
  double axial_window_factor = 0.8;   // full window = factor * k
  double segment_voltage = -1.0;      // V on the swept segment
  std::string cache_dir;              // empty disables caching
  // Resize the DC row and the RF rails to exactly n_segments pitches at
  // every point, so segment-width sweeps keep the row edges adjacent.
  bool fit_row = false;
};

/// Solve one geometry and fit the RF potential at the trap centre.
RadialSweepRow radial_point(const TrapGeometryParams& params, const SweepOptions& options);

/// Solve one geometry and fit the potential of the central segment at
/// `segment_voltage`, others grounded. d_n are divided by |segment_voltage|.
AxialSweepRow axial_point(const TrapGeometryParams& params, const SweepOptions& options);

/// One row per value of the named parameter (see sweep_parameter). Points
/// run in parallel over `threads` workers; row order follows `values`.
std::vector<RadialSweepRow> radial_sweep(const TrapGeometryParams& base, std::string_view name,
                                         const std::vector<double>& values,
                                         const SweepOptions& options, int threads = 1);
std::vector<AxialSweepRow> axial_sweep(const TrapGeometryParams& base, std::string_view name,
                                       const std::vector<double>& values,
                                       const SweepOptions& options, int threads = 1);

/// Location of the maximum of |d2| refined by a parabola through the best
/// grid point and its neighbours.
double refined_peak(const std::vector<double>& x, const std::vector<double>& y);

/// First sign change of y(x), linearly interpolated. NaN when none.
double first_zero_crossing(const std::vector<double>& x, const std::vector<double>& y);

void write_radial_sweep_csv(std::ostream& out, const std::vector<RadialSweepRow>& rows);
void write_axial_sweep_csv(std::ostream& out, const std::vector<AxialSweepRow>& rows);

}  // namespace ptrap
