#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/axial_basis.hpp"
#include "ptrap/potentials.hpp"
#include "ptrap/transport.hpp"

namespace ptrap {

/// Harmonic-plus-quartic model of the potential energy about its minimum.
struct WellParams {
  double t = 0.0;      // s
  double x0 = 0.0;     // m
  double omega = 0.0;  // rad/s
  double kappa = 0.0;  // J/m^4
};

struct DisplacementRecord {
  double t = 0.0;
  std::complex<double> alpha;
  double n_bar = 0.0;  // |alpha|^2
};

struct TransportDiagnostics {
  double duration = 0.0;  // s, switching time of the guess
  double excess_quanta_guess = 0.0;
  double excess_quanta_opt = std::numeric_limits<double>::quiet_NaN();
  double dispersion_param = 0.0;    // guess waveform
  double adiabaticity_param = 0.0;  // guess waveform
  double dispersion_param_opt = std::numeric_limits<double>::quiet_NaN();
  double adiabaticity_param_opt = std::numeric_limits<double>::quiet_NaN();
  double revival_time = std::numeric_limits<double>::quiet_NaN();  // s, at the final well
  int iterations = 0;
  std::string error;  // non-empty when this point failed
};

/// Potential energy U(x) = e sum_i u_i V_i(x). The minimum is searched in
/// [lo, hi] (clipped to the basis range); omega from U''(x0), kappa from a
/// local degree-6 fit of U over +-8 um. Throws SolverError without a minimum.
WellParams instantaneous_well(const Eigen::VectorXd& voltages, const AxialBasis& basis,
                              const IonSpecies& ion,
                              double lo = -std::numeric_limits<double>::infinity(),
                              double hi = std::numeric_limits<double>::infinity());

/// Wells at every waveform sample, tracking the minimum from one sample to
/// the next.
std::vector<WellParams> well_series(const ControlWaveform& waveform, const AxialBasis& basis,
                                    const IonSpecies& ion);

/// alpha = sqrt(m w / 2 hbar)(x - x0) + i sqrt(m / 2 hbar w)(v - dx0/dt).
std::vector<DisplacementRecord> comoving_displacement(const Trajectory& trajectory,
                                                      const std::vector<WellParams>& wells,
                                                      const IonSpecies& ion);

/// |alpha|^2 of a state relative to a static well.
double excess_quanta(const PhaseState& state, const WellParams& well, const IonSpecies& ion);

/// (5 hbar / 4 pi m^2) * integral |kappa| |alpha|^2 / omega^2 dt (trapezoid).
double dispersion_parameter(const std::vector<DisplacementRecord>& records,
                            const std::vector<WellParams>& wells, const IonSpecies& ion);

/// First-order level shift (5/4) hbar^2 kappa n^2 / (m^2 omega^2), J.
double level_shift(const WellParams& well, const IonSpecies& ion, double n);

/// 2 h / (d^2 E_n / dn^2) from level_shift; infinite when kappa is zero.
double revival_time(const WellParams& well, const IonSpecies& ion);

/// <phi_{n+1}|d/dt phi_n> and <phi_{n+2}|d/dt phi_n> in the printed form,
/// including the 1/sqrt(2 pi^3) factor of the first element.
struct ParametricMatrixElements {
  double first = 0.0;
  double second = 0.0;
};
ParametricMatrixElements parametric_matrix_elements(double omega, double omega_dot, double n);

/// max_t n^{3/2} |d omega/dt| / omega^2 with n = max(n_bar, 1).
double parametric_adiabaticity(const std::vector<WellParams>& wells,
                               const std::vector<DisplacementRecord>& records);

/// max_t |d omega/dt| / omega^2.
double max_omega_rate(const std::vector<WellParams>& wells);

/// Centred differences, one-sided at the ends.
std::vector<double> time_derivative(const std::vector<double>& values, double dt);

enum class GuessFamily { sin2, sin2_constant_omega };

struct ScanConfig {
  double v0 = -0.1;        // V
  double padding = 1e-6;   // s held before 0 and after the switching time
  double dt = 1e-9;        // s
  GuessFamily family = GuessFamily::sin2;
  CostConfig cost;
  OptimizerConfig optimizer;
};

/// Guess waveform of the family for a switching time `duration`.
ControlWaveform make_guess(const ScanConfig& config, double duration, const AxialBasis& basis,
                           const IonSpecies& ion);

/// Diagnostics for one waveform: excess quanta in the final well, the
/// dispersion and adiabaticity parameters, and the revival time.
struct WaveformDiagnostics {
  double excess_quanta = 0.0;
  double dispersion = 0.0;
  double adiabaticity = 0.0;
  double max_omega_rate = 0.0;
  double revival_time = 0.0;
  std::vector<WellParams> wells;
  std::vector<DisplacementRecord> records;
  Trajectory trajectory;
};
WaveformDiagnostics diagnose(const ControlWaveform& waveform, const AxialBasis& basis,
                             const IonSpecies& ion);

/// One row per duration; failed points carry the message in `error`.
/// Durations run in parallel over `threads` workers.
std::vector<TransportDiagnostics> transport_time_scan(const AxialBasis& basis,
                                                      const IonSpecies& ion,
                                                      const ScanConfig& config,
                                                      const std::vector<double>& durations,
                                                      bool optimize_each, int threads = 1);

struct NoiseRow {
  double noise = 0.0;  // V rms
  double mean_excess_quanta = 0.0;
  double stderr_excess = 0.0;
  double mean_deviation = 0.0;  // mean |alpha - alpha_clean|^2
};

struct NoiseTable {
  std::vector<NoiseRow> rows;
  double clean_excess_quanta = 0.0;
  double slope = 0.0;  // d log(mean excess) / d log(noise)
  double slope_deviation = 0.0;  // same for the deviation from the clean run
};

/// Adds independent zero-mean Gaussian noise to every sample of every
/// electrode and propagates. Trial j of level i draws from a generator
/// seeded with (seed, i, j), so results do not depend on `threads`.
NoiseTable noise_robustness(const ControlWaveform& waveform, const AxialBasis& basis,
                            const IonSpecies& ion, const std::vector<double>& noise_levels,
                            int trials, std::uint64_t seed, int threads = 1);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Columns t, x, v, x0, omega, alpha_re, alpha_im.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const std::vector<WellParams>& wells,
                          const std::vector<DisplacementRecord>& records);

/// Columns duration_s, excess_quanta_guess, excess_quanta_opt,
/// dispersion_param, adiabaticity_param, then the optimized-waveform values.
void write_scan_csv(std::ostream& out, const std::vector<TransportDiagnostics>& rows);

/// Columns noise_V, mean_excess_quanta, stderr.
void write_noise_csv(std::ostream& out, const NoiseTable& table);

}  // namespace ptrap
