#include "ptrap/heating.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"
#include "ptrap/polyfit.hpp"

namespace ptrap {

WellParams instantaneous_well(const Eigen::VectorXd& voltages, const AxialBasis& basis,
                              const IonSpecies& ion, double lo, double hi) {
  ion.validate();
  // Minimise the energy e*phi: for negative charges that is the maximum of phi.
  const Eigen::VectorXd signed_u = ion.charge > 0.0 ? voltages : Eigen::VectorXd(-voltages);
  const double x0 = locate_minimum(basis, signed_u, lo, hi);
  if (!std::isfinite(x0)) throw SolverError("instantaneous_well: no potential minimum in range");

  const double e = ion.charge;
  const auto s = basis.combined(voltages, x0);
  const double curvature = e * s.d2;
  if (!(curvature > 0.0)) throw SolverError("instantaneous_well: non-positive curvature");

  WellParams w;
  w.x0 = x0;
  w.omega = std::sqrt(curvature / ion.mass);
  const double half = 0.999 * std::min({8e-6, x0 - basis.x_min(), basis.x_max() - x0});
  if (half > 1e-7) {
    const std::function<double(double)> energy = [&](double x) {
      return e * basis.combined(voltages, x).value;
    };
    w.kappa = fit_polynomial<double>(energy, x0, half, 6).coefficients[4];
  }
  return w;
}

std::vector<WellParams> well_series(const ControlWaveform& waveform, const AxialBasis& basis,
                                    const IonSpecies& ion) {
  waveform.validate();
  std::vector<WellParams> wells(waveform.samples());
  const double span = 0.25 * (basis.x_max() - basis.x_min());
  double hint = 0.0;
  for (int k = 0; k < waveform.samples(); ++k) {
    const Eigen::VectorXd u = waveform.u.row(k).transpose();
    wells[k] = k == 0 ? instantaneous_well(u, basis, ion)
                      : instantaneous_well(u, basis, ion, hint - span, hint + span);
    wells[k].t = waveform.time(k);
    hint = wells[k].x0;
  }
  return wells;
}

std::vector<double> time_derivative(const std::vector<double>& f, double dt) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (f[1] - f[0]) / dt;
  d[n - 1] = (f[n - 1] - f[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
  return d;
}

std::vector<DisplacementRecord> comoving_displacement(const Trajectory& trajectory,
                                                      const std::vector<WellParams>& wells,
                                                      const IonSpecies& ion) {
  if (trajectory.states.size() != wells.size()) {
    throw ConfigError("comoving_displacement: trajectory and wells not aligned");
  }
  std::vector<double> x0(wells.size());
  for (std::size_t k = 0; k < wells.size(); ++k) x0[k] = wells[k].x0;
  const std::vector<double> x0_dot = time_derivative(x0, trajectory.dt);

  std::vector<DisplacementRecord> out(wells.size());
  for (std::size_t k = 0; k < wells.size(); ++k) {
    const double w = wells[k].omega;
    if (!(w > 0.0)) throw SolverError("comoving_displacement: omega <= 0");
    const PhaseState& s = trajectory.states[k];
    const double re = std::sqrt(ion.mass * w / (2.0 * constants::hbar)) * (s.x - x0[k]);
    const double im = std::sqrt(ion.mass / (2.0 * constants::hbar * w)) * (s.v - x0_dot[k]);
    out[k].t = trajectory.time(static_cast<int>(k));
    out[k].alpha = {re, im};
    out[k].n_bar = re * re + im * im;
  }
  return out;
}

double excess_quanta(const PhaseState& state, const WellParams& well, const IonSpecies& ion) {
  const double dx = state.x - well.x0;
  return ion.mass * well.omega / (2.0 * constants::hbar) * dx * dx +
         ion.mass / (2.0 * constants::hbar * well.omega) * state.v * state.v;
}

double dispersion_parameter(const std::vector<DisplacementRecord>& records,
                            const std::vector<WellParams>& wells, const IonSpecies& ion) {
  if (records.size() != wells.size()) throw ConfigError("dispersion_parameter: series not aligned");
  if (records.size() < 2) return 0.0;
  auto integrand = [&](std::size_t k) {
    return std::abs(wells[k].kappa) * records[k].n_bar / (wells[k].omega * wells[k].omega);
  };
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    sum += 0.5 * (integrand(k) + integrand(k + 1)) * (records[k + 1].t - records[k].t);
  }
  return 5.0 * constants::hbar / (4.0 * constants::pi * ion.mass * ion.mass) * sum;
}

double level_shift(const WellParams& well, const IonSpecies& ion, double n) {
  const double hb = constants::hbar;
  return 1.25 * hb * hb * well.kappa * n * n / (ion.mass * ion.mass * well.omega * well.omega);
}

double revival_time(const WellParams& well, const IonSpecies& ion) {
  // d^2 E_n / dn^2 of the quadratic level shift.
  const double hb = constants::hbar;
  const double second = 2.5 * hb * hb * std::abs(well.kappa) /
                        (ion.mass * ion.mass * well.omega * well.omega);
  if (second == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * constants::planck / second;
}

ParametricMatrixElements parametric_matrix_elements(double omega, double omega_dot, double n) {
  ParametricMatrixElements m;
  const double r = omega_dot / omega;
  m.first = r / std::sqrt(2.0 * std::pow(constants::pi, 3)) * n * std::sqrt(n + 1.0);
  m.second = r / 4.0 * std::sqrt((n + 1.0) * (n + 2.0));
  return m;
}

namespace {

std::vector<double> omega_dot(const std::vector<WellParams>& wells) {
  std::vector<double> w(wells.size());
  for (std::size_t k = 0; k < wells.size(); ++k) w[k] = wells[k].omega;
  const double dt = wells.size() > 1 ? wells[1].t - wells[0].t : 1.0;
  return time_derivative(w, dt);
}

}  // namespace

double parametric_adiabaticity(const std::vector<WellParams>& wells,
                               const std::vector<DisplacementRecord>& records) {
  if (records.size() != wells.size()) {
    throw ConfigError("parametric_adiabaticity: series not aligned");
  }
  const std::vector<double> wd = omega_dot(wells);
  double worst = 0.0;
  for (std::size_t k = 0; k < wells.size(); ++k) {
    const double n = std::max(records[k].n_bar, 1.0);
    const double w = wells[k].omega;
    worst = std::max(worst, std::pow(n, 1.5) * std::abs(wd[k]) / (w * w));
  }
  return worst;
}

double max_omega_rate(const std::vector<WellParams>& wells) {
  const std::vector<double> wd = omega_dot(wells);
  double worst = 0.0;
  for (std::size_t k = 0; k < wells.size(); ++k) {
    worst = std::max(worst, std::abs(wd[k]) / (wells[k].omega * wells[k].omega));
  }
  return worst;
}

ControlWaveform make_guess(const ScanConfig& config, double duration, const AxialBasis& basis,
                           const IonSpecies& ion) {
  // Durations need not sit on the time grid; the trailing hold is stretched
  // to the next whole step instead.
  const double t0 = -config.padding;
  const double steps = std::ceil((duration + 2.0 * config.padding) / config.dt - 1e-6);
  ControlWaveform w = initial_guess_sin2(config.v0, duration, t0, t0 + steps * config.dt, config.dt);
  if (config.family == GuessFamily::sin2_constant_omega) {
    w = normalize_constant_omega(w, basis, ion);
  }
  return w;
}

WaveformDiagnostics diagnose(const ControlWaveform& waveform, const AxialBasis& basis,
                             const IonSpecies& ion) {
  WaveformDiagnostics d;
  d.wells = well_series(waveform, basis, ion);
  d.trajectory = propagate_state(waveform, basis, ion, {d.wells.front().x0, 0.0});
  d.records = comoving_displacement(d.trajectory, d.wells, ion);
  d.excess_quanta = excess_quanta(d.trajectory.final_state(), d.wells.back(), ion);
  d.dispersion = dispersion_parameter(d.records, d.wells, ion);
  d.adiabaticity = parametric_adiabaticity(d.wells, d.records);
  d.max_omega_rate = max_omega_rate(d.wells);
  d.revival_time = revival_time(d.wells.back(), ion);
  return d;
}

std::vector<TransportDiagnostics> transport_time_scan(const AxialBasis& basis,
                                                      const IonSpecies& ion,
                                                      const ScanConfig& config,
                                                      const std::vector<double>& durations,
                                                      bool optimize_each, int threads) {
  if (durations.empty()) throw ConfigError("transport_time_scan: empty duration list");
  for (double d : durations) {
    if (!(d > 0.0)) throw ConfigError("transport_time_scan: durations must be > 0");
  }
  std::vector<TransportDiagnostics> rows(durations.size());
  const int n = static_cast<int>(durations.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, threads)) if (threads > 1)
  for (int i = 0; i < n; ++i) {
    TransportDiagnostics& row = rows[i];
    row.duration = durations[i];
    try {
      const ControlWaveform guess = make_guess(config, durations[i], basis, ion);
      const WaveformDiagnostics g = diagnose(guess, basis, ion);
      row.excess_quanta_guess = g.excess_quanta;
      row.dispersion_param = g.dispersion;
      row.adiabaticity_param = g.adiabaticity;
      row.revival_time = g.revival_time;
      if (optimize_each) {
        CostConfig cost = config.cost;
        cost.x_f = g.wells.back().x0;
        const OptimizationResult r = optimize(guess, basis, ion, cost, config.optimizer);
        const WaveformDiagnostics o = diagnose(r.waveform, basis, ion);
        row.excess_quanta_opt = o.excess_quanta;
        row.dispersion_param_opt = o.dispersion;
        row.adiabaticity_param_opt = o.adiabaticity;
        row.iterations = r.iterations;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return rows;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("log_log_slope: need >= 2 points");
  Eigen::MatrixXd a(x.size(), 2);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("log_log_slope: values must be > 0");
    a(i, 0) = 1.0;
    a(i, 1) = std::log(x[i]);
    b[i] = std::log(y[i]);
  }
  return a.colPivHouseholderQr().solve(b)[1];
}

NoiseTable noise_robustness(const ControlWaveform& waveform, const AxialBasis& basis,
                            const IonSpecies& ion, const std::vector<double>& noise_levels,
                            int trials, std::uint64_t seed, int threads) {
  if (trials < 10) throw ConfigError("noise_robustness: need at least 10 trials");
  if (noise_levels.empty()) throw ConfigError("noise_robustness: empty noise level list");
  const std::vector<WellParams> wells = well_series(waveform, basis, ion);
  const PhaseState start{wells.front().x0, 0.0};
  const WellParams& final_well = wells.back();
  const PhaseState clean = propagate_state(waveform, basis, ion, start).final_state();

  NoiseTable table;
  table.clean_excess_quanta = excess_quanta(clean, final_well, ion);
  const double sx = std::sqrt(ion.mass * final_well.omega / (2.0 * constants::hbar));
  const double sv = std::sqrt(ion.mass / (2.0 * constants::hbar * final_well.omega));

  const int levels = static_cast<int>(noise_levels.size());
  std::vector<double> excess(static_cast<std::size_t>(levels) * trials);
  std::vector<double> deviation(excess.size());
  std::vector<std::string> errors(excess.size());
  const int total = levels * trials;
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, threads)) if (threads > 1)
  for (int idx = 0; idx < total; ++idx) {
    const int level = idx / trials, trial = idx % trials;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(level), static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    ControlWaveform noisy = waveform;
    const double sigma = noise_levels[level];
    if (sigma != 0.0) {
      for (int k = 0; k < noisy.samples(); ++k) {
        for (int e = 0; e < noisy.electrodes(); ++e) noisy.u(k, e) += sigma * normal(rng);
      }
    }
    try {
      const PhaseState s = propagate_state(noisy, basis, ion, start).final_state();
      excess[idx] = excess_quanta(s, final_well, ion);
      const double dre = sx * (s.x - clean.x), dim = sv * (s.v - clean.v);
      deviation[idx] = dre * dre + dim * dim;
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw SolverError("noise_robustness: " + e);
  }

  std::vector<double> xs, ys, ds;
  for (int level = 0; level < levels; ++level) {
    NoiseRow row;
    row.noise = noise_levels[level];
    double sum = 0.0, sum2 = 0.0, dsum = 0.0;
    for (int t = 0; t < trials; ++t) {
      const double q = excess[level * trials + t];
      sum += q;
      sum2 += q * q;
      dsum += deviation[level * trials + t];
    }
    row.mean_excess_quanta = sum / trials;
    const double var = std::max(0.0, sum2 / trials - row.mean_excess_quanta * row.mean_excess_quanta);
    row.stderr_excess = std::sqrt(var * trials / (trials - 1.0) / trials);
    row.mean_deviation = dsum / trials;
    table.rows.push_back(row);
    if (row.noise > 0.0) {
      xs.push_back(row.noise);
      ys.push_back(row.mean_excess_quanta);
      ds.push_back(row.mean_deviation);
    }
  }
  if (xs.size() >= 2) {
    table.slope = log_log_slope(xs, ys);
    table.slope_deviation = log_log_slope(xs, ds);
  }
  return table;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const std::vector<WellParams>& wells,
                          const std::vector<DisplacementRecord>& records) {
  if (wells.size() != trajectory.states.size() || records.size() != wells.size()) {
    throw ConfigError("trajectory CSV: series not aligned");
  }
  out << "t,x,v,x0,omega,alpha_re,alpha_im\n" << std::setprecision(12);
  for (std::size_t k = 0; k < wells.size(); ++k) {
    const auto& s = trajectory.states[k];
    out << trajectory.time(static_cast<int>(k)) << ',' << s.x << ',' << s.v << ',' << wells[k].x0
        << ',' << wells[k].omega << ',' << records[k].alpha.real() << ','
        << records[k].alpha.imag() << '\n';
  }
}

void write_scan_csv(std::ostream& out, const std::vector<TransportDiagnostics>& rows) {
  out << "duration_s,excess_quanta_guess,excess_quanta_opt,dispersion_param,adiabaticity_param,"
         "dispersion_param_opt,adiabaticity_param_opt,revival_time_s,iterations,error\n"
      << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.duration << ',' << r.excess_quanta_guess << ',' << r.excess_quanta_opt << ','
        << r.dispersion_param << ',' << r.adiabaticity_param << ',' << r.dispersion_param_opt
        << ',' << r.adiabaticity_param_opt << ',' << r.revival_time << ',' << r.iterations << ','
        << '"' << r.error << '"' << '\n';
  }
}

void write_noise_csv(std::ostream& out, const NoiseTable& table) {
  out << "noise_V,mean_excess_quanta,stderr\n" << std::setprecision(10);
  for (const auto& r : table.rows) {
    out << r.noise << ',' << r.mean_excess_quanta << ',' << r.stderr_excess << '\n';
  }
}

}  // namespace ptrap
