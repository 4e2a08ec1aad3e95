#include "ptrap/transport.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"
#include "ptrap/heating.hpp"

namespace ptrap {

void ControlWaveform::validate() const {
  if (u.rows() < 2 || u.cols() < 1) throw ConfigError("waveform: need >= 2 samples and >= 1 electrode");
  if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
    throw ConfigError("waveform: time grid must be uniform with dt > 0");
  }
  if (!u.allFinite()) throw ConfigError("waveform: non-finite voltage sample");
  if (!names.empty() && static_cast<int>(names.size()) != electrodes()) {
    throw ConfigError("waveform: one name per electrode required");
  }
}

void CostConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0)) {
    throw ConfigError("cost: alpha, beta must be >= 0 and not both zero");
  }
  if (!(length_scale > 0.0) || !(time_scale > 0.0)) throw ConfigError("cost: scales must be > 0");
}

void OptimizerConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("optimizer: tau must be > 0");
  if (max_iterations < 0) throw ConfigError("optimizer: max_iterations must be >= 0");
  if (threshold < 0.0 || threshold_quanta < 0.0) throw ConfigError("optimizer: negative threshold");
  if (!(divergence_factor > 1.0)) throw ConfigError("optimizer: divergence_factor must be > 1");
  if (log_every < 1) throw ConfigError("optimizer: log_every must be >= 1");
}

namespace {

void check_compatible(const ControlWaveform& w, const AxialBasis& basis) {
  w.validate();
  if (w.electrodes() != basis.electrode_count()) {
    throw ConfigError("waveform has " + std::to_string(w.electrodes()) +
                      " electrodes, axial basis has " + std::to_string(basis.electrode_count()));
  }
}

// Acceleration and its x-derivative for voltages u at position x.
struct Force {
  double a = 0.0;
  double da_dx = 0.0;
};

Force force(const AxialBasis& basis, const Eigen::VectorXd& u, double x, double q_over_m,
            double t) {
  if (!basis.contains(x)) {
    std::ostringstream msg;
    msg << "ion left the axial basis range at t = " << t << " s (x = " << x << " m)";
    throw SolverError(msg.str());
  }
  const auto s = basis.combined(u, x);
  return {-q_over_m * s.d1, -q_over_m * s.d2};
}

}  // namespace

Trajectory propagate_state(const ControlWaveform& waveform, const AxialBasis& basis,
                           const IonSpecies& ion, const PhaseState& initial) {
  check_compatible(waveform, basis);
  ion.validate();
  const double qm = ion.charge / ion.mass;
  const double h = waveform.dt;
  Trajectory tr;
  tr.t0 = waveform.t0;
  tr.dt = h;
  tr.states.resize(waveform.samples());
  tr.states[0] = initial;
  double x = initial.x, v = initial.v;
  for (int k = 0; k + 1 < waveform.samples(); ++k) {
    const double t = waveform.time(k);
    const Eigen::VectorXd u0 = waveform.u.row(k).transpose();
    const Eigen::VectorXd u1 = waveform.u.row(k + 1).transpose();
    const Eigen::VectorXd um = 0.5 * (u0 + u1);
    const double k1x = v, k1v = force(basis, u0, x, qm, t).a;
    const double k2x = v + 0.5 * h * k1v, k2v = force(basis, um, x + 0.5 * h * k1x, qm, t).a;
    const double k3x = v + 0.5 * h * k2v, k3v = force(basis, um, x + 0.5 * h * k2x, qm, t).a;
    const double k4x = v + h * k3v, k4v = force(basis, u1, x + h * k3x, qm, t).a;
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    if (!std::isfinite(x) || !std::isfinite(v)) throw SolverError("state propagation diverged");
    tr.states[k + 1] = {x, v};
  }
  return tr;
}

CostateTrajectory propagate_costate(const Trajectory& trajectory, const ControlWaveform& waveform,
                                    const AxialBasis& basis, const IonSpecies& ion,
                                    const CostateState& terminal, const CostConfig& cost) {
  check_compatible(waveform, basis);
  cost.validate();
  if (static_cast<int>(trajectory.states.size()) != waveform.samples()) {
    throw ConfigError("costate: trajectory and waveform grids differ");
  }
  const double qm = ion.charge / ion.mass;
  const double T = cost.time_scale;
  const double h = waveform.dt;
  const int n = waveform.samples();

  // In real time t with scaled adjoints:
  //   dx_p/dt = v_p T (e/m) sum u_i V_i''(x),   dv_p/dt = -x_p / T.
  // The x-curvature term is -T da/dx.
  auto rhs = [&](const Eigen::VectorXd& u, double x, double xp, double vp, double t) {
    const double dadx = force(basis, u, x, qm, t).da_dx;
    return std::pair<double, double>{-vp * T * dadx, -xp / T};
  };

  CostateTrajectory ct;
  ct.t0 = waveform.t0;
  ct.dt = h;
  ct.states.resize(n);
  ct.states[n - 1] = terminal;
  double xp = terminal.x_p, vp = terminal.v_p;
  for (int k = n - 1; k > 0; --k) {
    const double t = waveform.time(k);
    const PhaseState& s1 = trajectory.states[k];
    const PhaseState& s0 = trajectory.states[k - 1];
    // Cubic Hermite midpoint of x from positions and velocities.
    const double xm = 0.5 * (s0.x + s1.x) + h * (s0.v - s1.v) / 8.0;
    const Eigen::VectorXd u1 = waveform.u.row(k).transpose();
    const Eigen::VectorXd u0 = waveform.u.row(k - 1).transpose();
    const Eigen::VectorXd um = 0.5 * (u0 + u1);
    const double hb = -h;  // integrating backwards
    const auto k1 = rhs(u1, s1.x, xp, vp, t);
    const auto k2 = rhs(um, xm, xp + 0.5 * hb * k1.first, vp + 0.5 * hb * k1.second, t);
    const auto k3 = rhs(um, xm, xp + 0.5 * hb * k2.first, vp + 0.5 * hb * k2.second, t);
    const auto k4 = rhs(u0, s0.x, xp + hb * k3.first, vp + hb * k3.second, t);
    xp += hb / 6.0 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first);
    vp += hb / 6.0 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second);
    ct.states[k - 1] = {xp, vp};
  }
  return ct;
}

CostateState terminal_costate(const PhaseState& final, const CostConfig& c) {
  c.validate();
  const double L = c.length_scale, V = c.length_scale / c.time_scale;
  return {2.0 * c.alpha * (final.x - c.x_f) / L, 2.0 * c.beta * final.v / V};
}

double cost(const PhaseState& final, const CostConfig& c) {
  c.validate();
  const double dx = (final.x - c.x_f) / c.length_scale;
  const double v = final.v * c.time_scale / c.length_scale;
  return c.alpha * dx * dx + c.beta * v * v;
}

Eigen::MatrixXd cost_gradient(const ControlWaveform& waveform, const CostateTrajectory& costate,
                              const Trajectory& trajectory, const AxialBasis& basis,
                              const IonSpecies& ion, const CostConfig& c) {
  check_compatible(waveform, basis);
  const int n = waveform.samples();
  if (static_cast<int>(costate.states.size()) != n ||
      static_cast<int>(trajectory.states.size()) != n) {
    throw ConfigError("gradient: state, costate and waveform grids differ");
  }
  // dJ/du_i = v_p d(a_scaled)/du_i with a_scaled = a T^2 / L and
  // da/du_i = -(e/m) V_i'(x).
  const double scale = (ion.charge / ion.mass) * c.time_scale * c.time_scale / c.length_scale;
  Eigen::MatrixXd g(n, waveform.electrodes());
  for (int k = 0; k < n; ++k) {
    const double x = trajectory.states[k].x;
    const double vp = costate.states[k].v_p;
    for (int i = 0; i < waveform.electrodes(); ++i) {
      g(k, i) = -vp * scale * basis(i, x).d1;
    }
  }
  return g;
}

ControlWaveform gradient_step(const ControlWaveform& waveform, const CostateTrajectory& costate,
                              const Trajectory& trajectory, const AxialBasis& basis,
                              const IonSpecies& ion, double tau, const CostConfig& c) {
  ControlWaveform out = waveform;
  out.u -= tau * cost_gradient(waveform, costate, trajectory, basis, ion, c);
  return out;
}

double quanta_threshold(const CostConfig& c, const IonSpecies& ion, double omega, double quanta) {
  c.validate();
  if (!(omega > 0.0)) throw SolverError("quanta_threshold: omega must be > 0");
  // |alpha|^2 = cx dx^2 + cv v^2 while h = ax dx^2 + av v^2.
  const double cx = ion.mass * omega / (2.0 * constants::hbar);
  const double cv = ion.mass / (2.0 * constants::hbar * omega);
  const double L = c.length_scale, V = c.length_scale / c.time_scale;
  const double ax = c.alpha / (L * L), av = c.beta / (V * V);
  double ratio = std::numeric_limits<double>::infinity();
  if (ax > 0.0) ratio = std::min(ratio, ax / cx);
  if (av > 0.0) ratio = std::min(ratio, av / cv);
  return quanta * ratio;
}

namespace {

WellParams first_well(const ControlWaveform& w, const AxialBasis& basis, const IonSpecies& ion,
                      int k) {
  return instantaneous_well(w.u.row(k).transpose(), basis, ion);
}

// Keeps omega at `omega0` at sample k by scaling the sum voltage. The well
// position depends only on the split and is unaffected.
void rescale_sample(ControlWaveform& w, int k, const AxialBasis& basis, const IonSpecies& ion,
                    double omega0, double& x_hint) {
  const Eigen::VectorXd u = w.u.row(k).transpose();
  const double span = 0.25 * (basis.x_max() - basis.x_min());
  const WellParams well = instantaneous_well(u, basis, ion, x_hint - span, x_hint + span);
  x_hint = well.x0;
  const double f = (omega0 * omega0) / (well.omega * well.omega);
  w.u.row(k) *= f;
}

ControlWaveform project_constant_omega(const ControlWaveform& base, const Eigen::MatrixXd& du,
                                       const AxialBasis& basis, const IonSpecies& ion,
                                       double omega0) {
  TildeControls t = to_tilde(base);
  for (int k = 0; k < base.samples(); ++k) {
    // Least-squares projection of the free update onto d(u1, u2)/d(split).
    t.fraction[k] += (du(k, 0) - du(k, 1)) / (2.0 * t.sum[k]);
  }
  ControlWaveform out = from_tilde(t);
  out.names = base.names;
  double x_hint = first_well(out, basis, ion, 0).x0;
  for (int k = 0; k < out.samples(); ++k) rescale_sample(out, k, basis, ion, omega0, x_hint);
  return out;
}

}  // namespace

OptimizationResult optimize(const ControlWaveform& guess, const AxialBasis& basis,
                            const IonSpecies& ion, const CostConfig& cost_config,
                            const OptimizerConfig& opt) {
  check_compatible(guess, basis);
  cost_config.validate();
  opt.validate();
  const bool constrained = opt.mode == ControlMode::constant_omega;
  if (constrained && guess.electrodes() != 2) {
    throw ConfigError("constant-omega mode needs exactly two electrodes");
  }

  const WellParams start = first_well(guess, basis, ion, 0);
  const WellParams end = first_well(guess, basis, ion, guess.samples() - 1);
  const PhaseState initial{start.x0, 0.0};
  const double omega0 = start.omega;

  OptimizationResult res;
  res.threshold = opt.threshold > 0.0
                      ? opt.threshold
                      : quanta_threshold(cost_config, ion, end.omega, opt.threshold_quanta);

  ControlWaveform w = guess;
  Trajectory tr = propagate_state(w, basis, ion, initial);
  double J = cost(tr.final_state(), cost_config);
  res.initial_cost = J;
  res.waveform = w;
  res.trajectory = tr;
  res.final_cost = J;
  double best = J;
  int increases = 0;

  for (int it = 0;; ++it) {
    if (it % opt.log_every == 0) res.logged.push_back({it, w, tr});
    IterationRecord rec{it, J, 0.0};
    if (J <= res.threshold) {
      res.converged = true;
      res.log.push_back(rec);
      break;
    }
    if (it >= opt.max_iterations) {
      res.log.push_back(rec);
      break;
    }
    const CostateState term = terminal_costate(tr.final_state(), cost_config);
    const CostateTrajectory ct = propagate_costate(tr, w, basis, ion, term, cost_config);
    Eigen::MatrixXd du = -opt.tau * cost_gradient(w, ct, tr, basis, ion, cost_config);
    // The endpoint samples define the start and target wells; keep them fixed.
    du.row(0).setZero();
    du.row(du.rows() - 1).setZero();
    ControlWaveform next;
    if (constrained) {
      next = project_constant_omega(w, du, basis, ion, omega0);
    } else {
      next = w;
      next.u += du;
    }
    rec.max_du = (next.u - w.u).cwiseAbs().maxCoeff();
    res.log.push_back(rec);

    w = std::move(next);
    try {
      tr = propagate_state(w, basis, ion, initial);
    } catch (const SolverError&) {
      res.diverged = true;
      res.iterations = it + 1;
      break;
    }
    const double J_new = cost(tr.final_state(), cost_config);
    res.iterations = it + 1;
    if (J_new > J) ++increases;
    J = J_new;
    if (J < best) {
      best = J;
      res.waveform = w;
      res.trajectory = tr;
      res.final_cost = J;
    } else if (J > opt.divergence_factor * best) {
      res.diverged = true;
      res.log.push_back({it + 1, J, 0.0});
      break;
    }
  }
  res.increase_fraction = res.iterations > 0 ? double(increases) / res.iterations : 0.0;
  res.oscillating = res.diverged || res.increase_fraction > 0.05;
  return res;
}

ControlWaveform initial_guess_sin2(double v0, double delta_t, double t0, double t_f, double dt) {
  if (!(dt > 0.0)) throw ConfigError("guess: dt must be > 0");
  if (!(t0 <= 0.0 && delta_t > 0.0 && delta_t <= t_f)) {
    throw ConfigError("guess: need t0 <= 0 < delta_t <= t_f");
  }
  const double steps = (t_f - t0) / dt;
  const long n = std::lround(steps);
  if (std::abs(steps - double(n)) > 1e-6 * std::max(1.0, steps)) {
    throw ConfigError("guess: (t_f - t0) must be a multiple of dt");
  }
  ControlWaveform w;
  w.t0 = t0;
  w.dt = dt;
  w.u.resize(n + 1, 2);
  w.names = {"start", "destination"};
  for (long k = 0; k <= n; ++k) {
    const double t = t0 + double(k) * dt;
    double u1;
    if (t <= 0.0) {
      u1 = v0;
    } else if (t <= delta_t) {
      // Smooth hand-over: the destination ramps up as sin^2, the start
      // electrode releases as the complement.
      const double s = std::sin(constants::pi * t / (2.0 * delta_t));
      u1 = v0 - v0 * s * s;
    } else {
      u1 = 0.0;
    }
    w.u(k, 0) = u1;
    w.u(k, 1) = v0 - u1;
  }
  return w;
}

ControlWaveform normalize_constant_omega(const ControlWaveform& waveform, const AxialBasis& basis,
                                         const IonSpecies& ion) {
  check_compatible(waveform, basis);
  ControlWaveform out = waveform;
  const WellParams w0 = first_well(waveform, basis, ion, 0);
  double x_hint = w0.x0;
  for (int k = 0; k < out.samples(); ++k) rescale_sample(out, k, basis, ion, w0.omega, x_hint);
  return out;
}

TildeControls to_tilde(const ControlWaveform& w) {
  if (w.electrodes() != 2) throw ConfigError("to_tilde: waveform must have two electrodes");
  TildeControls t;
  t.t0 = w.t0;
  t.dt = w.dt;
  t.sum = w.u.col(0) + w.u.col(1);
  t.fraction.resize(w.samples());
  for (int k = 0; k < w.samples(); ++k) {
    if (t.sum[k] == 0.0) {
      throw ConfigError("to_tilde: u1 + u2 = 0 at t = " + std::to_string(w.time(k)));
    }
    t.fraction[k] = w.u(k, 0) / t.sum[k];
  }
  return t;
}

ControlWaveform from_tilde(const TildeControls& t) {
  if (t.sum.size() != t.fraction.size()) throw ConfigError("from_tilde: size mismatch");
  ControlWaveform w;
  w.t0 = t.t0;
  w.dt = t.dt;
  w.u.resize(t.sum.size(), 2);
  w.u.col(0) = t.sum.cwiseProduct(t.fraction);
  w.u.col(1) = t.sum - w.u.col(0);
  return w;
}

void write_waveform_csv(std::ostream& out, const ControlWaveform& w) {
  out << "t_s";
  for (int i = 0; i < w.electrodes(); ++i) out << ",u_" << (i + 1) << "_V";
  out << '\n' << std::setprecision(17);
  for (int k = 0; k < w.samples(); ++k) {
    out << w.time(k);
    for (int i = 0; i < w.electrodes(); ++i) out << ',' << w.u(k, i);
    out << '\n';
  }
}

ControlWaveform read_waveform_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("waveform CSV: empty input");
  int cols = 0;
  {
    std::istringstream hs(line);
    std::string cell;
    std::getline(hs, cell, ',');
    if (cell != "t_s") throw ConfigError("waveform CSV: first column must be t_s");
    while (std::getline(hs, cell, ',')) ++cols;
  }
  if (cols < 1) throw ConfigError("waveform CSV: no voltage columns");
  std::vector<double> t;
  std::vector<double> vals;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int c = 0;
    while (std::getline(ls, cell, ',')) {
      double v;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("waveform CSV: bad number on line " + std::to_string(lineno));
      }
      if (c == 0) t.push_back(v); else vals.push_back(v);
      ++c;
    }
    if (c != cols + 1) throw ConfigError("waveform CSV: wrong column count on line " + std::to_string(lineno));
  }
  if (t.size() < 2) throw ConfigError("waveform CSV: need at least two samples");
  ControlWaveform w;
  w.t0 = t.front();
  w.dt = (t.back() - t.front()) / double(t.size() - 1);
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs((t[k] - t[k - 1]) - w.dt) > 1e-6 * w.dt) {
      throw ConfigError("waveform CSV: time grid is not uniform");
    }
  }
  w.u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), static_cast<Eigen::Index>(t.size()), cols);
  w.validate();
  return w;
}

void write_run_log(std::ostream& out, const OptimizationResult& r) {
  out << "iteration,cost,max_du_V\n" << std::setprecision(12);
  for (const auto& rec : r.log) out << rec.iteration << ',' << rec.cost << ',' << rec.max_du << '\n';
}

}  // namespace ptrap
