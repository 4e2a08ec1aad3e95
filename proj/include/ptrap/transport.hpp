#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/axial_basis.hpp"
#include "ptrap/potentials.hpp"

namespace ptrap {

struct PhaseState {
  double x = 0.0;  // m
  double v = 0.0;  // m/s
};

/// Adjoint variables in the scaled units of CostConfig: x_p is conjugate to
/// x / length_scale and v_p to v * time_scale / length_scale.
struct CostateState {
  double x_p = 0.0;
  double v_p = 0.0;
};

/// Electrode voltages on a uniform time grid. Row k holds u(t0 + k dt), one
/// column per electrode. Voltages are linear between samples.
struct ControlWaveform {
  double t0 = 0.0;  // s
  double dt = 0.0;  // s
  Eigen::MatrixXd u;
  std::vector<std::string> names;

  int samples() const { return static_cast<int>(u.rows()); }
  int electrodes() const { return static_cast<int>(u.cols()); }
  double time(int k) const { return t0 + k * dt; }
  double t_f() const { return time(samples() - 1); }

  /// Throws ConfigError on an empty, non-uniform or non-finite waveform.
  void validate() const;
};

/// State samples on the waveform grid.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<PhaseState> states;

  double time(int k) const { return t0 + k * dt; }
  const PhaseState& final_state() const { return states.back(); }
};

struct CostateTrajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<CostateState> states;
};

/// h = alpha ((x - x_f)/L)^2 + beta (v T/L)^2 with L = length_scale and
/// T = time_scale. Scales of 1 give the cost directly in SI units.
struct CostConfig {
  double alpha = 10.0;
  double beta = 1.0;
  double x_f = 0.0;             // m
  double length_scale = 1e-6;   // m
  double time_scale = 1e-6;     // s

  void validate() const;
};

enum class ControlMode { unconstrained, constant_omega };

struct OptimizerConfig {
  double tau = 1e-9;  // per unit of the scaled functional gradient, see cost_gradient
  int max_iterations = 400;
  /// Stop once the cost falls below this value. Zero selects the cost that
  /// corresponds to `threshold_quanta` excess quanta in the final well.
  double threshold = 0.0;
  double threshold_quanta = 1e-4;
  double divergence_factor = 10.0;  // abort when cost exceeds this times the best
  int log_every = 10;               // store trajectories every N iterations
  ControlMode mode = ControlMode::unconstrained;

  void validate() const;
};

struct TildeControls {
  double t0 = 0.0;
  double dt = 0.0;
  Eigen::VectorXd sum;       // u1 + u2
  Eigen::VectorXd fraction;  // u1 / (u1 + u2)
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double max_du = 0.0;  // V, largest update applied after this iteration
};

/// Snapshot kept every `log_every` iterations.
struct LoggedIterate {
  int iteration = 0;
  ControlWaveform waveform;
  Trajectory trajectory;
};

struct OptimizationResult {
  ControlWaveform waveform;  // best waveform found
  Trajectory trajectory;     // its state trajectory
  std::vector<IterationRecord> log;
  std::vector<LoggedIterate> logged;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double threshold = 0.0;
  int iterations = 0;  // gradient steps taken
  bool converged = false;
  bool diverged = false;
  bool oscillating = false;
  double increase_fraction = 0.0;  // share of steps that raised the cost
};

/// Fixed-step RK4 of x' = v, v' = -(e/m) sum_i u_i(t) V_i'(x) on the
/// waveform grid. Throws SolverError when the ion leaves the basis range.
Trajectory propagate_state(const ControlWaveform& waveform, const AxialBasis& basis,
                           const IonSpecies& ion, const PhaseState& initial);

/// Backward RK4 of the adjoint equations from t_f to t0.
CostateTrajectory propagate_costate(const Trajectory& trajectory, const ControlWaveform& waveform,
                                    const AxialBasis& basis, const IonSpecies& ion,
                                    const CostateState& terminal, const CostConfig& cost);

CostateState terminal_costate(const PhaseState& final, const CostConfig& cost);

double cost(const PhaseState& final, const CostConfig& cost_config);

/// Functional gradient dJ/du_i(t_k) per electrode, in 1/(V * time_scale).
Eigen::MatrixXd cost_gradient(const ControlWaveform& waveform, const CostateTrajectory& costate,
                              const Trajectory& trajectory, const AxialBasis& basis,
                              const IonSpecies& ion, const CostConfig& cost);

/// u_i(t_k) -= tau dJ/du_i(t_k) for every electrode.
ControlWaveform gradient_step(const ControlWaveform& waveform, const CostateTrajectory& costate,
                              const Trajectory& trajectory, const AxialBasis& basis,
                              const IonSpecies& ion, double tau, const CostConfig& cost);

/// Steepest descent until the cost falls below the threshold, the iteration
/// budget is spent or the cost diverges. The ion starts at rest at x(t0),
/// the minimum of the first waveform sample.
OptimizationResult optimize(const ControlWaveform& guess, const AxialBasis& basis,
                            const IonSpecies& ion, const CostConfig& cost_config,
                            const OptimizerConfig& opt_config);

/// Destination electrode: 0 for t <= 0, V0 sin^2(pi t / 2 delta_t) on
/// (0, delta_t], V0 afterwards. Start electrode: V0 minus the destination
/// voltage, so it holds V0 before 0 and 0 after delta_t.
ControlWaveform initial_guess_sin2(double v0, double delta_t, double t0, double t_f, double dt);

/// Cost equivalent of `quanta` excess quanta in a well of frequency omega:
/// the largest h that keeps |alpha|^2 below `quanta`.
double quanta_threshold(const CostConfig& cost, const IonSpecies& ion, double omega,
                        double quanta);

/// Rescales u1 + u2 at every sample so the well frequency equals its value
/// at the first sample; the split u1/(u1 + u2) and so x0(t) are unchanged.
ControlWaveform normalize_constant_omega(const ControlWaveform& waveform, const AxialBasis& basis,
                                         const IonSpecies& ion);

/// Two-electrode waveforms only. Throws ConfigError where u1 + u2 == 0.
TildeControls to_tilde(const ControlWaveform& waveform);
ControlWaveform from_tilde(const TildeControls& tilde);

/// Columns t_s, u_1_V, u_2_V, ...
void write_waveform_csv(std::ostream& out, const ControlWaveform& waveform);
ControlWaveform read_waveform_csv(std::istream& in);

/// Columns iteration, cost, max_du_V.
void write_run_log(std::ostream& out, const OptimizationResult& result);

}  // namespace ptrap
