#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"
#include "ptrap/heating.hpp"
#include "ptrap/transport.hpp"
#include "support.hpp"

using namespace ptrap;

namespace {

// Two Gaussian segments 60 um apart give a ~2 MHz well at -0.1 V, so a
// 3 us hand-over is strongly non-adiabatic and a good optimizer workout.
struct Problem {
  AxialBasis basis = test::gaussian_pair(60e-6, 40e-6);
  IonSpecies ion = IonSpecies::calcium40();
  double delta_t = 3e-6;
  ControlWaveform guess = initial_guess_sin2(-0.1, 3e-6, -0.5e-6, 3.5e-6, 2e-9);
  CostConfig cost;
  OptimizerConfig opt;

  Problem() {
    cost.x_f = instantaneous_well(guess.u.bottomRows(1).transpose(), basis, ion).x0;
    opt.tau = 3e-10;
  }

  PhaseState start() const {
    return {instantaneous_well(guess.u.row(0).transpose(), basis, ion).x0, 0.0};
  }

  double J(const ControlWaveform& w) const {
    return ptrap::cost(propagate_state(w, basis, ion, start()).final_state(), cost);
  }

  Eigen::MatrixXd gradient(const ControlWaveform& w) const {
    const auto tr = propagate_state(w, basis, ion, start());
    const auto ct = propagate_costate(tr, w, basis, ion, terminal_costate(tr.final_state(), cost),
                                      cost);
    return cost_gradient(w, ct, tr, basis, ion, cost);
  }
};

const OptimizationResult& baseline_run() {
  static const OptimizationResult r = [] {
    Problem p;
    return optimize(p.guess, p.basis, p.ion, p.cost, p.opt);
  }();
  return r;
}

// RMS asymmetry of |alpha| about the middle of the switching interval.
double alpha_asymmetry(const ControlWaveform& w, const std::vector<DisplacementRecord>& rec,
                       double delta_t) {
  std::vector<double> a;
  for (int k = 0; k < w.samples(); ++k) {
    const double t = w.time(k);
    if (t >= -1e-15 && t <= delta_t + 1e-15) a.push_back(std::abs(rec[k].alpha));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - a[a.size() - 1 - i];
    num += d * d;
    den += a[i] * a[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("sin2 guess keeps the sum voltage fixed") {
  const auto g = initial_guess_sin2(-0.1, 8e-6, -1e-6, 9e-6, 1e-9);
  REQUIRE(g.samples() == 10001);
  for (int k = 0; k < g.samples(); ++k) CHECK(g.u(k, 0) + g.u(k, 1) == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(g.u(0, 0) == -0.1);
  CHECK(g.u(0, 1) == 0.0);
  CHECK(g.u(g.samples() - 1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(g.u(g.samples() - 1, 1) == doctest::Approx(-0.1));
  const int mid = 1000 + 4000;  // t = delta_t / 2
  CHECK(g.time(mid) == doctest::Approx(4e-6));
  CHECK(g.u(mid, 0) == doctest::Approx(-0.05).epsilon(1e-12));
  // continuous at both ends of the ramp
  CHECK(std::abs(g.u(1001, 0) - g.u(1000, 0)) < 1e-6);
  CHECK(std::abs(g.u(9001, 0) - g.u(9000, 0)) < 1e-6);
  CHECK_THROWS_AS(initial_guess_sin2(-0.1, 8e-6, 1e-6, 9e-6, 1e-9), ConfigError);
  CHECK_THROWS_AS(initial_guess_sin2(-0.1, 8e-6, -1e-6, 9e-6, 0.0), ConfigError);
}

TEST_CASE("harmonic well propagation matches the analytic solution") {
  const auto basis = test::quadratic_basis();
  const auto ion = IonSpecies::calcium40();
  ControlWaveform w;
  w.t0 = 0.0;
  w.dt = 1e-9;
  w.u = Eigen::MatrixXd::Constant(4001, 1, 0.1);
  const double omega = std::sqrt(ion.charge * 0.1 / ion.mass);
  const auto tr = propagate_state(w, basis, ion, {2e-6, 0.0});
  for (int k = 0; k < w.samples(); k += 500) {
    CHECK(tr.states[k].x == doctest::Approx(2e-6 * std::cos(omega * w.time(k))).scale(2e-6).epsilon(1e-9));
  }
  // leaving the sampled axis is a solver error
  CHECK_THROWS_AS(propagate_state(w, basis, ion, {19.9e-6, 1.0e3}), SolverError);
}

TEST_CASE("static well leaves the ion at rest") {
  Problem p;
  ControlWaveform w = p.guess;
  for (int k = 0; k < w.samples(); ++k) w.u.row(k) = p.guess.u.row(0);
  const auto d = diagnose(w, p.basis, p.ion);
  double worst = 0.0;
  for (const auto& r : d.records) worst = std::max(worst, r.n_bar);
  CHECK(worst < 1e-12);
  CHECK(parametric_adiabaticity(d.wells, d.records) == 0.0);
}

TEST_CASE("adjoint gradient agrees with finite differences") {
  Problem p;
  const ControlWaveform w = p.guess;
  const Eigen::MatrixXd g = p.gradient(w);
  const double J0 = p.J(w);
  const double weight = w.dt / p.cost.time_scale;

  SUBCASE("random perturbation") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd du(w.samples(), 2);
    for (int k = 0; k < du.rows(); ++k) {
      for (int i = 0; i < 2; ++i) du(k, i) = nd(rng);
    }
    du.row(0).setZero();
    du.bottomRows(1).setZero();
    // scale so the first-order change is a small fraction of J
    du *= 1e-3 * J0 / std::abs((g.cwiseProduct(du)).sum() * weight);
    ControlWaveform plus = w, minus = w;
    plus.u += du;
    minus.u -= du;
    const double fd = 0.5 * (p.J(plus) - p.J(minus));
    const double predicted = (g.cwiseProduct(du)).sum() * weight;
    CHECK(std::abs(fd - predicted) < 0.02 * std::abs(predicted));
  }
  SUBCASE("single time slice") {
    for (int k : {500, 1000, 1500}) {
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6;
        ControlWaveform plus = w, minus = w;
        plus.u(k, i) += h;
        minus.u(k, i) -= h;
        const double fd = (p.J(plus) - p.J(minus)) / (2.0 * h);
        CAPTURE(k);
        CAPTURE(i);
        CHECK(std::abs(fd - g(k, i) * weight) < 0.01 * std::abs(fd));
      }
    }
  }
}

TEST_CASE("steepest descent converges monotonically") {
  const auto& r = baseline_run();
  CHECK(r.converged);
  CHECK_FALSE(r.diverged);
  CHECK_FALSE(r.oscillating);
  CHECK(r.iterations <= 400);
  CHECK(r.final_cost < 1e-6 * r.initial_cost);
  int increases = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i) increases += r.log[i].cost > r.log[i - 1].cost;
  CHECK(increases <= 0.05 * r.iterations);
  // trajectories logged every ten iterations, starting with the guess
  REQUIRE(r.logged.size() >= 2);
  CHECK(r.logged[0].iteration == 0);
  CHECK(r.logged[1].iteration == 10);
  // endpoint wells stay where the guess put them
  Problem p;
  CHECK((r.waveform.u.row(0) - p.guess.u.row(0)).norm() == 0.0);
  CHECK((r.waveform.u.bottomRows(1) - p.guess.u.bottomRows(1)).norm() == 0.0);
}

TEST_CASE("optimized excess energy sits below the threshold") {
  const auto& r = baseline_run();
  Problem p;
  const auto d = diagnose(r.waveform, p.basis, p.ion);
  CHECK(d.excess_quanta < 1e-4 * 1.01);
  CHECK(diagnose(p.guess, p.basis, p.ion).excess_quanta > 1e3);
}

TEST_CASE("optimized trajectory is symmetric about mid-transport") {
  const auto& r = baseline_run();
  Problem p;
  const auto d = diagnose(r.waveform, p.basis, p.ion);
  CHECK(alpha_asymmetry(r.waveform, d.records, p.delta_t) < 0.2);
}

TEST_CASE("an oversized step is flagged") {
  Problem p;
  p.opt.tau *= 100.0;
  p.opt.max_iterations = 50;
  const auto r = optimize(p.guess, p.basis, p.ion, p.cost, p.opt);
  CHECK(r.oscillating);
  CHECK_FALSE(r.converged);
}

TEST_CASE("constant-omega mode holds the well frequency") {
  Problem p;
  ScanConfig sc;
  sc.family = GuessFamily::sin2_constant_omega;
  sc.padding = 0.5e-6;
  sc.dt = 2e-9;
  const auto guess = make_guess(sc, p.delta_t, p.basis, p.ion);
  p.opt.mode = ControlMode::constant_omega;
  p.opt.max_iterations = 20;
  p.opt.log_every = 5;
  const auto r = optimize(guess, p.basis, p.ion, p.cost, p.opt);
  CHECK(r.final_cost < r.initial_cost);
  const double omega0 = instantaneous_well(guess.u.row(0).transpose(), p.basis, p.ion).omega;
  auto check_constant = [&](const ControlWaveform& w) {
    double worst = 0.0;
    for (const auto& well : well_series(w, p.basis, p.ion)) {
      worst = std::max(worst, std::abs(well.omega - omega0) / omega0);
    }
    CHECK(worst < 1e-6);
  };
  for (const auto& it : r.logged) check_constant(it.waveform);
  check_constant(r.waveform);
}

TEST_CASE("constant-omega normalization") {
  Problem p;
  const auto w1 = normalize_constant_omega(p.guess, p.basis, p.ion);
  const auto w2 = normalize_constant_omega(w1, p.basis, p.ion);
  CHECK((w2.u - w1.u).cwiseAbs().maxCoeff() < 1e-9 * w1.u.cwiseAbs().maxCoeff());
  const auto a = well_series(p.guess, p.basis, p.ion);
  const auto b = well_series(w1, p.basis, p.ion);
  double dx = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dx = std::max(dx, std::abs(a[k].x0 - b[k].x0));
  CHECK(dx < 1e-9);
  CHECK(max_omega_rate(b) < 1e-6);
}

TEST_CASE("tilde controls") {
  ControlWaveform w;
  w.dt = 1.0;
  w.u.resize(1, 2);
  w.u << 0.5, 0.5;
  const auto t = to_tilde(w);
  CHECK(t.sum[0] == 1.0);
  CHECK(t.fraction[0] == 0.5);

  const auto g = initial_guess_sin2(-0.1, 8e-6, -1e-6, 9e-6, 1e-8);
  const auto back = from_tilde(to_tilde(g));
  CHECK((back.u - g.u).cwiseAbs().maxCoeff() <= 1e-15);

  w.u << 0.3, -0.3;
  CHECK_THROWS_AS(to_tilde(w), ConfigError);
}

TEST_CASE("quanta threshold corresponds to the requested excitation") {
  Problem p;
  const double omega = 2.0 * constants::pi * 0.5e6;
  const double thr = quanta_threshold(p.cost, p.ion, omega, 1e-4);
  // a pure displacement at the threshold cost carries at most 1e-4 quanta
  const double dx = std::sqrt(thr / p.cost.alpha) * p.cost.length_scale;
  WellParams well{0.0, 0.0, omega, 0.0};
  CHECK(excess_quanta({dx, 0.0}, well, p.ion) <= 1e-4 * (1 + 1e-12));
}

TEST_CASE("waveform CSV round trip") {
  const auto g = initial_guess_sin2(-0.1, 8e-6, -1e-6, 9e-6, 1e-8);
  std::stringstream buf;
  write_waveform_csv(buf, g);
  const auto back = read_waveform_csv(buf);
  CHECK(back.samples() == g.samples());
  CHECK(back.t0 == g.t0);
  CHECK(back.dt == doctest::Approx(g.dt).epsilon(1e-12));
  CHECK((back.u - g.u).cwiseAbs().maxCoeff() == 0.0);

  std::istringstream bad("time,u\n0,1\n");
  CHECK_THROWS_AS(read_waveform_csv(bad), ConfigError);
  std::istringstream ragged("t_s,u_1_V\n0,1\n1e-9,2,3\n");
  CHECK_THROWS_AS(read_waveform_csv(ragged), ConfigError);
  std::istringstream uneven("t_s,u_1_V\n0,1\n1e-9,2\n3e-9,2\n");
  CHECK_THROWS_AS(read_waveform_csv(uneven), ConfigError);
}

TEST_CASE("configuration validation") {
  CostConfig c;
  c.alpha = 0.0;
  c.beta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  OptimizerConfig o;
  o.tau = 0.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}
