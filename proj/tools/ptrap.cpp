// Command-line front end: characterize, optimize, scan, export-dac, mesh-dump.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "ptrap/cache.hpp"
#include "ptrap/config.hpp"
#include "ptrap/constants.hpp"
#include "ptrap/dac.hpp"
#include "ptrap/error.hpp"
#include "ptrap/heating.hpp"
#include "ptrap/pipeline.hpp"
#include "ptrap/potentials.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ptrap;

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kSolver = 3, kDiverged = 4 };

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string cache;
  std::string waveform;  // export-dac
  bool check = false;    // export-dac: re-simulate the quantized waveform
};

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / name;
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

void write_json(const Options& o, const std::string& name, const json& j) {
  open_out(o, name) << j.dump(2) << '\n';
}

double mhz(double omega) { return omega / (2.0 * constants::pi) / 1e6; }

json diagnostics_json(const WaveformDiagnostics& d) {
  return {{"excess_quanta", d.excess_quanta},
          {"dispersion_param", d.dispersion},
          {"adiabaticity_param", d.adiabaticity},
          {"max_omega_rate", d.max_omega_rate},
          {"revival_time_s", d.revival_time}};
}

int cmd_characterize(const Options& o) {
  const RunConfig c = load_run_config(o.config);
  const MeshPtr mesh = build_trap_mesh(c.geometry, c.refinement, c.mesh);
  const auto basis = cached_basis_potentials(mesh, o.cache);
  const auto segments = segment_bases(basis);

  SweepOptions sw;
  sw.refinement = c.refinement;
  sw.mesh = c.mesh;
  sw.cache_dir = o.cache;
  const RadialSweepRow radial = radial_point(c.geometry, sw);
  const StabilityParams st = stability(radial.c2, c.drive, c.ion);

  // Axial curvature of the central segment per volt of trapping voltage.
  const int mid = c.geometry.n_segments / 2;
  const double center = c.geometry.segment_center(mid);
  const double k = c.geometry.segment_width;
  const double window = sw.axial_window_factor * k;
  const double span = 0.5 * window + std::max(0.25 * k, 10e-6);
  const int points = static_cast<int>(std::ceil(2.0 * span / 0.1e-6)) + 1;
  const AxialBasis axial =
      axial_line_scan({segments[mid]}, Eigen::VectorXd::LinSpaced(points, center - span, center + span));
  const Eigen::VectorXd unit = Eigen::VectorXd::Constant(1, -1.0);
  const AxialPolynomialFit afit = fit_axial(axial, unit, center, window, sw.fit_order);
  const double target = 2.0 * constants::pi * c.characterize.target_axial_frequency;
  const double u_dc = voltage_for_axial_frequency(afit, target, c.ion);

  Eigen::VectorXd dc = Eigen::VectorXd::Zero(mesh->electrode_count());
  for (int e : mesh->segment_electrodes[mid]) dc[e] = -u_dc;
  DepthSearch search;
  search.start = Vec3(center, 0.0, 0.0);
  search.ray_length = c.characterize.depth_ray_length;
  search.ray_step = c.characterize.depth_ray_step;
  TrapCharacterization tc = pseudopotential_depth(trap_fields(basis, dc), c.drive, c.ion, search);
  tc.omega_ax = axial_frequency(afit, u_dc, c.ion);
  json j;
  try {
    tc.omega_sec = secular_frequency(st, c.drive.omega_rf);
  } catch (const SolverError& e) {
    j["warning"] = e.what();
  }

  j["panels"] = mesh->panel_count();
  j["c2_per_m2"] = radial.c2;
  j["c4_per_m4"] = radial.c4;
  j["c4_over_c2_m2"] = radial.c4_over_c2;
  j["d2_per_m2_per_V"] = afit.d(2);
  j["d4_per_m4_per_V"] = afit.d(4);
  j["a"] = st.a;
  j["q"] = st.q;
  j["omega_sec_MHz"] = mhz(tc.omega_sec);
  j["omega_rad_MHz"] = mhz(tc.omega_rad);
  j["omega_ax_MHz"] = mhz(tc.omega_ax);
  j["dc_voltage_V"] = -u_dc;
  j["depth_eV"] = tc.depth;
  j["R_um"] = tc.R * 1e6;
  j["minimum_um"] = {tc.minimum.x() * 1e6, tc.minimum.y() * 1e6, tc.minimum.z() * 1e6};
  j["barriers_eV"] = tc.barriers;

  if (!c.characterize.radial_sweep.empty()) {
    const auto rows = radial_sweep(c.geometry, "g", c.characterize.radial_sweep, sw, o.threads);
    auto f = open_out(o, "radial_sweep.csv");
    write_radial_sweep_csv(f, rows);
  }
  if (!c.characterize.axial_sweep.empty()) {
    TrapGeometryParams base = c.geometry;
    base.segment_gap = c.characterize.axial_sweep_gap;
    base.n_segments = c.characterize.axial_sweep_segments;
    SweepOptions asw = sw;
    asw.fit_row = true;
    const auto rows = axial_sweep(base, "k", c.characterize.axial_sweep, asw, o.threads);
    auto f = open_out(o, "axial_sweep.csv");
    write_axial_sweep_csv(f, rows);
    std::vector<double> ks, d2, d4;
    for (const auto& r : rows) {
      ks.push_back(r.value);
      d2.push_back(r.d2);
      d4.push_back(r.d4);
    }
    if (rows.size() >= 3) j["axial_sweep_d2_peak_um"] = refined_peak(ks, d2) * 1e6;
    const double zero = first_zero_crossing(ks, d4);
    j["axial_sweep_d4_zero_um"] = std::isfinite(zero) ? json(zero * 1e6) : json(nullptr);
  }
  write_json(o, "characterization.json", j);
  std::cout << j.dump(2) << '\n';
  return kOk;
}

struct TransportContext {
  RunConfig config;
  AxialBasis basis;
};

TransportContext transport_context(const Options& o) {
  TransportContext t{load_run_config(o.config), {}};
  const auto& c = t.config;
  const auto segments = trap_segment_bases(c.geometry, c.refinement, c.mesh, o.cache);
  t.basis = transport_basis(segments, c.geometry, c.transport);
  return t;
}

void write_logged(std::ostream& out, const std::vector<LoggedIterate>& logged,
                  const AxialBasis& basis, const IonSpecies& ion) {
  out << "iteration,t,x,v,x0,omega,alpha_re,alpha_im\n" << std::setprecision(12);
  for (const auto& it : logged) {
    const auto wells = well_series(it.waveform, basis, ion);
    const auto rec = comoving_displacement(it.trajectory, wells, ion);
    for (std::size_t k = 0; k < wells.size(); ++k) {
      const auto& s = it.trajectory.states[k];
      out << it.iteration << ',' << it.trajectory.time(static_cast<int>(k)) << ',' << s.x << ','
          << s.v << ',' << wells[k].x0 << ',' << wells[k].omega << ',' << rec[k].alpha.real()
          << ',' << rec[k].alpha.imag() << '\n';
    }
  }
}

int cmd_optimize(const Options& o) {
  TransportContext ctx = transport_context(o);
  const RunConfig& c = ctx.config;
  const ControlWaveform guess = make_guess(c.guess, ctx.basis, c.ion);
  const WaveformDiagnostics before = diagnose(guess, ctx.basis, c.ion);
  CostConfig cost = c.cost;
  if (c.x_f_auto) cost.x_f = before.wells.back().x0;

  const OptimizationResult r = optimize(guess, ctx.basis, c.ion, cost, c.optimizer);
  const WaveformDiagnostics after = diagnose(r.waveform, ctx.basis, c.ion);

  { auto f = open_out(o, "guess.csv"); write_waveform_csv(f, guess); }
  { auto f = open_out(o, "waveform.csv"); write_waveform_csv(f, r.waveform); }
  { auto f = open_out(o, "run_log.csv"); write_run_log(f, r); }
  { auto f = open_out(o, "trajectory.csv");
    write_trajectory_csv(f, after.trajectory, after.wells, after.records); }
  { auto f = open_out(o, "trajectories_logged.csv"); write_logged(f, r.logged, ctx.basis, c.ion); }

  json j;
  j["x_start_um"] = before.wells.front().x0 * 1e6;
  j["x_f_um"] = cost.x_f * 1e6;
  j["omega_start_MHz"] = mhz(before.wells.front().omega);
  j["tau"] = c.optimizer.tau;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["oscillating"] = r.oscillating;
  j["initial_cost"] = r.initial_cost;
  j["final_cost"] = r.final_cost;
  j["threshold"] = r.threshold;
  j["cost_reduction_orders"] = std::log10(r.initial_cost / std::max(r.final_cost, 1e-300));
  j["guess"] = diagnostics_json(before);
  j["optimized"] = diagnostics_json(after);
  write_json(o, "diagnostics.json", j);
  std::cout << j.dump(2) << '\n';
  if (r.diverged) {
    std::cerr << "optimizer diverged; best waveform so far written\n";
    return kDiverged;
  }
  return kOk;
}

int cmd_scan(const Options& o) {
  {
    const RunConfig pre = load_run_config(o.config);
    if (pre.scan.durations.empty() && pre.scan.noise_levels.empty()) {
      throw ConfigError("scan: [scan] durations and noise_levels are both empty");
    }
  }
  TransportContext ctx = transport_context(o);
  const RunConfig& c = ctx.config;
  json j;
  if (!c.scan.durations.empty()) {
    ScanConfig sc;
    sc.v0 = c.guess.v0;
    sc.padding = -c.guess.t0;
    sc.dt = c.guess.dt;
    sc.family = c.guess.family;
    sc.cost = c.cost;
    sc.optimizer = c.optimizer;
    const auto rows =
        transport_time_scan(ctx.basis, c.ion, sc, c.scan.durations, c.scan.optimize, o.threads);
    auto f = open_out(o, "scan.csv");
    write_scan_csv(f, rows);
    int failed = 0;
    for (const auto& r : rows) {
      if (!r.error.empty()) {
        ++failed;
        std::cerr << "scan: duration " << r.duration << " s failed: " << r.error << '\n';
      }
    }
    j["durations"] = rows.size();
    j["failed_points"] = failed;
  }
  if (!c.scan.noise_levels.empty()) {
    const ControlWaveform guess = make_guess(c.guess, ctx.basis, c.ion);
    CostConfig cost = c.cost;
    if (c.x_f_auto) cost.x_f = instantaneous_well(guess.u.bottomRows(1).transpose(), ctx.basis, c.ion).x0;
    const OptimizationResult r = optimize(guess, ctx.basis, c.ion, cost, c.optimizer);
    if (r.diverged) throw SolverError("scan: optimizing the noise reference waveform diverged");
    const NoiseTable table = noise_robustness(r.waveform, ctx.basis, c.ion, c.scan.noise_levels,
                                              c.scan.noise_trials, o.seed, o.threads);
    auto f = open_out(o, "noise.csv");
    write_noise_csv(f, table);
    j["noise_clean_excess_quanta"] = table.clean_excess_quanta;
    j["noise_slope"] = table.slope;
    j["noise_slope_deviation"] = table.slope_deviation;
    j["seed"] = o.seed;
  }
  write_json(o, "scan.json", j);
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_export_dac(const Options& o) {
  const RunConfig c = load_run_config(o.config);
  const std::string path = !o.waveform.empty() ? o.waveform : c.waveform_file;
  if (path.empty()) throw ConfigError("export-dac: no waveform given (--waveform or [dac] waveform)");
  std::ifstream in(path);
  if (!in) throw ConfigError("export-dac: cannot open waveform '" + path + "'");
  const ControlWaveform w = read_waveform_csv(in);
  const DacResult d = quantize_waveform(w, c.dac);
  { auto f = open_out(o, "waveform_dac.csv"); write_waveform_csv(f, d.quantized); }
  json j;
  j["bits"] = c.dac.bits;
  j["range_V"] = c.dac.range;
  j["low_V"] = c.dac.low();
  j["step_V"] = d.step;
  j["max_error_V"] = d.max_error;
  j["samples"] = d.quantized.samples();
  if (o.check) {
    const auto segments = trap_segment_bases(c.geometry, c.refinement, c.mesh, o.cache);
    const AxialBasis basis = transport_basis(segments, c.geometry, c.transport);
    j["excess_quanta_input"] = diagnose(w, basis, c.ion).excess_quanta;
    j["excess_quanta_quantized"] = diagnose(d.quantized, basis, c.ion).excess_quanta;
  }
  write_json(o, "dac_report.json", j);
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_mesh_dump(const Options& o) {
  const RunConfig c = load_run_config(o.config);
  const MeshPtr mesh = build_trap_mesh(c.geometry, c.refinement, c.mesh);
  { auto f = open_out(o, "mesh.txt"); write_mesh_dump(f, *mesh); }
  json j;
  j["panels"] = mesh->panel_count();
  j["electrodes"] = mesh->electrode_names;
  j["total_area_m2"] = mesh->total_area();
  j["analytic_area_m2"] = analytic_electrode_area(c.geometry, c.mesh.slit_walls);
  j["mesh_hash"] = mesh_hash(*mesh);
  write_json(o, "mesh.json", j);
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmented Paul trap simulation and transport optimization"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration file")->required();
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Random seed for Monte Carlo studies");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--cache", o.cache, "Directory for cached field solutions");
  };
  auto* characterize = app.add_subcommand("characterize", "Field solve, multipole fits, depth");
  auto* optimize_cmd = app.add_subcommand("optimize", "Optimize one transport waveform");
  auto* scan = app.add_subcommand("scan", "Transport-time and noise scans");
  auto* dac = app.add_subcommand("export-dac", "Quantize a waveform for a DAC");
  auto* dump = app.add_subcommand("mesh-dump", "Write the panel mesh");
  for (auto* s : {characterize, optimize_cmd, scan, dac, dump}) common(s);
  dac->add_option("--waveform", o.waveform, "Waveform CSV (overrides [dac] waveform)");
  dac->add_flag("--check", o.check, "Re-simulate the quantized waveform");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
#ifdef _OPENMP
  omp_set_num_threads(o.threads);
#endif

  try {
    if (*characterize) return cmd_characterize(o);
    if (*optimize_cmd) return cmd_optimize(o);
    if (*scan) return cmd_scan(o);
    if (*dac) return cmd_export_dac(o);
    if (*dump) return cmd_mesh_dump(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}
