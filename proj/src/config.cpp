#include "ptrap/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"

namespace ptrap {

namespace {

struct Unit {
  const char* symbol;
  Dimension dimension;
  double factor;
};

constexpr Unit kUnits[] = {
    {"m", Dimension::length, 1.0},        {"mm", Dimension::length, 1e-3},
    {"um", Dimension::length, 1e-6},      {"µm", Dimension::length, 1e-6},
    {"nm", Dimension::length, 1e-9},      {"s", Dimension::time, 1.0},
    {"ms", Dimension::time, 1e-3},        {"us", Dimension::time, 1e-6},
    {"µs", Dimension::time, 1e-6},        {"ns", Dimension::time, 1e-9},
    {"ps", Dimension::time, 1e-12},       {"V", Dimension::voltage, 1.0},
    {"kV", Dimension::voltage, 1e3},      {"mV", Dimension::voltage, 1e-3},
    {"uV", Dimension::voltage, 1e-6},     {"µV", Dimension::voltage, 1e-6},
    {"Hz", Dimension::frequency, 1.0},    {"kHz", Dimension::frequency, 1e3},
    {"MHz", Dimension::frequency, 1e6},   {"GHz", Dimension::frequency, 1e9},
    {"kg", Dimension::mass, 1.0},         {"u", Dimension::mass, constants::atomic_mass_unit},
    {"Da", Dimension::mass, constants::atomic_mass_unit},
    {"C", Dimension::charge, 1.0},        {"e", Dimension::charge, constants::elementary_charge},
};

const char* dimension_name(Dimension d) {
  switch (d) {
    case Dimension::none: return "dimensionless";
    case Dimension::length: return "length";
    case Dimension::time: return "time";
    case Dimension::voltage: return "voltage";
    case Dimension::frequency: return "frequency";
    case Dimension::mass: return "mass";
    case Dimension::charge: return "charge";
  }
  return "?";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string key_of(const std::string& section, const std::string& key) {
  return section + "." + key;
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dimension) {
  const std::string_view t = trim(text);
  const std::string original(t);
  if (t.empty()) throw ConfigError("empty value where a number was expected");
  double number = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), number);
  if (ec != std::errc() || end == t.data()) {
    throw ConfigError("'" + original + "' is not a number");
  }
  const std::string_view suffix = trim(std::string_view(end, t.data() + t.size() - end));
  if (!std::isfinite(number)) throw ConfigError("'" + original + "' is not finite");
  if (suffix.empty()) {
    if (dimension != Dimension::none) {
      throw ConfigError("'" + original + "' needs a " + dimension_name(dimension) + " unit");
    }
    return number;
  }
  for (const Unit& u : kUnits) {
    if (suffix == u.symbol) {
      if (u.dimension != dimension) {
        throw ConfigError("'" + original + "': expected " + dimension_name(dimension) +
                          ", got a " + dimension_name(u.dimension) + " unit");
      }
      return number * u.factor;
    }
  }
  throw ConfigError("'" + original + "': unknown unit '" + std::string(suffix) + "'");
}

std::vector<double> parse_quantity_list(std::string_view text, Dimension dimension) {
  const std::string_view t = trim(text);
  std::vector<double> out;
  if (t.empty()) return out;
  if (const auto dots = t.find(".."); dots != std::string_view::npos) {
    const auto colon = t.find(':', dots);
    if (colon == std::string_view::npos) {
      throw ConfigError("range '" + std::string(t) + "' needs ':count'");
    }
    const double a = parse_quantity(t.substr(0, dots), dimension);
    const double b = parse_quantity(t.substr(dots + 2, colon - dots - 2), dimension);
    const int n = static_cast<int>(parse_quantity(t.substr(colon + 1), Dimension::none));
    if (n < 1) throw ConfigError("range '" + std::string(t) + "' needs a positive count");
    if (n == 1) return {a};
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    return out;
  }
  std::size_t start = 0;
  while (start <= t.size()) {
    const auto comma = t.find(',', start);
    const auto piece = t.substr(start, comma == std::string_view::npos ? t.npos : comma - start);
    out.push_back(parse_quantity(piece, dimension));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto where = origin + ":" + std::to_string(number);
    std::string_view l = trim(line);
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = trim(l.substr(0, hash));
    if (l.empty() || l.front() == ';') continue;
    if (l.front() == '[') {
      if (l.back() != ']') throw ConfigError(where + ": malformed section header");
      section = lower(std::string(trim(l.substr(1, l.size() - 2))));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = lower(std::string(trim(l.substr(0, eq))));
    if (key.empty()) throw ConfigError(where + ": empty key");
    auto& sec = cfg.values_[section];
    if (sec.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    sec[key] = std::string(trim(l.substr(eq + 1)));
    cfg.used_[key_of(section, key)] = false;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  return s != values_.end() && s->second.count(key) > 0;
}

const std::string& ConfigFile::raw(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end() || !s->second.count(key)) {
    throw ConfigError(origin_ + ": missing [" + section + "] " + key);
  }
  used_[key_of(section, key)] = true;
  return s->second.at(key);
}

double ConfigFile::quantity(const std::string& section, const std::string& key, Dimension dim,
                            double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return parse_quantity(raw(section, key), dim);
  } catch (const ConfigError& e) {
    throw ConfigError(origin_ + ": [" + section + "] " + key + ": " + e.what());
  }
}

int ConfigFile::integer(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  const std::string& v = raw(section, key);
  int out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError(origin_ + ": [" + section + "] " + key + ": '" + v + "' is not an integer");
  }
  return out;
}

bool ConfigFile::boolean(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = lower(raw(section, key));
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(origin_ + ": [" + section + "] " + key + ": '" + v + "' is not a boolean");
}

std::string ConfigFile::text(const std::string& section, const std::string& key,
                             const std::string& fallback) const {
  return has(section, key) ? raw(section, key) : fallback;
}

std::vector<double> ConfigFile::list(const std::string& section, const std::string& key,
                                     Dimension dim) const {
  if (!has(section, key)) return {};
  try {
    return parse_quantity_list(raw(section, key), dim);
  } catch (const ConfigError& e) {
    throw ConfigError(origin_ + ": [" + section + "] " + key + ": " + e.what());
  }
}

std::vector<std::string> ConfigFile::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, used] : used_) {
    if (!used) out.push_back(k);
  }
  return out;
}

std::string ConfigFile::directory() const {
  const auto parent = std::filesystem::path(origin_).parent_path();
  return parent.empty() ? "." : parent.string();
}

double DacSpec::low() const {
  switch (polarity) {
    case DacPolarity::bipolar: return -0.5 * range;
    case DacPolarity::negative: return -range;
    case DacPolarity::positive: return 0.0;
  }
  return 0.0;
}

double DacSpec::step() const { return range / std::ldexp(1.0, bits); }

void DacSpec::validate() const {
  if (bits < 8 || bits > 24) throw ConfigError("dac: bits must be in [8, 24]");
  if (!(range > 0.0) || !std::isfinite(range)) throw ConfigError("dac: range must be > 0");
  if (update_rate < 0.0 || !std::isfinite(update_rate)) {
    throw ConfigError("dac: update_rate must be >= 0");
  }
}

void RunConfig::validate() const {
  geometry.validate();
  if (refinement < 1) throw ConfigError("geometry: refinement must be >= 1");
  ion.validate();
  drive.validate();
  const int n = geometry.n_segments;
  const auto in_range = [n](int j) { return j >= 0 && j < n; };
  if (!in_range(transport.start_segment) || !in_range(transport.destination_segment)) {
    throw ConfigError("transport: segment index outside [0, n_segments)");
  }
  if (transport.start_segment == transport.destination_segment) {
    throw ConfigError("transport: start and destination segments coincide");
  }
  if (!(transport.grid_spacing > 0.0) || !(transport.margin > 0.0)) {
    throw ConfigError("transport: grid_spacing and margin must be > 0");
  }
  if (!(guess.dt > 0.0) || !(guess.delta_t > 0.0) || guess.t0 > 0.0 || guess.t_f < guess.delta_t) {
    throw ConfigError("guess: need dt > 0 and t0 <= 0 < delta_t <= t_f");
  }
  cost.validate();
  optimizer.validate();
  for (double d : scan.durations) {
    if (!(d > 0.0)) throw ConfigError("scan: durations must be > 0");
  }
  for (double v : scan.noise_levels) {
    if (v < 0.0) throw ConfigError("scan: noise levels must be >= 0");
  }
  if (!scan.noise_levels.empty() && scan.noise_trials < 10) {
    throw ConfigError("scan: noise_trials must be >= 10");
  }
  dac.validate();
}

namespace {

void read_geometry(const ConfigFile& f, TrapGeometryParams& g) {
  const std::string s = "geometry";
  g.layer_thickness = f.quantity(s, "layer_thickness", Dimension::length, g.layer_thickness);
  g.layer_separation = f.quantity(s, "layer_separation", Dimension::length, g.layer_separation);
  g.electrode_length = f.quantity(s, "electrode_length", Dimension::length, g.electrode_length);
  g.rf_dc_gap = f.quantity(s, "slit_width", Dimension::length, g.rf_dc_gap);
  g.segment_width = f.quantity(s, "segment_width", Dimension::length, g.segment_width);
  g.segment_gap = f.quantity(s, "segment_gap", Dimension::length, g.segment_gap);
  g.n_segments = f.integer(s, "n_segments", g.n_segments);
  g.axial_extent = f.quantity(s, "axial_extent", Dimension::length, g.axial_extent);
  g.lateral_width = f.quantity(s, "lateral_width", Dimension::length, g.lateral_width);
}

void reject_unused(const ConfigFile& f) {
  const auto extra = f.unused();
  if (extra.empty()) return;
  std::string msg = f.origin() + ": unknown setting(s):";
  for (const auto& k : extra) msg += " " + k;
  throw ConfigError(msg);
}

std::string resolve(const ConfigFile& f, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) p = std::filesystem::path(f.directory()) / p;
  return p.string();
}

}  // namespace

RunConfig parse_run_config(const ConfigFile& f) {
  RunConfig c;

  if (f.has("geometry", "file")) {
    const std::string path = resolve(f, f.raw("geometry", "file"));
    if (!std::filesystem::exists(path)) {
      throw ConfigError(f.origin() + ": geometry file '" + path + "' not found");
    }
    const ConfigFile g = ConfigFile::load(path);
    read_geometry(g, c.geometry);
    reject_unused(g);
  }
  read_geometry(f, c.geometry);
  c.refinement = f.integer("geometry", "refinement", c.refinement);
  c.mesh.base_panel = f.quantity("mesh", "base_panel", Dimension::length, c.mesh.base_panel);
  c.mesh.edge_band = f.quantity("mesh", "edge_band", Dimension::length, c.mesh.edge_band);
  c.mesh.slit_walls = f.boolean("mesh", "slit_walls", c.mesh.slit_walls);

  const std::string species = f.text("ion", "species", "40Ca+");
  if (species != "40Ca+" && species != "Ca40" && species != "custom") {
    throw ConfigError(f.origin() + ": [ion] species must be 40Ca+ or custom");
  }
  c.ion.mass = f.quantity("ion", "mass", Dimension::mass, c.ion.mass);
  c.ion.charge = f.quantity("ion", "charge", Dimension::charge, c.ion.charge);
  if (species == "custom") c.ion.label = "custom";

  c.drive.u_rf = f.quantity("drive", "u_rf", Dimension::voltage, c.drive.u_rf);
  c.drive.u_dc = f.quantity("drive", "u_dc", Dimension::voltage, c.drive.u_dc);
  c.drive.omega_rf = 2.0 * constants::pi *
                     f.quantity("drive", "f_rf", Dimension::frequency,
                                c.drive.omega_rf / (2.0 * constants::pi));

  c.transport.start_segment = f.integer("transport", "start_segment", c.transport.start_segment);
  c.transport.destination_segment =
      f.integer("transport", "destination_segment", c.transport.start_segment + 1);
  c.transport.grid_spacing =
      f.quantity("transport", "grid_spacing", Dimension::length, c.transport.grid_spacing);
  c.transport.margin = f.quantity("transport", "margin", Dimension::length, c.transport.margin);

  const std::string family = f.text("guess", "family", "sin2");
  if (family == "sin2") {
    c.guess.family = GuessFamily::sin2;
  } else if (family == "sin2_constant_omega") {
    c.guess.family = GuessFamily::sin2_constant_omega;
  } else {
    throw ConfigError(f.origin() + ": [guess] family must be sin2 or sin2_constant_omega");
  }
  c.guess.v0 = f.quantity("guess", "v0", Dimension::voltage, c.guess.v0);
  c.guess.delta_t = f.quantity("guess", "delta_t", Dimension::time, c.guess.delta_t);
  c.guess.t0 = f.quantity("guess", "t0", Dimension::time, c.guess.t0);
  c.guess.t_f = f.quantity("guess", "t_f", Dimension::time, c.guess.delta_t - c.guess.t0);
  c.guess.dt = f.quantity("guess", "dt", Dimension::time, c.guess.dt);

  c.cost.alpha = f.quantity("cost", "alpha", Dimension::none, c.cost.alpha);
  c.cost.beta = f.quantity("cost", "beta", Dimension::none, c.cost.beta);
  if (f.has("cost", "x_f") && f.raw("cost", "x_f") != "auto") {
    c.cost.x_f = f.quantity("cost", "x_f", Dimension::length, 0.0);
    c.x_f_auto = false;
  }
  c.cost.length_scale = f.quantity("cost", "length_scale", Dimension::length, c.cost.length_scale);
  c.cost.time_scale = f.quantity("cost", "time_scale", Dimension::time, c.cost.time_scale);

  auto& o = c.optimizer;
  o.tau = f.quantity("optimizer", "tau", Dimension::none, o.tau);
  o.max_iterations = f.integer("optimizer", "max_iterations", o.max_iterations);
  if (f.has("optimizer", "threshold") && f.raw("optimizer", "threshold") != "auto") {
    o.threshold = f.quantity("optimizer", "threshold", Dimension::none, 0.0);
  }
  o.threshold_quanta = f.quantity("optimizer", "threshold_quanta", Dimension::none,
                                  o.threshold_quanta);
  o.divergence_factor = f.quantity("optimizer", "divergence_factor", Dimension::none,
                                   o.divergence_factor);
  o.log_every = f.integer("optimizer", "log_every", o.log_every);
  const std::string mode = f.text("optimizer", "mode",
                                  c.guess.family == GuessFamily::sin2_constant_omega
                                      ? "constant_omega"
                                      : "unconstrained");
  if (mode == "unconstrained") {
    o.mode = ControlMode::unconstrained;
  } else if (mode == "constant_omega") {
    o.mode = ControlMode::constant_omega;
  } else {
    throw ConfigError(f.origin() + ": [optimizer] mode must be unconstrained or constant_omega");
  }

  auto& ch = c.characterize;
  ch.radial_sweep = f.list("characterize", "radial_sweep", Dimension::length);
  ch.axial_sweep = f.list("characterize", "axial_sweep", Dimension::length);
  ch.axial_sweep_gap =
      f.quantity("characterize", "axial_sweep_gap", Dimension::length, ch.axial_sweep_gap);
  ch.axial_sweep_segments =
      f.integer("characterize", "axial_sweep_segments", ch.axial_sweep_segments);
  ch.target_axial_frequency = f.quantity("characterize", "target_axial_frequency",
                                         Dimension::frequency, ch.target_axial_frequency);
  ch.depth_ray_length =
      f.quantity("characterize", "depth_ray_length", Dimension::length, ch.depth_ray_length);
  ch.depth_ray_step =
      f.quantity("characterize", "depth_ray_step", Dimension::length, ch.depth_ray_step);

  c.scan.durations = f.list("scan", "durations", Dimension::time);
  c.scan.optimize = f.boolean("scan", "optimize", c.scan.optimize);
  c.scan.noise_levels = f.list("scan", "noise_levels", Dimension::voltage);
  c.scan.noise_trials = f.integer("scan", "noise_trials", c.scan.noise_trials);

  c.dac.bits = f.integer("dac", "bits", c.dac.bits);
  c.dac.range = f.quantity("dac", "range", Dimension::voltage, c.dac.range);
  c.dac.update_rate = f.quantity("dac", "update_rate", Dimension::frequency, c.dac.update_rate);
  const std::string pol = f.text("dac", "polarity", "bipolar");
  if (pol == "bipolar") {
    c.dac.polarity = DacPolarity::bipolar;
  } else if (pol == "negative") {
    c.dac.polarity = DacPolarity::negative;
  } else if (pol == "positive") {
    c.dac.polarity = DacPolarity::positive;
  } else {
    throw ConfigError(f.origin() + ": [dac] polarity must be bipolar, negative or positive");
  }
  if (f.has("dac", "waveform")) c.waveform_file = resolve(f, f.raw("dac", "waveform"));

  reject_unused(f);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(ConfigFile::load(path));
}

}  // namespace ptrap
