#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ptrap/geometry.hpp"
#include "ptrap/heating.hpp"
#include "ptrap/potentials.hpp"
#include "ptrap/transport.hpp"

namespace ptrap {

/// Physical dimension a config value must carry.
enum class Dimension { none, length, time, voltage, frequency, mass, charge };

/// Parses "8.0us", "-0.1 V", "50MHz", "1e-4". Dimensioned values must carry a
/// unit suffix and dimensionless ones must not. Returns SI units; frequencies
/// come back in Hz.
double parse_quantity(std::string_view text, Dimension dimension);

/// Comma-separated quantities, or "a..b:n" for n evenly spaced values.
std::vector<double> parse_quantity_list(std::string_view text, Dimension dimension);

/// Sectioned key = value text. Lines starting with '#' or ';' are comments.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, const std::string& origin = "<string>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  /// Raw value; throws ConfigError when absent.
  const std::string& raw(const std::string& section, const std::string& key) const;
  double quantity(const std::string& section, const std::string& key, Dimension dim,
                  double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  bool boolean(const std::string& section, const std::string& key, bool fallback) const;
  std::string text(const std::string& section, const std::string& key,
                   const std::string& fallback) const;
  std::vector<double> list(const std::string& section, const std::string& key, Dimension dim) const;

  /// Keys that were never read; used to reject misspelled settings.
  std::vector<std::string> unused() const;
  const std::string& origin() const { return origin_; }
  /// Directory relative paths in this file resolve against.
  std::string directory() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::map<std::string, bool> used_;
  std::string origin_;
};

struct GuessConfig {
  GuessFamily family = GuessFamily::sin2;
  double v0 = -0.1;         // V
  double delta_t = 8e-6;    // s
  double t0 = -1e-6;        // s
  double t_f = 9e-6;        // s
  double dt = 1e-9;         // s
};

/// Which segments an ion moves between and how the axial basis is sampled.
struct TransportSetup {
  int start_segment = 4;        // 0-based
  int destination_segment = 5;  // 0-based
  double grid_spacing = 0.1e-6;
  double margin = 60e-6;        // beyond both segment centres
};

struct CharacterizeConfig {
  std::vector<double> radial_sweep;  // slit widths g, m
  std::vector<double> axial_sweep;   // segment widths k, m
  double axial_sweep_gap = 30e-6;    // h_gap used by the k sweep
  int axial_sweep_segments = 7;
  double target_axial_frequency = 2.5e6;  // Hz
  double depth_ray_length = 400e-6;
  double depth_ray_step = 2e-6;
};

struct ScanSpec {
  std::vector<double> durations;     // s
  bool optimize = false;
  std::vector<double> noise_levels;  // V rms
  int noise_trials = 50;
};

enum class DacPolarity { bipolar, negative, positive };

/// Full-scale interval [low(), low() + range].
struct DacSpec {
  int bits = 16;
  double range = 0.2;        // V
  double update_rate = 0.0;  // samples/s, 0 keeps the waveform grid
  DacPolarity polarity = DacPolarity::bipolar;

  double low() const;
  double step() const;
  void validate() const;
};

struct RunConfig {
  TrapGeometryParams geometry;
  int refinement = 1;
  MeshOptions mesh;
  IonSpecies ion = IonSpecies::calcium40();
  DriveConfig drive{120.0, 0.0, 2.0 * 3.14159265358979323846 * 50e6};
  TransportSetup transport;
  GuessConfig guess;
  CostConfig cost;
  bool x_f_auto = true;  // target the minimum of the last guess sample
  OptimizerConfig optimizer;
  CharacterizeConfig characterize;
  ScanSpec scan;
  DacSpec dac;
  std::string waveform_file;  // export-dac input, resolved against the config

  void validate() const;
};

/// Reads a run configuration. A `[geometry] file = ...` entry loads that
/// file's [geometry] section first; entries here override it. Unknown keys
/// and missing referenced files raise ConfigError.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const ConfigFile& file);

}  // namespace ptrap
