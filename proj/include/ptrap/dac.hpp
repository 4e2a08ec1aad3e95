#pragma once

#include "ptrap/config.hpp"
#include "ptrap/transport.hpp"

namespace ptrap {

struct DacResult {
  ControlWaveform quantized;
  double step = 0.0;       // V per code
  double max_error = 0.0;  // V, largest |quantized - input| over all samples
};

/// Nearest code to (value - low) / step with ties to even. The caller checks
/// the code against the converter's range.
long long dac_code(double value, double low, double step);

/// Resamples to the update rate (linear interpolation, when nonzero) and
/// rounds every sample to the nearest code. Throws ConfigError listing the
/// offending times when a sample lies outside the full-scale interval.
/// Accepts any resolution from 1 to 31 bits; DacSpec::validate enforces the
/// hardware range separately.
DacResult quantize_waveform(const ControlWaveform& waveform, const DacSpec& spec);

}  // namespace ptrap
