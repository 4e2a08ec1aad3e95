#include "ptrap/dac.hpp"

#include <cfenv>
#include <cmath>
#include <sstream>

#include "ptrap/error.hpp"

namespace ptrap {

long long dac_code(double value, double low, double step) {
  // nearbyint honours the rounding mode, which defaults to ties-to-even.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double code = std::nearbyint((value - low) / step);
  std::fesetround(saved);
  return static_cast<long long>(code);
}

namespace {

ControlWaveform resample(const ControlWaveform& w, double rate) {
  const double dt = 1.0 / rate;
  const long n = static_cast<long>(std::floor((w.t_f() - w.t0) / dt * (1.0 + 1e-12))) + 1;
  ControlWaveform out;
  out.t0 = w.t0;
  out.dt = dt;
  out.names = w.names;
  out.u.resize(n, w.electrodes());
  for (long k = 0; k < n; ++k) {
    const double s = std::min((k * dt) / w.dt, double(w.samples() - 1));
    const long i = std::min(static_cast<long>(s), static_cast<long>(w.samples() - 2));
    const double f = s - double(i);
    out.u.row(k) = (1.0 - f) * w.u.row(i) + f * w.u.row(i + 1);
  }
  return out;
}

}  // namespace

DacResult quantize_waveform(const ControlWaveform& waveform, const DacSpec& spec) {
  waveform.validate();
  if (spec.bits < 1 || spec.bits > 31) throw ConfigError("dac: bits must be in [1, 31]");
  if (!(spec.range > 0.0)) throw ConfigError("dac: range must be > 0");
  DacResult r;
  r.quantized = spec.update_rate > 0.0 ? resample(waveform, spec.update_rate) : waveform;
  r.step = spec.step();
  const double low = spec.low();
  const long long top = (1LL << spec.bits) - 1;

  std::ostringstream bad;
  int bad_count = 0;
  ControlWaveform& q = r.quantized;
  for (int k = 0; k < q.samples(); ++k) {
    for (int e = 0; e < q.electrodes(); ++e) {
      const double v = q.u(k, e);
      const long long code = dac_code(v, low, r.step);
      if (code < 0 || code > top) {
        if (bad_count < 20) bad << (bad_count ? ", " : "") << "t=" << q.time(k) << " s (electrode "
                                << e + 1 << ", " << v << " V)";
        ++bad_count;
        continue;
      }
      const double out = low + double(code) * r.step;
      r.max_error = std::max(r.max_error, std::abs(out - v));
      q.u(k, e) = out;
    }
  }
  if (bad_count > 0) {
    std::ostringstream msg;
    msg << "dac: " << bad_count << " sample(s) outside [" << low << ", " << low + double(top) * r.step
        << "] V: " << bad.str() << (bad_count > 20 ? ", ..." : "");
    throw ConfigError(msg.str());
  }
  return r;
}

}  // namespace ptrap
