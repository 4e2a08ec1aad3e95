#include "ptrap/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ptrap/cache.hpp"
#include "ptrap/error.hpp"

namespace ptrap {

MeshPtr build_trap_mesh(const TrapGeometryParams& geometry, int refinement,
                        const MeshOptions& options) {
  return std::make_shared<const ElectrodeMesh>(build_two_layer(geometry, refinement, options));
}

std::vector<BasisPotential> trap_segment_bases(const TrapGeometryParams& geometry,
                                               int refinement, const MeshOptions& options,
                                               const std::string& cache_dir) {
  const MeshPtr mesh = build_trap_mesh(geometry, refinement, options);
  return segment_bases(cached_basis_potentials(mesh, cache_dir));
}

AxialBasis transport_basis(const std::vector<BasisPotential>& segments,
                           const TrapGeometryParams& geometry, const TransportSetup& setup) {
  const int n = static_cast<int>(segments.size());
  const int a = setup.start_segment, b = setup.destination_segment;
  if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
    throw ConfigError("transport: segment indices outside the segment basis");
  }
  const double ca = geometry.segment_center(a), cb = geometry.segment_center(b);
  const double lo = std::min(ca, cb) - setup.margin;
  const double hi = std::max(ca, cb) + setup.margin;
  const int points = static_cast<int>(std::lround((hi - lo) / setup.grid_spacing)) + 1;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, lo, hi);
  AxialBasis basis = axial_line_scan(std::vector<BasisPotential>{segments[a], segments[b]}, grid);
  return basis;
}

ControlWaveform make_guess(const GuessConfig& g, const AxialBasis& basis, const IonSpecies& ion) {
  ControlWaveform w = initial_guess_sin2(g.v0, g.delta_t, g.t0, g.t_f, g.dt);
  if (g.family == GuessFamily::sin2_constant_omega) w = normalize_constant_omega(w, basis, ion);
  return w;
}

}  // namespace ptrap
