#pragma once

#include <string>
#include <vector>

#include "ptrap/config.hpp"
#include "ptrap/electrostatics.hpp"

namespace ptrap {

MeshPtr build_trap_mesh(const TrapGeometryParams& geometry, int refinement,
                        const MeshOptions& options);

/// Per-segment (top + bottom DC pair) basis of the whole trap, solved or
/// read from `cache_dir`.
std::vector<BasisPotential> trap_segment_bases(const TrapGeometryParams& geometry,
                                               int refinement, const MeshOptions& options,
                                               const std::string& cache_dir);

/// On-axis basis with two columns, start and destination segment, sampled
/// from `margin` before the first centre to `margin` past the second.
AxialBasis transport_basis(const std::vector<BasisPotential>& segments,
                           const TrapGeometryParams& geometry, const TransportSetup& setup);

/// Guess of the configured family on the configured time grid.
ControlWaveform make_guess(const GuessConfig& guess, const AxialBasis& basis,
                           const IonSpecies& ion);

}  // namespace ptrap
