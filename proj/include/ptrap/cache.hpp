#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptrap/electrostatics.hpp"

namespace ptrap {

/// FNV-1a over the panel vertices, electrode assignment and names, and the
/// solver tolerance. Any geometry or meshing change alters the key.
std::uint64_t mesh_hash(const ElectrodeMesh& mesh, double tolerance = 1e-6);

/// Cache file of one mesh inside `dir`.
std::string cache_path(const std::string& dir, std::uint64_t key);

/// Versioned binary record: header, panel/electrode counts, per-electrode
/// charge densities. Throws SolverError on I/O failure.
void write_basis_cache(const std::string& path, std::uint64_t key,
                       const std::vector<BasisPotential>& basis);

/// Returns false when the file is missing, of another version or key, or
/// does not match the mesh shape.
bool read_basis_cache(const std::string& path, std::uint64_t key, const MeshPtr& mesh,
                      std::vector<BasisPotential>& basis);

/// Basis potentials from `dir` when present, otherwise solved and stored.
/// An empty `dir` disables caching.
std::vector<BasisPotential> cached_basis_potentials(MeshPtr mesh, const std::string& dir);

}  // namespace ptrap
