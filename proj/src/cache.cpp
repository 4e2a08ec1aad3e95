#include "ptrap/cache.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ptrap/error.hpp"
#include "ptrap/log.hpp"

namespace ptrap {

namespace {

constexpr char kMagic[8] = {'P', 'T', 'R', 'A', 'P', 'B', 'E', 'M'};
constexpr std::uint32_t kVersion = 2;

struct Fnv1a {
  std::uint64_t h = 14695981039346656037ull;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof v);
  }
};

}  // namespace

std::uint64_t mesh_hash(const ElectrodeMesh& mesh, double tolerance) {
  Fnv1a f;
  f.value(kVersion);
  f.value(tolerance);
  f.value(static_cast<std::int64_t>(mesh.panels.size()));
  for (std::size_t i = 0; i < mesh.panels.size(); ++i) {
    for (const Vec3& v : mesh.panels[i].vertices) {
      f.value(v.x());
      f.value(v.y());
      f.value(v.z());
    }
    f.value(static_cast<std::int32_t>(mesh.electrode_of[i]));
  }
  for (const auto& name : mesh.electrode_names) {
    f.bytes(name.data(), name.size());
    f.value('\0');
  }
  return f.h;
}

std::string cache_path(const std::string& dir, std::uint64_t key) {
  char name[40];
  std::snprintf(name, sizeof name, "bem_%016llx.bin", static_cast<unsigned long long>(key));
  return (std::filesystem::path(dir) / name).string();
}

void write_basis_cache(const std::string& path, std::uint64_t key,
                       const std::vector<BasisPotential>& basis) {
  if (basis.empty()) throw SolverError("cache: empty basis");
  const auto rows = static_cast<std::int64_t>(basis.front().solution.sigma.size());
  const auto cols = static_cast<std::int64_t>(basis.size());
  // Write to a temporary name first so concurrent readers never see a
  // partially written file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SolverError("cache: cannot write " + tmp);
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&key), sizeof key);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    for (const auto& b : basis) {
      const double cond = b.solution.condition_estimate, res = b.solution.residual;
      out.write(reinterpret_cast<const char*>(&cond), sizeof cond);
      out.write(reinterpret_cast<const char*>(&res), sizeof res);
      out.write(reinterpret_cast<const char*>(b.solution.sigma.data()),
                static_cast<std::streamsize>(rows * sizeof(double)));
    }
    if (!out) throw SolverError("cache: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

bool read_basis_cache(const std::string& path, std::uint64_t key, const MeshPtr& mesh,
                      std::vector<BasisPotential>& basis) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t stored = 0;
  std::int64_t rows = 0, cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&stored), sizeof stored);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kVersion ||
      stored != key || rows != mesh->panel_count() || cols != mesh->electrode_count()) {
    return false;
  }
  std::vector<BasisPotential> out(static_cast<std::size_t>(cols));
  for (std::int64_t e = 0; e < cols; ++e) {
    auto& b = out[static_cast<std::size_t>(e)];
    b.electrode = static_cast<int>(e);
    b.name = mesh->electrode_names[static_cast<std::size_t>(e)];
    b.solution.mesh = mesh;
    b.solution.applied_voltages = Eigen::VectorXd::Unit(cols, e);
    in.read(reinterpret_cast<char*>(&b.solution.condition_estimate), sizeof(double));
    in.read(reinterpret_cast<char*>(&b.solution.residual), sizeof(double));
    b.solution.sigma.resize(rows);
    in.read(reinterpret_cast<char*>(b.solution.sigma.data()),
            static_cast<std::streamsize>(rows * sizeof(double)));
  }
  if (!in) return false;
  basis = std::move(out);
  return true;
}

std::vector<BasisPotential> cached_basis_potentials(MeshPtr mesh, const std::string& dir) {
  if (dir.empty()) return basis_potentials(std::move(mesh));
  const std::uint64_t key = mesh_hash(*mesh);
  const std::string path = cache_path(dir, key);
  std::vector<BasisPotential> basis;
  if (read_basis_cache(path, key, mesh, basis)) return basis;
  basis = basis_potentials(mesh);
  try {
    std::filesystem::create_directories(dir);
    write_basis_cache(path, key, basis);
  } catch (const std::exception& e) {
    warn(std::string("could not store BEM cache: ") + e.what());
  }
  return basis;
}

}  // namespace ptrap
