#include "ptrap/electrostatics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "ptrap/constants.hpp"
#include "ptrap/error.hpp"
#include "ptrap/log.hpp"
#include "ptrap/panel_integrals.hpp"

namespace ptrap {

double ChargeSolution::electrode_charge(int electrode) const {
  double q = 0.0;
  for (int i = 0; i < mesh->panel_count(); ++i) {
    if (mesh->electrode_of[i] == electrode) q += sigma[i] * mesh->panels[i].area;
  }
  return q;
}

namespace {

void check_panels(const ElectrodeMesh& mesh) {
  const int n = mesh.panel_count();
  if (n == 0) throw SolverError("influence matrix: empty mesh");
  for (const auto& p : mesh.panels) {
    if (!(p.area > 0.0)) throw SolverError("influence matrix: degenerate panel with zero area");
  }
  // Two panels sharing a collocation point give identical rows.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  auto key = [&](int i) {
    const Vec3& c = mesh.panels[i].centroid;
    return std::array<double, 3>{c.x(), c.y(), c.z()};
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  for (int k = 1; k < n; ++k) {
    const Panel& p = mesh.panels[order[k]];
    const Panel& q = mesh.panels[order[k - 1]];
    if ((p.centroid - q.centroid).norm() <= 1e-9 * std::min(p.size(), q.size())) {
      throw SolverError("influence matrix: panels " + std::to_string(order[k - 1]) + " and " +
                        std::to_string(order[k]) + " share a centroid");
    }
  }
}

// Unsymmetrized collocation entry: potential at centroid i from panel j.
double raw_entry(const ElectrodeMesh& mesh, int i, int j) {
  return constants::coulomb_k * influence(mesh.panels[j], mesh.panels[i].centroid, i == j);
}

}  // namespace

Eigen::MatrixXd assemble_influence_matrix(const ElectrodeMesh& mesh) {
  check_panels(mesh);
  const int n = mesh.panel_count();
  Eigen::MatrixXd a(n, n);
  // Column-major storage: fill column j (source panel) for all targets.
#pragma omp parallel for schedule(dynamic, 16)
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) a(i, j) = raw_entry(mesh, i, j);
  }
  // Area-weighted symmetrization: area_i a(i, j) and area_j a(j, i) are both
  // one-point estimates of the Galerkin double integral over panels i and j.
  // Averaging them makes diag(area) * a symmetric, so the capacitance matrix
  // obeys reciprocity exactly.
  for (int j = 0; j < n; ++j) {
    const double aj = mesh.panels[j].area;
    for (int i = j + 1; i < n; ++i) {
      const double ai = mesh.panels[i].area;
      const double g = 0.5 * (ai * a(i, j) + aj * a(j, i));
      a(i, j) = g / ai;
      a(j, i) = g / aj;
    }
  }
  return a;
}

Eigen::MatrixXd apply_influence(const ElectrodeMesh& mesh, const Eigen::MatrixXd& x) {
  const int n = mesh.panel_count();
  if (x.rows() != n) throw SolverError("apply_influence: row count does not match the mesh");
  // The symmetrized entry is 0.5 (a(i,j) + area_j/area_i a(j,i)), so each raw
  // entry a(i,j) feeds row i directly and row j with the area ratio.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, x.cols());
#pragma omp parallel
  {
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, x.cols());
#pragma omp for schedule(dynamic, 16)
    for (int j = 0; j < n; ++j) {
      const double aj = mesh.panels[j].area;
      for (int i = 0; i < n; ++i) {
        const double e = 0.5 * raw_entry(mesh, i, j);
        local.row(i) += e * x.row(j);
        local.row(j) += (mesh.panels[i].area / aj) * e * x.row(i);
      }
    }
#pragma omp critical
    y += local;
  }
  return y;
}

BemSolver::BemSolver(MeshPtr mesh)
    : mesh_(mesh ? std::move(mesh) : throw SolverError("BEM: null mesh")),
      factors_(assemble_influence_matrix(*mesh_)),
      lu_(factors_) {
  const double rcond = lu_.rcond();
  condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(rcond > 1e-13)) {
    std::ostringstream msg;
    msg << "BEM: influence matrix is singular or ill-conditioned (condition estimate "
        << condition_ << ")";
    throw SolverError(msg.str());
  }
}

ChargeSolution BemSolver::solve(const Eigen::VectorXd& voltages) const {
  const ElectrodeMesh& m = *mesh_;
  if (voltages.size() != m.electrode_count()) {
    throw SolverError("BEM: expected " + std::to_string(m.electrode_count()) + " voltages");
  }
  Eigen::VectorXd rhs(m.panel_count());
  for (int i = 0; i < m.panel_count(); ++i) rhs[i] = voltages[m.electrode_of[i]];

  ChargeSolution s;
  s.mesh = mesh_;
  s.applied_voltages = voltages;
  s.condition_estimate = condition_;
  s.sigma = lu_.solve(rhs);
  s.residual = (apply_influence(m, s.sigma) - rhs).cwiseAbs().maxCoeff();
  const double scale = voltages.cwiseAbs().maxCoeff();
  if (s.residual > 1e-6 * scale) {
    std::ostringstream msg;
    msg << "BEM: boundary residual " << s.residual << " V exceeds tolerance (condition estimate "
        << condition_ << ")";
    throw SolverError(msg.str());
  }
  return s;
}

std::vector<BasisPotential> BemSolver::basis_potentials() const {
  const ElectrodeMesh& m = *mesh_;
  const int ne = m.electrode_count();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m.panel_count(), ne);
  for (int i = 0; i < m.panel_count(); ++i) rhs(i, m.electrode_of[i]) = 1.0;
  const Eigen::MatrixXd sigma = lu_.solve(rhs);
  const Eigen::MatrixXd residual = apply_influence(m, sigma) - rhs;

  std::vector<BasisPotential> out;
  out.reserve(ne);
  for (int e = 0; e < ne; ++e) {
    BasisPotential b;
    b.electrode = e;
    b.name = m.electrode_names[e];
    b.solution.mesh = mesh_;
    b.solution.sigma = sigma.col(e);
    b.solution.applied_voltages = Eigen::VectorXd::Unit(ne, e);
    b.solution.condition_estimate = condition_;
    b.solution.residual = residual.col(e).cwiseAbs().maxCoeff();
    if (b.solution.residual > 1e-6) {
      throw SolverError("BEM: basis residual too large for electrode " + b.name);
    }
    out.push_back(std::move(b));
  }
  return out;
}

ChargeSolution solve_charges(MeshPtr mesh, const Eigen::VectorXd& voltages) {
  return BemSolver(std::move(mesh)).solve(voltages);
}

std::vector<BasisPotential> basis_potentials(MeshPtr mesh) {
  return BemSolver(std::move(mesh)).basis_potentials();
}

FieldSample evaluate(const ChargeSolution& solution, const Vec3& point) {
  const ElectrodeMesh& m = *solution.mesh;
  FieldSample f;
  f.point = point;
  for (int j = 0; j < m.panel_count(); ++j) {
    const double s = solution.sigma[j];
    if (s == 0.0) continue;
    const PanelIntegral pi = panel_integral(m.panels[j], point);
    f.potential += s * pi.value;
    f.gradient += s * pi.gradient;
  }
  f.potential *= constants::coulomb_k;
  f.gradient *= constants::coulomb_k;
  f.near_surface = m.clearance(point) < 0.0;
  if (f.near_surface) {
    std::ostringstream msg;
    msg << "field point (" << point.x() << ", " << point.y() << ", " << point.z()
        << ") m is within one panel size of an electrode; accuracy degraded";
    warn(msg.str());
  }
  return f;
}

std::vector<FieldSample> evaluate(const ChargeSolution& solution,
                                  const std::vector<Vec3>& points) {
  std::vector<FieldSample> out(points.size());
  const int n = static_cast<int>(points.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) out[i] = evaluate(solution, points[i]);
  return out;
}

Eigen::MatrixXd evaluate_potentials(const ElectrodeMesh& mesh, const Eigen::MatrixXd& sigma,
                                    const std::vector<Vec3>& points) {
  if (sigma.rows() != mesh.panel_count()) {
    throw SolverError("evaluate_potentials: charge vector size does not match mesh");
  }
  const int np = static_cast<int>(points.size());
  Eigen::MatrixXd out(np, sigma.cols());
#pragma omp parallel
  {
    Eigen::RowVectorXd kernel(mesh.panel_count());
#pragma omp for schedule(dynamic, 4)
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < mesh.panel_count(); ++j) {
        kernel[j] = panel_integral(mesh.panels[j], points[i]).value;
      }
      out.row(i) = constants::coulomb_k * (kernel * sigma);
    }
  }
  return out;
}

ChargeSolution superpose(const std::vector<BasisPotential>& basis,
                         const Eigen::VectorXd& voltages) {
  if (basis.empty() || voltages.size() != static_cast<Eigen::Index>(basis.size())) {
    throw SolverError("superpose: one voltage per basis potential required");
  }
  ChargeSolution s = basis.front().solution;
  s.sigma.setZero();
  s.applied_voltages.setZero();
  s.residual = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double u = voltages[static_cast<Eigen::Index>(i)];
    s.sigma += u * basis[i].solution.sigma;
    s.applied_voltages += u * basis[i].solution.applied_voltages;
    s.residual += std::abs(u) * basis[i].solution.residual;
  }
  return s;
}

BasisPotential combine(const std::vector<BasisPotential>& basis, const std::vector<int>& members,
                       std::string name) {
  if (members.empty()) throw SolverError("combine: no members");
  BasisPotential out;
  out.name = std::move(name);
  out.solution = basis.at(members.front()).solution;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const auto& s = basis.at(members[i]).solution;
    out.solution.sigma += s.sigma;
    out.solution.applied_voltages += s.applied_voltages;
    out.solution.residual += s.residual;
  }
  return out;
}

std::vector<BasisPotential> segment_bases(const std::vector<BasisPotential>& electrode_basis) {
  if (electrode_basis.empty()) throw SolverError("segment_bases: empty basis");
  const ElectrodeMesh& m = *electrode_basis.front().solution.mesh;
  if (m.segment_electrodes.empty()) throw SolverError("segment_bases: mesh has no segments");
  std::vector<BasisPotential> out;
  for (std::size_t j = 0; j < m.segment_electrodes.size(); ++j) {
    const auto [top, bottom] = m.segment_electrodes[j];
    out.push_back(combine(electrode_basis, {top, bottom}, "SEG" + std::to_string(j + 1)));
  }
  return out;
}

AxialBasis axial_line_scan(const std::vector<BasisPotential>& basis,
                           const Eigen::VectorXd& x_grid) {
  if (basis.empty()) throw SolverError("axial_line_scan: empty basis");
  if (x_grid.size() < 4) throw SolverError("axial_line_scan: need at least 4 grid points");
  for (Eigen::Index i = 1; i < x_grid.size(); ++i) {
    if (!(x_grid[i] > x_grid[i - 1])) {
      throw SolverError("axial_line_scan: grid must be strictly increasing");
    }
  }
  const ElectrodeMesh& m = *basis.front().solution.mesh;
  Eigen::MatrixXd sigma(m.panel_count(), static_cast<Eigen::Index>(basis.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    if (basis[k].solution.mesh.get() != &m) {
      throw SolverError("axial_line_scan: basis potentials from different meshes");
    }
    sigma.col(static_cast<Eigen::Index>(k)) = basis[k].solution.sigma;
    names.push_back(basis[k].name);
  }
  std::vector<Vec3> points;
  points.reserve(x_grid.size());
  for (Eigen::Index i = 0; i < x_grid.size(); ++i) points.emplace_back(x_grid[i], 0.0, 0.0);
  return AxialBasis(x_grid, evaluate_potentials(m, sigma, points), std::move(names));
}

void write_axial_csv(std::ostream& out, const AxialBasis& basis) {
  out << "x_m";
  for (const auto& n : basis.names()) out << ",V_" << n;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < basis.grid().size(); ++i) {
    out << basis.grid()[i];
    for (Eigen::Index c = 0; c < basis.samples().cols(); ++c) out << ',' << basis.samples()(i, c);
    out << '\n';
  }
}

AxialBasis read_axial_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("axial CSV: empty input");
  std::vector<std::string> names;
  {
    std::stringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    if (cell != "x_m") throw ConfigError("axial CSV: first column must be x_m");
    while (std::getline(header, cell, ',')) {
      names.push_back(cell.rfind("V_", 0) == 0 ? cell.substr(2) : cell);
    }
  }
  std::vector<double> xs;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != names.size() + 1) throw ConfigError("axial CSV: ragged row");
    xs.push_back(values.front());
    rows.emplace_back(values.begin() + 1, values.end());
  }
  Eigen::VectorXd grid(static_cast<Eigen::Index>(xs.size()));
  Eigen::MatrixXd samples(grid.size(), static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    grid[i] = xs[i];
    for (Eigen::Index c = 0; c < samples.cols(); ++c) samples(i, c) = rows[i][c];
  }
  return AxialBasis(std::move(grid), std::move(samples), std::move(names));
}

}  // namespace ptrap
