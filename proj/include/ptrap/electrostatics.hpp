#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptrap/axial_basis.hpp"
#include "ptrap/geometry.hpp"

namespace ptrap {

using MeshPtr = std::shared_ptr<const ElectrodeMesh>;

/// Surface charge density per panel for one set of electrode voltages.
struct ChargeSolution {
  MeshPtr mesh;
  Eigen::VectorXd sigma;             // C/m^2, per panel
  Eigen::VectorXd applied_voltages;  // V, per electrode
  double condition_estimate = 0.0;   // 1-norm estimate of the influence matrix
  double residual = 0.0;             // max |phi(centroid) - V|, V

  /// Total charge on one electrode, C.
  double electrode_charge(int electrode) const;
};

/// Solution for unit voltage on one electrode, zero on the others.
struct BasisPotential {
  int electrode = -1;  // -1 for combined groups
  std::string name;
  ChargeSolution solution;
};

struct FieldSample {
  Vec3 point = Vec3::Zero();
  double potential = 0.0;          // V
  Vec3 gradient = Vec3::Zero();    // V/m
  bool near_surface = false;       // closer than one panel size to a panel
};

/// A(i, j): potential at the centroid of panel i from unit charge density on
/// panel j, V per (C/m^2), symmetrized so that diag(area) * A is symmetric.
Eigen::MatrixXd assemble_influence_matrix(const ElectrodeMesh& mesh);

/// A * x for the matrix of assemble_influence_matrix, recomputing the entries
/// instead of storing them. Rows of x are panels, columns right-hand sides.
Eigen::MatrixXd apply_influence(const ElectrodeMesh& mesh, const Eigen::MatrixXd& x);

/// Dense LU of the influence matrix, reused across right-hand sides. The
/// factorization overwrites the only stored copy of the matrix, so residuals
/// are checked with apply_influence.
class BemSolver {
 public:
  explicit BemSolver(MeshPtr mesh);
  BemSolver(const BemSolver&) = delete;
  BemSolver& operator=(const BemSolver&) = delete;

  const ElectrodeMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  double condition_estimate() const { return condition_; }

  /// Throws SolverError when the boundary residual exceeds 1e-6 max|V|.
  ChargeSolution solve(const Eigen::VectorXd& voltages) const;

  /// One unit-voltage solution per electrode, from a single multi-RHS solve.
  std::vector<BasisPotential> basis_potentials() const;

 private:
  MeshPtr mesh_;
  Eigen::MatrixXd factors_;
  Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu_;
  double condition_ = 0.0;
};

ChargeSolution solve_charges(MeshPtr mesh, const Eigen::VectorXd& voltages);
std::vector<BasisPotential> basis_potentials(MeshPtr mesh);

/// Potential and gradient by summing exact panel integrals. Points closer
/// than one panel size to a surface are flagged and a warning is logged.
std::vector<FieldSample> evaluate(const ChargeSolution& solution, const std::vector<Vec3>& points);
FieldSample evaluate(const ChargeSolution& solution, const Vec3& point);

/// Potentials of several charge vectors (columns of `sigma`) at many points:
/// result(p, k) is the potential at point p of column k.
Eigen::MatrixXd evaluate_potentials(const ElectrodeMesh& mesh, const Eigen::MatrixXd& sigma,
                                    const std::vector<Vec3>& points);

/// Voltage-weighted superposition of basis potentials.
ChargeSolution superpose(const std::vector<BasisPotential>& basis, const Eigen::VectorXd& voltages);

/// Sum of several basis potentials, e.g. the top/bottom pair of one segment.
BasisPotential combine(const std::vector<BasisPotential>& basis, const std::vector<int>& members,
                       std::string name);

/// Segment-level bases of a trap mesh (top and bottom DC of each segment
/// driven together), named SEG1..SEGn.
std::vector<BasisPotential> segment_bases(const std::vector<BasisPotential>& electrode_basis);

/// V_i(x) on the line y = z = 0. The grid must be strictly increasing.
AxialBasis axial_line_scan(const std::vector<BasisPotential>& basis, const Eigen::VectorXd& x_grid);

/// Columns: x_m, then one column per electrode.
void write_axial_csv(std::ostream& out, const AxialBasis& basis);
AxialBasis read_axial_csv(std::istream& in);

}  // namespace ptrap
