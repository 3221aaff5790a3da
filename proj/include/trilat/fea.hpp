// Plane-stress FEA on Cartesian cell grids: bilinear quad elements of unit
// size, multiple weighted load cases, reduced free-DOF systems, grid-hierarchy
// restriction, and principal-stress extraction for orientation initialization.
//
// Grid conventions: cells (i,j) with i in [0,nx), j in [0,ny); node (i,j) at
// coordinate (i,j), y up; node index j*(nx+1)+i; element dofs ordered
// (ux,uy) per node over the CCW local nodes (i,j),(i+1,j),(i+1,j+1),(i,j+1).
#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <string>
#include <vector>

#include "trilat/rank3.hpp"

namespace trilat {

using SpMat = Eigen::SparseMatrix<double>;

// A concrete analysis problem on one grid.
struct GridProblem {
  std::string name;
  int nx = 0, ny = 0;
  std::vector<uint8_t> active;            // per cell
  std::vector<uint8_t> fixed_x, fixed_y;  // per node
  std::vector<Eigen::VectorXd> loads;     // per case, size 2*num_nodes
  std::vector<double> weights;            // per case, sums to 1
  double volume_budget = 0.5;
  double l_min = 0.1, l_max = 0.5;
  MaterialConstants material;

  int num_cells() const { return nx * ny; }
  int num_nodes() const { return (nx + 1) * (ny + 1); }
  int cell(int i, int j) const { return j * nx + i; }
  int node(int i, int j) const { return j * (nx + 1) + i; }
  int num_cases() const { return int(loads.size()); }
  int num_active() const;
  bool node_on_active_cell(int i, int j) const;
  void validate() const;  // throws ValidationError on inconsistent data
};

// Fine-grid problem description plus the coarsening factor to the sim grid.
struct ProblemSpec {
  GridProblem fine;
  int coarsening = 1;
  void validate() const;
};

// Full-weighting restriction of the fine problem onto the sim grid: loads via
// the transpose of bilinear interpolation (conserves per-case resultants),
// a coarse node component is fixed iff any fine node in its stencil is fixed,
// a coarse cell is active iff any covered fine cell is active.
GridProblem restrict_problem(const ProblemSpec& spec);

struct SolveResult {
  std::vector<Eigen::VectorXd> displacements;  // per case, full dof vectors
  std::vector<double> compliance_per_case;     // F_q . U_q
  double total_compliance = 0;                 // sum w_q F_q . U_q
  std::vector<double> residuals;               // relative, per case
  int iterations = 0;                          // iterative path only
};

enum class SolverKind { Auto, Direct, Pcg };

// 8x8 unit-square bilinear element stiffness, 2x2 Gauss.
Eigen::Matrix<double, 8, 8> element_stiffness(const ElasticityMatrix& s);

// Strain at the element centroid from a full displacement vector,
// engineering form (e11, e22, g12).
Eigen::Vector3d centroid_strain(const GridProblem& p, const Eigen::VectorXd& u, int ci, int cj);

// Quadrature-summed outer products of the element strains: G = sum_g w (B u)(B u)^T.
// The compliance derivative against any per-cell stiffness perturbation dS is
// then -<dS, G> without touching element matrices again.
Mat3 cell_strain_moment(const GridProblem& p, const Eigen::VectorXd& u, int ci, int cj);

// Repeated solves with a fixed problem structure: sparsity pattern and the
// symbolic factorization are built once, only numeric values change between
// calls. Inactive cells carry the soft-phase stiffness.
class StiffnessSolver {
 public:
  explicit StiffnessSolver(const GridProblem& p, SolverKind kind = SolverKind::Auto);
  ~StiffnessSolver();
  StiffnessSolver(StiffnessSolver&&) noexcept;

  // cell_s: stiffness per cell (all cells, row-major); inactive entries ignored.
  SolveResult solve(const std::vector<Mat3>& cell_s);
  int free_dofs() const;
  SolverKind chosen() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
SolveResult assemble_and_solve(const GridProblem& p, const std::vector<Mat3>& cell_s,
                               SolverKind kind = SolverKind::Auto);

struct PrincipalPair {
  double s1 = 0, s2 = 0;  // principal values, s1 >= s2
  double angle1 = 0;      // direction of s1; direction of s2 is angle1 + pi/2
};

struct StressSample {
  std::vector<std::vector<PrincipalPair>> per_case;  // [case][cell]
  std::vector<double> dominant;                      // theta_p per cell
  std::vector<double> theta3_init;                   // theta_p + pi/2
};

// Solid-domain stress analysis at element centroids; dominant direction picks
// the largest |principal value| over the 2M candidates per cell, ties broken
// toward the larger algebraic stress, then the smaller angle in [0, pi).
StressSample principal_stress_init(const GridProblem& p);

}  // namespace trilat
