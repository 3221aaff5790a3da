#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "trilat/fea.hpp"

namespace trilat {

// Per-iteration record of compliance, orientation penalty, the combined
// objective W*C/C* + (1-W)*P/P*, and the mean filtered density.
struct HistoryEntry {
  double compliance = 0;
  double penalty = 0;
  double objective = 0;
  double volume = 0;
};

// Raw (unfiltered) design variables on the sim grid. Inactive cells carry
// placeholder values and are excluded from every sum. In free-orientation
// mode each cell owns three independent layer-normal angles instead of the
// single theta3 that generates the equilateral triple.
struct DesignField {
  int nx = 0, ny = 0;
  std::vector<uint8_t> active;
  std::vector<LaminateSpec> cells;
  bool free_orientations = false;
  std::vector<std::array<double, 3>> normals;  // used only in free mode
  int iterations = 0;
  std::vector<HistoryEntry> history;

  int num_cells() const { return nx * ny; }
  int cell(int i, int j) const { return j * nx + i; }
  void validate(const GridProblem& sim) const;
};

// Cone-weighted neighborhood average over active cells, renormalized at mask
// edges. Radius in cell widths; radius < 1 reduces to the identity.
class ConeFilter {
 public:
  ConeFilter(int nx, int ny, const std::vector<uint8_t>& active, double radius);

  // phys_k = sum_j w_kj raw_j / sum_j w_kj
  std::vector<double> apply(const std::vector<double>& raw) const;
  // chain rule: grad_raw = H^T grad_phys (same normalization as apply)
  std::vector<double> backprop(const std::vector<double>& grad_phys) const;

 private:
  int n_ = 0;
  std::vector<int> offsets_;      // CSR layout over cells
  std::vector<int> neighbor_;
  std::vector<double> weight_;    // already divided by the row sum
};

DesignField filter_fields(const DesignField& design, double radius);

// Orientation regularization: over ordered pairs of edge-adjacent active
// cells, penalty 1/2 - 1/2 cos(6 (theta_i - theta_j)); zero exactly at
// multiples of pi/3, one at odd multiples of pi/6.
struct RegularizationReport {
  double total = 0;
  // undirected edges (a < b) with the per-ordered-pair value in [0, 1]
  struct Edge {
    int a, b;
    double value;
  };
  std::vector<Edge> edges;
  std::vector<double> grad;  // dP/dtheta per cell (ordered-pair convention)
};
RegularizationReport regularization(int nx, int ny, const std::vector<uint8_t>& active,
                                    const std::vector<double>& theta);
RegularizationReport regularization(const DesignField& design);

double objective(double compliance, double penalty, double c_star, double p_star, double weight);

// One optimality-criteria step on the width variables of `design` (raw
// values). Sensitivities are with respect to the raw variables (already
// back-propagated through the filter); the volume constraint is evaluated on
// the filtered field and enforced by bisection on the multiplier.
void oc_update_widths(DesignField& design, const ConeFilter& filter,
                      const std::vector<std::array<double, 3>>& dc_dalpha_raw,
                      double volume_budget, double l_min, double l_max, double move = 0.01);

// Mean filtered lattice density over active cells.
double filtered_volume(const DesignField& design, const ConeFilter& filter);

// Single-block MMA for the orientation variables: no constraint rows, box
// [-4pi, 4pi], per-iteration move limit. Holds asymptote state across calls.
class MmaStepper {
 public:
  MmaStepper(int num_vars, double move, double box_lo = -4 * kPi, double box_hi = 4 * kPi);
  // one update of x given the objective gradient at x
  void step(std::vector<double>& x, const std::vector<double>& grad);
  int iteration() const { return iter_; }

 private:
  int n_, iter_ = 0;
  double move_, lo_, hi_;
  std::vector<double> xold1_, xold2_, low_, upp_;
};

struct OptimizerConfig {
  std::string init = "stress";  // "uniform" or "stress"
  double weight = 0.5;          // W in (0, 1]
  int max_iter = 300;
  double filter_radius = 2.0;
  double move_width = 0.01;
  double move_theta = kPi / 180;
  bool free_orientations = false;
  SolverKind solver = SolverKind::Auto;
  bool log = false;  // one line per iteration on stderr
  // observer called after each iteration with the raw design and the mean
  // filtered density; not serialized
  std::function<void(int iter, const DesignField& raw, double volume)> on_iteration;
};

// Gradients of the composite objective with respect to the raw variables,
// back-propagated through the filter. `theta` holds one value per cell in
// restricted mode and three consecutive blocks in free mode. Compliance-only
// width gradients are kept separate because the width update needs them
// unscaled.
struct ObjectiveGradients {
  std::vector<std::array<double, 3>> compliance_alpha;  // dC/d(raw alpha_n)
  std::vector<double> theta;                            // dO/d(raw theta)
};
ObjectiveGradients objective_gradients(const GridProblem& sim, const ConeFilter& filter,
                                       const DesignField& phys, const SolveResult& solve,
                                       double c_star, double p_star, double weight);

struct OptimizeOutcome {
  DesignField design;    // raw variables, history filled
  GridProblem sim;       // restricted problem the run used
  double c_star = 0;     // compliance normalizer (initial design)
  double p_star = 0;     // penalty normalizer (initial design)
  double c_final = 0;    // compliance of the final filtered design
  double p_final = 0;
  double volume = 0;     // mean filtered density, final
};

OptimizeOutcome run_optimization(const ProblemSpec& problem, const OptimizerConfig& config);

// Checkpoint text format ("trilat-checkpoint 1"): grid dims, config echo,
// normalizers, per-cell raw variables, history. Round-trips byte-exactly.
void save_checkpoint(const std::string& path, const OptimizeOutcome& outcome,
                     const OptimizerConfig& config);
struct Checkpoint {
  OptimizeOutcome outcome;
  OptimizerConfig config;
};
Checkpoint load_checkpoint(const std::string& path, const ProblemSpec& problem);

}  // namespace trilat
