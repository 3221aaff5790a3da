#include "trilat/fea.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace trilat {

namespace {

// Shape function gradients of the unit-square bilinear element at (x,y):
// N0=(1-x)(1-y), N1=x(1-y), N2=xy, N3=(1-x)y.
Eigen::Matrix<double, 3, 8> strain_matrix(double x, double y) {
  double dndx[4] = {-(1 - y), (1 - y), y, -y};
  double dndy[4] = {-(1 - x), -x, x, (1 - x)};
  Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
  for (int n = 0; n < 4; ++n) {
    b(0, 2 * n) = dndx[n];
    b(1, 2 * n + 1) = dndy[n];
    b(2, 2 * n) = dndy[n];
    b(2, 2 * n + 1) = dndx[n];
  }
  return b;
}

struct Quadrature {
  Eigen::Matrix<double, 3, 8> b[4];
  Eigen::Matrix<double, 3, 8> centroid;
  Quadrature() {
    const double g = 0.5 / std::sqrt(3.0);
    const double pts[2] = {0.5 - g, 0.5 + g};
    int k = 0;
    for (double y : pts)
      for (double x : pts) b[k++] = strain_matrix(x, y);
    centroid = strain_matrix(0.5, 0.5);
  }
};

const Quadrature& quad() {
  static const Quadrature q;
  return q;
}

void element_dofs(const GridProblem& p, int ci, int cj, int out[8]) {
  int n[4] = {p.node(ci, cj), p.node(ci + 1, cj), p.node(ci + 1, cj + 1), p.node(ci, cj + 1)};
  for (int k = 0; k < 4; ++k) {
    out[2 * k] = 2 * n[k];
    out[2 * k + 1] = 2 * n[k] + 1;
  }
}

}  // namespace

int GridProblem::num_active() const {
  int n = 0;
  for (uint8_t a : active) n += a ? 1 : 0;
  return n;
}

bool GridProblem::node_on_active_cell(int i, int j) const {
  for (int dj = -1; dj <= 0; ++dj)
    for (int di = -1; di <= 0; ++di) {
      int ci = i + di, cj = j + dj;
      if (ci >= 0 && ci < nx && cj >= 0 && cj < ny && active[cell(ci, cj)]) return true;
    }
  return false;
}

void GridProblem::validate() const {
  if (nx < 1 || ny < 1) throw ValidationError("problem: resolution must be at least 1x1");
  if (int(active.size()) != num_cells()) throw ValidationError("problem: mask size mismatch");
  if (int(fixed_x.size()) != num_nodes() || int(fixed_y.size()) != num_nodes())
    throw ValidationError("problem: fixation array size mismatch");
  if (loads.empty()) throw ValidationError("problem: need at least one load case");
  if (weights.size() != loads.size())
    throw ValidationError("problem: case weight count mismatch");
  double wsum = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw ValidationError("problem: negative case weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ValidationError("problem: case weights must sum to 1");
  if (!(volume_budget > 0 && volume_budget < 1))
    throw ValidationError("problem: volume budget must be in (0,1)");
  if (!(l_min > 0 && l_min <= l_max && l_max <= 1.0))
    throw ValidationError("problem: need 0 < l_min <= l_max <= 1");
  if (!(material.e_plus > 0) || !(material.e_minus >= 0) ||
      !(material.e_minus < material.e_plus) || !(std::abs(material.v0) < 0.5))
    throw ValidationError("problem: bad material constants");
  if (num_active() == 0) throw ValidationError("problem: no active cells");

  bool any_fixed = false;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      int n = node(i, j);
      if (fixed_x[n] || fixed_y[n]) {
        any_fixed = true;
        if (!node_on_active_cell(i, j))
          throw ValidationError("problem: fixation node not on an active cell");
      }
    }
  if (!any_fixed) throw ValidationError("problem: no fixations");

  for (const auto& f : loads) {
    if (f.size() != 2 * num_nodes()) throw ValidationError("problem: load vector size mismatch");
    bool any = false;
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        int n = node(i, j);
        if (f[2 * n] != 0 || f[2 * n + 1] != 0) {
          if (!node_on_active_cell(i, j))
            throw ValidationError("problem: load node not on an active cell");
          any = true;
        }
      }
    if (!any) throw ValidationError("problem: load case with no forces");
  }
}

void ProblemSpec::validate() const {
  fine.validate();
  if (coarsening < 1) throw ValidationError("problem: coarsening factor must be >= 1");
  if (fine.nx % coarsening || fine.ny % coarsening)
    throw ValidationError("problem: coarsening factor must divide the resolution");
}

GridProblem restrict_problem(const ProblemSpec& spec) {
  spec.validate();
  const GridProblem& f = spec.fine;
  const int cf = spec.coarsening;
  GridProblem c;
  c.name = f.name;
  c.nx = f.nx / cf;
  c.ny = f.ny / cf;
  c.active.assign(c.num_cells(), 0);
  c.fixed_x.assign(c.num_nodes(), 0);
  c.fixed_y.assign(c.num_nodes(), 0);
  c.weights = f.weights;
  c.volume_budget = f.volume_budget;
  c.l_min = f.l_min;
  c.l_max = f.l_max;
  c.material = f.material;

  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      if (f.active[f.cell(i, j)]) c.active[c.cell(i / cf, j / cf)] = 1;

  // a coarse node is fixed iff any fine node in its bilinear stencil is fixed
  for (int j = 0; j <= f.ny; ++j)
    for (int i = 0; i <= f.nx; ++i) {
      int n = f.node(i, j);
      if (!f.fixed_x[n] && !f.fixed_y[n]) continue;
      for (int cj = std::max(0, j / cf - 1); cj <= std::min(c.ny, j / cf + 1); ++cj)
        for (int ci = std::max(0, i / cf - 1); ci <= std::min(c.nx, i / cf + 1); ++ci) {
          if (std::abs(i - cf * ci) < cf && std::abs(j - cf * cj) < cf) {
            int m = c.node(ci, cj);
            if (f.fixed_x[n]) c.fixed_x[m] = 1;
            if (f.fixed_y[n]) c.fixed_y[m] = 1;
          }
        }
    }

  // loads: transpose of bilinear interpolation, exact force conservation
  for (const auto& fl : f.loads) {
    Eigen::VectorXd cl = Eigen::VectorXd::Zero(2 * c.num_nodes());
    for (int j = 0; j <= f.ny; ++j)
      for (int i = 0; i <= f.nx; ++i) {
        int n = f.node(i, j);
        double fx = fl[2 * n], fy = fl[2 * n + 1];
        if (fx == 0 && fy == 0) continue;
        int I0 = i / cf, J0 = j / cf;
        double tx = double(i - I0 * cf) / cf, ty = double(j - J0 * cf) / cf;
        for (int dj = 0; dj < 2; ++dj) {
          double wy = dj ? ty : 1 - ty;
          if (wy == 0) continue;
          for (int di = 0; di < 2; ++di) {
            double wx = di ? tx : 1 - tx;
            if (wx == 0) continue;
            int m = c.node(I0 + di, J0 + dj);
            cl[2 * m] += wx * wy * fx;
            cl[2 * m + 1] += wx * wy * fy;
          }
        }
      }
    c.loads.push_back(std::move(cl));
  }
  c.validate();
  return c;
}

Eigen::Matrix<double, 8, 8> element_stiffness(const ElasticityMatrix& s) {
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  for (int g = 0; g < 4; ++g) k += 0.25 * quad().b[g].transpose() * s * quad().b[g];
  return k;
}

Eigen::Vector3d centroid_strain(const GridProblem& p, const Eigen::VectorXd& u, int ci, int cj) {
  int dofs[8];
  element_dofs(p, ci, cj, dofs);
  Eigen::Matrix<double, 8, 1> ue;
  for (int k = 0; k < 8; ++k) ue[k] = u[dofs[k]];
  return quad().centroid * ue;
}

Mat3 cell_strain_moment(const GridProblem& p, const Eigen::VectorXd& u, int ci, int cj) {
  int dofs[8];
  element_dofs(p, ci, cj, dofs);
  Eigen::Matrix<double, 8, 1> ue;
  for (int k = 0; k < 8; ++k) ue[k] = u[dofs[k]];
  Mat3 g = Mat3::Zero();
  for (int q = 0; q < 4; ++q) {
    Eigen::Vector3d e = quad().b[q] * ue;
    g += 0.25 * e * e.transpose();
  }
  return g;
}

struct StiffnessSolver::Impl {
  const GridProblem& p;
  SolverKind kind;
  std::vector<int> dof_map;  // full dof -> free index or -1
  int nfree = 0;
  SpMat K;
  std::vector<int> slots;  // 64 per cell, index into K value array or -1
  Mat3 soft;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;

  explicit Impl(const GridProblem& prob, SolverKind k) : p(prob), kind(k) {
    p.validate();
    soft = hooke_plane_stress(p.material.e_minus, p.material.v0);

    dof_map.assign(2 * p.num_nodes(), -1);
    for (int j = 0; j <= p.ny; ++j)
      for (int i = 0; i <= p.nx; ++i) {
        int n = p.node(i, j);
        if (!p.fixed_x[n]) dof_map[2 * n] = nfree++;
        if (!p.fixed_y[n]) dof_map[2 * n + 1] = nfree++;
      }
    // measured on one core: LDLT beats diagonal-PCG ~8x at 5.6e5 dofs and
    // peaks near 2.4 GB at 1.26e6 dofs, so stay direct until memory bites
    if (kind == SolverKind::Auto)
      kind = nfree <= 1300000 ? SolverKind::Direct : SolverKind::Pcg;

    // pattern with dummy values, then per-cell slot table
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(p.num_cells()) * 36);
    int dofs[8];
    for (int cj = 0; cj < p.ny; ++cj)
      for (int ci = 0; ci < p.nx; ++ci) {
        element_dofs(p, ci, cj, dofs);
        for (int a = 0; a < 8; ++a) {
          int ra = dof_map[dofs[a]];
          if (ra < 0) continue;
          for (int b = 0; b < 8; ++b) {
            int cb = dof_map[dofs[b]];
            if (cb >= 0) trips.emplace_back(ra, cb, 0.0);
          }
        }
      }
    K.resize(nfree, nfree);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    trips.clear();
    trips.shrink_to_fit();

    slots.assign(size_t(p.num_cells()) * 64, -1);
    const int* outer = K.outerIndexPtr();
    const int* inner = K.innerIndexPtr();
    for (int cj = 0; cj < p.ny; ++cj)
      for (int ci = 0; ci < p.nx; ++ci) {
        element_dofs(p, ci, cj, dofs);
        size_t base = size_t(p.cell(ci, cj)) * 64;
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b) {
            int ra = dof_map[dofs[a]], cb = dof_map[dofs[b]];
            if (ra < 0 || cb < 0) continue;
            const int* lo = inner + outer[cb];
            const int* hi = inner + outer[cb + 1];
            const int* it = std::lower_bound(lo, hi, ra);
            slots[base + a * 8 + b] = int(it - inner);
          }
      }
  }

  SolveResult run(const std::vector<Mat3>& cell_s) {
    if (int(cell_s.size()) != p.num_cells())
      throw ValidationError("fea: stiffness field size mismatch");
    double* vals = K.valuePtr();
    std::fill(vals, vals + K.nonZeros(), 0.0);
    for (int cj = 0; cj < p.ny; ++cj)
      for (int ci = 0; ci < p.nx; ++ci) {
        int c = p.cell(ci, cj);
        Eigen::Matrix<double, 8, 8> ke =
            element_stiffness(p.active[c] ? cell_s[c] : soft);
        size_t base = size_t(c) * 64;
        for (int e = 0; e < 64; ++e) {
          int s = slots[base + e];
          if (s >= 0) vals[s] += ke(e / 8, e % 8);
        }
      }

    SolveResult out;
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>> cg;
    if (kind == SolverKind::Pcg) {
      cg.setTolerance(1e-8);
      cg.setMaxIterations(60000);
      cg.compute(K);
    } else {
      if (!analyzed) {
        ldlt.analyzePattern(K);
        analyzed = true;
      }
      ldlt.factorize(K);
      if (ldlt.info() != Eigen::Success)
        throw NumericalError("fea: factorization failed (fixations leave rigid modes?)");
    }

    for (size_t q = 0; q < p.loads.size(); ++q) {
      Eigen::VectorXd f(nfree);
      for (int d = 0; d < 2 * p.num_nodes(); ++d)
        if (dof_map[d] >= 0) f[dof_map[d]] = p.loads[q][d];
      auto solve_once = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
        if (kind == SolverKind::Pcg) {
          Eigen::VectorXd x = cg.solve(rhs);
          out.iterations = std::max(out.iterations, int(cg.iterations()));
          if (cg.info() != Eigen::Success)
            throw NumericalError("fea: conjugate gradient did not converge within the iteration cap");
          return x;
        }
        return ldlt.solve(rhs);
      };
      Eigen::VectorXd u = solve_once(f);
      double fn = f.norm();
      auto rel_res = [&] { return fn > 0 ? (K * u - f).norm() / fn : 0.0; };
      double res = rel_res();
      if (res > 1e-8) {  // one refinement pass recovers headroom on big grids
        u += solve_once(Eigen::VectorXd(f - K * u));
        res = rel_res();
      }
      if (!(res <= 1e-8))
        throw NumericalError("fea: solve residual " + fmt_g17(res) + " exceeds 1e-8");
      out.residuals.push_back(res);

      Eigen::VectorXd full = Eigen::VectorXd::Zero(2 * p.num_nodes());
      for (int d = 0; d < 2 * p.num_nodes(); ++d)
        if (dof_map[d] >= 0) full[d] = u[dof_map[d]];
      double c = p.loads[q].dot(full);
      if (!(c > 0)) throw NumericalError("fea: nonpositive compliance in case " + std::to_string(q));
      out.compliance_per_case.push_back(c);
      out.total_compliance += p.weights[q] * c;
      out.displacements.push_back(std::move(full));
    }
    return out;
  }
};

StiffnessSolver::StiffnessSolver(const GridProblem& p, SolverKind kind)
    : impl_(std::make_unique<Impl>(p, kind)) {}
StiffnessSolver::~StiffnessSolver() = default;
StiffnessSolver::StiffnessSolver(StiffnessSolver&&) noexcept = default;
SolveResult StiffnessSolver::solve(const std::vector<Mat3>& cell_s) { return impl_->run(cell_s); }
int StiffnessSolver::free_dofs() const { return impl_->nfree; }
SolverKind StiffnessSolver::chosen() const { return impl_->kind; }

SolveResult assemble_and_solve(const GridProblem& p, const std::vector<Mat3>& cell_s,
                               SolverKind kind) {
  StiffnessSolver s(p, kind);
  return s.solve(cell_s);
}

StressSample principal_stress_init(const GridProblem& p) {
  p.validate();
  Mat3 solid = hooke_plane_stress(p.material.e_plus, p.material.v0);
  std::vector<Mat3> field(p.num_cells(), solid);
  SolveResult r = assemble_and_solve(p, field);

  StressSample out;
  const int m = p.num_cases();
  out.per_case.assign(m, std::vector<PrincipalPair>(p.num_cells()));
  out.dominant.assign(p.num_cells(), 0.0);
  out.theta3_init.assign(p.num_cells(), 0.0);

  Mat3 soft = hooke_plane_stress(p.material.e_minus, p.material.v0);
  for (int cj = 0; cj < p.ny; ++cj)
    for (int ci = 0; ci < p.nx; ++ci) {
      int c = p.cell(ci, cj);
      const Mat3& s = p.active[c] ? solid : soft;
      for (int q = 0; q < m; ++q) {
        Eigen::Vector3d sig = s * centroid_strain(p, r.displacements[q], ci, cj);
        double mean = 0.5 * (sig[0] + sig[1]);
        double dx = 0.5 * (sig[0] - sig[1]);
        double rad = std::hypot(dx, sig[2]);
        PrincipalPair pp;
        pp.s1 = mean + rad;
        pp.s2 = mean - rad;
        pp.angle1 = 0.5 * std::atan2(2.0 * sig[2], sig[0] - sig[1]);
        out.per_case[q][c] = pp;
      }

      // dominant candidate over 2M (value, angle) pairs
      double max_abs = 0;
      for (int q = 0; q < m; ++q) {
        max_abs = std::max(max_abs, std::abs(out.per_case[q][c].s1));
        max_abs = std::max(max_abs, std::abs(out.per_case[q][c].s2));
      }
      const double tol = 1e-9 * std::max(1.0, max_abs);
      double best_val = -std::numeric_limits<double>::infinity();
      for (int q = 0; q < m; ++q) {
        const auto& pp = out.per_case[q][c];
        if (std::abs(pp.s1) >= max_abs - tol) best_val = std::max(best_val, pp.s1);
        if (std::abs(pp.s2) >= max_abs - tol) best_val = std::max(best_val, pp.s2);
      }
      double best_angle = std::numeric_limits<double>::infinity();
      for (int q = 0; q < m; ++q) {
        const auto& pp = out.per_case[q][c];
        if (std::abs(pp.s1) >= max_abs - tol && pp.s1 >= best_val - tol)
          best_angle = std::min(best_angle, wrap_angle(pp.angle1, kPi));
        if (std::abs(pp.s2) >= max_abs - tol && pp.s2 >= best_val - tol)
          best_angle = std::min(best_angle, wrap_angle(pp.angle1 + kPi / 2, kPi));
      }
      out.dominant[c] = best_angle;
      out.theta3_init[c] = best_angle + kPi / 2;
    }
  return out;
}

}  // namespace trilat
