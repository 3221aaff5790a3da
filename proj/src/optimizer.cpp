#include "trilat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace trilat {

void DesignField::validate(const GridProblem& sim) const {
  if (nx != sim.nx || ny != sim.ny) throw ValidationError("design: grid mismatch");
  if (int(active.size()) != num_cells() || active != sim.active)
    throw ValidationError("design: active mask mismatch");
  if (int(cells.size()) != num_cells()) throw ValidationError("design: cell count mismatch");
  if (free_orientations && int(normals.size()) != num_cells())
    throw ValidationError("design: missing free-orientation angles");
  for (int c = 0; c < num_cells(); ++c) {
    if (!active[c]) continue;
    for (double a : cells[c].alpha)
      if (!(a >= sim.l_min - 1e-12 && a <= sim.l_max + 1e-12))
        throw ValidationError("design: width outside bounds");
    if (!(std::abs(cells[c].theta3) <= 4 * kPi + 1e-12))
      throw ValidationError("design: orientation outside box");
  }
}

ConeFilter::ConeFilter(int nx, int ny, const std::vector<uint8_t>& active, double radius) {
  n_ = nx * ny;
  if (int(active.size()) != n_) throw ValidationError("filter: mask size mismatch");
  offsets_.assign(n_ + 1, 0);
  int reach = std::max(0, int(std::ceil(radius)) - 1);
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        int c = j * nx + i;
        if (!active[c]) {
          if (pass == 0) offsets_[c + 1] = offsets_[c];
          continue;
        }
        int count = 0;
        double row_sum = 0;
        if (pass == 1)
          for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) row_sum += weight_[k];
        for (int dj = -reach; dj <= reach; ++dj)
          for (int di = -reach; di <= reach; ++di) {
            int ii = i + di, jj = j + dj;
            if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;
            int nb = jj * nx + ii;
            if (!active[nb]) continue;
            double w = radius - std::hypot(double(di), double(dj));
            if (w <= 1e-12) continue;
            if (pass == 0) {
              ++count;
            } else {
              neighbor_[offsets_[c] + count] = nb;
              weight_[offsets_[c] + count] = w;
              ++count;
            }
          }
        if (pass == 0) {
          if (count == 0) {  // radius < 1: keep the cell itself
            count = 1;
          }
          offsets_[c + 1] = offsets_[c] + count;
        } else {
          if (offsets_[c + 1] - offsets_[c] == 1 && count == 0) {
            neighbor_[offsets_[c]] = c;
            weight_[offsets_[c]] = 1.0;
            count = 1;
          }
          double sum = 0;
          for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) sum += weight_[k];
          for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) weight_[k] /= sum;
        }
      }
    if (pass == 0) {
      neighbor_.assign(offsets_[n_], 0);
      weight_.assign(offsets_[n_], 0.0);
    }
  }
}

std::vector<double> ConeFilter::apply(const std::vector<double>& raw) const {
  if (int(raw.size()) != n_) throw ValidationError("filter: field size mismatch");
  std::vector<double> out(n_, 0.0);
  for (int c = 0; c < n_; ++c) {
    double acc = 0;
    for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) acc += weight_[k] * raw[neighbor_[k]];
    out[c] = acc;
  }
  return out;
}

std::vector<double> ConeFilter::backprop(const std::vector<double>& grad_phys) const {
  if (int(grad_phys.size()) != n_) throw ValidationError("filter: field size mismatch");
  std::vector<double> out(n_, 0.0);
  for (int c = 0; c < n_; ++c) {
    double g = grad_phys[c];
    if (g == 0) continue;
    for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) out[neighbor_[k]] += weight_[k] * g;
  }
  return out;
}

namespace {

// gather/scatter between DesignField cells and flat per-variable arrays
std::vector<double> extract(const DesignField& d, int var) {
  std::vector<double> out(d.num_cells(), 0.0);
  for (int c = 0; c < d.num_cells(); ++c) {
    if (!d.active[c]) continue;
    if (var < 3)
      out[c] = d.cells[c].alpha[var];
    else if (var == 3)
      out[c] = d.cells[c].theta3;
    else
      out[c] = d.normals[c][var - 4];
  }
  return out;
}

void insert(DesignField& d, int var, const std::vector<double>& field) {
  for (int c = 0; c < d.num_cells(); ++c) {
    if (!d.active[c]) continue;
    if (var < 3)
      d.cells[c].alpha[var] = field[c];
    else if (var == 3)
      d.cells[c].theta3 = field[c];
    else
      d.normals[c][var - 4] = field[c];
  }
}

}  // namespace

DesignField filter_fields(const DesignField& design, double radius) {
  ConeFilter filter(design.nx, design.ny, design.active, radius);
  DesignField out = design;
  int nvar = design.free_orientations ? 7 : 4;
  for (int v = 0; v < nvar; ++v) {
    if (design.free_orientations && v == 3) continue;
    insert(out, v, filter.apply(extract(design, v)));
  }
  return out;
}

RegularizationReport regularization(int nx, int ny, const std::vector<uint8_t>& active,
                                    const std::vector<double>& theta) {
  if (int(active.size()) != nx * ny || int(theta.size()) != nx * ny)
    throw ValidationError("regularization: field size mismatch");
  RegularizationReport rep;
  rep.grad.assign(nx * ny, 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int c = j * nx + i;
      if (!active[c]) continue;
      for (int nb : {i + 1 < nx ? c + 1 : -1, j + 1 < ny ? c + nx : -1}) {
        if (nb < 0 || !active[nb]) continue;
        double d = theta[c] - theta[nb];
        double value = 0.5 - 0.5 * std::cos(6.0 * d);  // per ordered pair
        rep.edges.push_back({c, nb, value});
        rep.total += 2.0 * value;  // the sum runs over both orderings
        double g = 6.0 * std::sin(6.0 * d);
        rep.grad[c] += g;
        rep.grad[nb] -= g;
      }
    }
  return rep;
}

RegularizationReport regularization(const DesignField& design) {
  return regularization(design.nx, design.ny, design.active, extract(design, 3));
}

double objective(double compliance, double penalty, double c_star, double p_star, double weight) {
  if (!(weight > 0 && weight <= 1)) throw ValidationError("objective: weight must be in (0, 1]");
  if (!(c_star > 0)) throw ValidationError("objective: compliance normalizer must be positive");
  if (weight == 1.0) return compliance / c_star;
  if (p_star == 0)
    throw ValidationError(
        "objective: initial orientation penalty is zero (uniform initialization); "
        "regularization cannot be normalized, rerun with weight 1");
  return weight * compliance / c_star + (1.0 - weight) * penalty / p_star;
}

double filtered_volume(const DesignField& design, const ConeFilter& filter) {
  std::vector<double> a0 = filter.apply(extract(design, 0));
  std::vector<double> a1 = filter.apply(extract(design, 1));
  std::vector<double> a2 = filter.apply(extract(design, 2));
  double sum = 0;
  int count = 0;
  for (int c = 0; c < design.num_cells(); ++c) {
    if (!design.active[c]) continue;
    sum += volume_fraction({a0[c], a1[c], a2[c]});
    ++count;
  }
  return count ? sum / count : 0.0;
}

void oc_update_widths(DesignField& design, const ConeFilter& filter,
                      const std::vector<std::array<double, 3>>& dc_dalpha_raw,
                      double volume_budget, double l_min, double l_max, double move) {
  int n = design.num_cells();
  if (int(dc_dalpha_raw.size()) != n) throw ValidationError("oc: sensitivity size mismatch");

  std::array<std::vector<double>, 3> x, xnew;
  for (int v = 0; v < 3; ++v) x[v] = extract(design, v);

  // volume gradient w.r.t. raw widths, through the filter
  std::array<std::vector<double>, 3> dv;
  {
    std::array<std::vector<double>, 3> phys;
    for (int v = 0; v < 3; ++v) phys[v] = filter.apply(x[v]);
    int count = 0;
    for (int c = 0; c < n; ++c) count += design.active[c] ? 1 : 0;
    std::array<std::vector<double>, 3> dv_phys;
    for (int v = 0; v < 3; ++v) dv_phys[v].assign(n, 0.0);
    for (int c = 0; c < n; ++c) {
      if (!design.active[c]) continue;
      std::array<double, 3> g = volume_fraction_grad({phys[0][c], phys[1][c], phys[2][c]});
      for (int v = 0; v < 3; ++v) dv_phys[v][c] = g[v] / count;
    }
    for (int v = 0; v < 3; ++v) dv[v] = filter.backprop(dv_phys[v]);
  }

  auto try_lambda = [&](double lambda) {
    for (int v = 0; v < 3; ++v) xnew[v] = x[v];
    for (int c = 0; c < n; ++c) {
      if (!design.active[c]) continue;
      for (int v = 0; v < 3; ++v) {
        double dc = std::min(dc_dalpha_raw[c][v], -1e-12);  // compliance must not grow with width
        double dvol = std::max(dv[v][c], 1e-300);
        double cand = x[v][c] * std::sqrt(-dc / (lambda * dvol));
        cand = std::clamp(cand, x[v][c] - move, x[v][c] + move);
        xnew[v][c] = std::clamp(cand, l_min, l_max);
      }
    }
    double sum = 0;
    int count = 0;
    std::array<std::vector<double>, 3> phys;
    for (int v = 0; v < 3; ++v) phys[v] = filter.apply(xnew[v]);
    for (int c = 0; c < n; ++c) {
      if (!design.active[c]) continue;
      sum += volume_fraction({phys[0][c], phys[1][c], phys[2][c]});
      ++count;
    }
    return count ? sum / count : 0.0;
  };

  double lo = 1e-9, hi = 1e9;
  if (try_lambda(hi) > volume_budget)
    throw NumericalError("oc: volume infeasible even at the multiplier cap (inconsistent sensitivities)");
  double v_lo = try_lambda(lo);
  if (v_lo > volume_budget) {
    // bisect on the feasible side until the constraint is active within 1e-4
    for (int it = 0; it < 200; ++it) {
      double mid = std::sqrt(lo * hi);
      double v = try_lambda(mid);
      if (v > volume_budget)
        lo = mid;
      else {
        hi = mid;
        if (v >= volume_budget - 1e-4) break;
      }
      if (hi / lo < 1.0 + 1e-13) break;
    }
    (void)try_lambda(hi);  // land on the feasible endpoint
  }
  for (int v = 0; v < 3; ++v) insert(design, v, xnew[v]);
}

MmaStepper::MmaStepper(int num_vars, double move, double box_lo, double box_hi)
    : n_(num_vars), move_(move), lo_(box_lo), hi_(box_hi) {
  if (n_ < 1 || !(move_ > 0) || !(hi_ > lo_)) throw ValidationError("mma: bad setup");
  xold1_.assign(n_, 0.0);
  xold2_.assign(n_, 0.0);
  low_.assign(n_, 0.0);
  upp_.assign(n_, 0.0);
}

void MmaStepper::step(std::vector<double>& x, const std::vector<double>& grad) {
  if (int(x.size()) != n_ || int(grad.size()) != n_)
    throw ValidationError("mma: variable count mismatch");
  ++iter_;
  const double range = hi_ - lo_;
  const double raa0 = 1e-5;
  for (int k = 0; k < n_; ++k) {
    double xk = x[k];
    double low, upp;
    if (iter_ <= 2) {
      low = xk - 0.5 * range;
      upp = xk + 0.5 * range;
    } else {
      double z = (xk - xold1_[k]) * (xold1_[k] - xold2_[k]);
      double gamma = z > 0 ? 1.2 : (z < 0 ? 0.7 : 1.0);
      low = xk - gamma * (xold1_[k] - low_[k]);
      upp = xk + gamma * (upp_[k] - xold1_[k]);
      low = std::clamp(low, xk - 10.0 * range, xk - 0.01 * range);
      upp = std::clamp(upp, xk + 0.01 * range, xk + 10.0 * range);
    }
    double alpha = std::max({low + 0.1 * (xk - low), xk - move_, lo_});
    double beta = std::min({upp - 0.1 * (upp - xk), xk + move_, hi_});

    double gpos = std::max(grad[k], 0.0), gneg = std::max(-grad[k], 0.0);
    double p0 = (upp - xk) * (upp - xk) * (1.001 * gpos + 0.001 * gneg + raa0 / range);
    double q0 = (xk - low) * (xk - low) * (1.001 * gneg + 0.001 * gpos + raa0 / range);
    double sp = std::sqrt(p0), sq = std::sqrt(q0);
    double cand = (sp * low + sq * upp) / (sp + sq);
    double xnew = std::clamp(cand, alpha, beta);

    xold2_[k] = xold1_[k];
    xold1_[k] = xk;
    low_[k] = low;
    upp_[k] = upp;
    x[k] = xnew;
  }
}

namespace {

struct Evaluation {
  double compliance = 0;
  double penalty = 0;
  double volume = 0;
  SolveResult solve;
  DesignField phys;  // filtered field the physics used
};

struct LoopContext {
  const GridProblem& sim;
  const OptimizerConfig& cfg;
  StiffnessSolver& solver;
  const ConeFilter& filter;
};

DesignField make_phys(const DesignField& raw, const ConeFilter& filter) {
  DesignField phys = raw;
  int nvar = raw.free_orientations ? 7 : 4;
  for (int v = 0; v < nvar; ++v) {
    if (raw.free_orientations && v == 3) continue;
    insert(phys, v, filter.apply(extract(raw, v)));
  }
  return phys;
}

double penalty_of(const DesignField& phys) {
  if (!phys.free_orientations) return regularization(phys).total;
  double total = 0;
  for (int v = 4; v < 7; ++v)
    total += regularization(phys.nx, phys.ny, phys.active, extract(phys, v)).total;
  return total;
}

Evaluation evaluate(LoopContext& ctx, const DesignField& raw) {
  Evaluation ev;
  ev.phys = make_phys(raw, ctx.filter);
  std::vector<Mat3> s(ev.phys.num_cells(), Mat3::Zero());
  double vol = 0;
  int count = 0;
  for (int c = 0; c < ev.phys.num_cells(); ++c) {
    if (!ev.phys.active[c]) continue;
    if (ev.phys.free_orientations)
      s[c] = elasticity_matrix_free(ev.phys.cells[c].alpha, ev.phys.normals[c], ctx.sim.material);
    else
      s[c] = elasticity_matrix(ev.phys.cells[c], ctx.sim.material);
    vol += volume_fraction(ev.phys.cells[c].alpha);
    ++count;
  }
  ev.volume = count ? vol / count : 0.0;
  ev.solve = ctx.solver.solve(s);
  ev.compliance = ev.solve.total_compliance;
  ev.penalty = penalty_of(ev.phys);
  return ev;
}

}  // namespace

ObjectiveGradients objective_gradients(const GridProblem& sim, const ConeFilter& filter,
                                       const DesignField& phys, const SolveResult& solve,
                                       double c_star, double p_star, double weight) {
  int n = phys.num_cells();
  bool free_mode = phys.free_orientations;
  std::vector<std::array<double, 3>> dc_alpha_phys(n, {0, 0, 0});
  std::vector<std::array<double, 3>> dc_theta_phys(n, {0, 0, 0});  // [0] used when restricted
  for (int cj = 0; cj < sim.ny; ++cj)
    for (int ci = 0; ci < sim.nx; ++ci) {
      int c = sim.cell(ci, cj);
      if (!sim.active[c]) continue;
      Mat3 g = Mat3::Zero();
      for (int q = 0; q < sim.num_cases(); ++q)
        g += sim.weights[q] * cell_strain_moment(sim, solve.displacements[q], ci, cj);
      if (free_mode) {
        std::array<Mat3, 6> ds;
        (void)elasticity_matrix_free(phys.cells[c].alpha, phys.normals[c], sim.material, &ds);
        for (int v = 0; v < 3; ++v) dc_alpha_phys[c][v] = -(ds[v].cwiseProduct(g)).sum();
        for (int v = 0; v < 3; ++v) dc_theta_phys[c][v] = -(ds[3 + v].cwiseProduct(g)).sum();
      } else {
        std::array<Mat3, 4> ds;
        (void)elasticity_matrix(phys.cells[c], sim.material, &ds);
        for (int v = 0; v < 3; ++v) dc_alpha_phys[c][v] = -(ds[v].cwiseProduct(g)).sum();
        dc_theta_phys[c][0] = -(ds[3].cwiseProduct(g)).sum();
      }
    }

  ObjectiveGradients out;
  out.compliance_alpha.assign(n, {0, 0, 0});
  for (int v = 0; v < 3; ++v) {
    std::vector<double> col(n, 0.0);
    for (int c = 0; c < n; ++c) col[c] = dc_alpha_phys[c][v];
    col = filter.backprop(col);
    for (int c = 0; c < n; ++c) out.compliance_alpha[c][v] = col[c];
  }

  int ntv = free_mode ? 3 : 1;
  out.theta.assign(size_t(ntv) * n, 0.0);
  for (int v = 0; v < ntv; ++v) {
    std::vector<double> col(n, 0.0);
    for (int c = 0; c < n; ++c) col[c] = dc_theta_phys[c][v];
    std::vector<double> dp(n, 0.0);
    if (weight < 1.0) {
      RegularizationReport rep = regularization(sim.nx, sim.ny, sim.active,
                                                extract(phys, free_mode ? 4 + v : 3));
      dp = std::move(rep.grad);
    }
    for (int c = 0; c < n; ++c)
      col[c] = weight / c_star * col[c] +
               (weight < 1.0 ? (1.0 - weight) / p_star * dp[c] : 0.0);
    col = filter.backprop(col);
    for (int c = 0; c < n; ++c) out.theta[size_t(v) * n + c] = col[c];
  }
  return out;
}

OptimizeOutcome run_optimization(const ProblemSpec& problem, const OptimizerConfig& config) {
  if (config.init != "uniform" && config.init != "stress")
    throw ValidationError("optimizer: init must be 'uniform' or 'stress'");
  if (!(config.weight > 0 && config.weight <= 1))
    throw ValidationError("optimizer: weight must be in (0, 1]");
  if (config.max_iter < 0 || config.max_iter > 100000)
    throw ValidationError("optimizer: iteration count out of range");
  if (!(config.filter_radius > 0) || !(config.move_width > 0) || !(config.move_theta > 0))
    throw ValidationError("optimizer: nonpositive step or radius");

  OptimizeOutcome out;
  out.sim = restrict_problem(problem);
  const GridProblem& sim = out.sim;
  StiffnessSolver solver(sim, config.solver);
  ConeFilter filter(sim.nx, sim.ny, sim.active, config.filter_radius);
  LoopContext ctx{sim, config, solver, filter};

  DesignField& d = out.design;
  d.nx = sim.nx;
  d.ny = sim.ny;
  d.active = sim.active;
  d.cells.assign(d.num_cells(), LaminateSpec{});
  d.free_orientations = config.free_orientations;

  std::vector<double> theta_init(d.num_cells(), kPi / 2);
  if (config.init == "stress") {
    StressSample stress = principal_stress_init(sim);
    theta_init = stress.theta3_init;
  }
  double a0 = std::clamp(sim.volume_budget / 3.0, sim.l_min, sim.l_max);
  for (int c = 0; c < d.num_cells(); ++c) {
    d.cells[c].alpha = {a0, a0, a0};
    d.cells[c].theta3 = d.active[c] ? theta_init[c] : 0.0;
  }
  if (d.free_orientations) {
    d.normals.assign(d.num_cells(), {0, 0, 0});
    for (int c = 0; c < d.num_cells(); ++c)
      d.normals[c] = {d.cells[c].theta3 + 2 * kPi / 3, d.cells[c].theta3 + kPi / 3,
                      d.cells[c].theta3};
  }

  Evaluation ev = evaluate(ctx, d);
  out.c_star = ev.compliance;
  out.p_star = ev.penalty;
  // fail fast: a zero penalty normalizer (constant initial field) cannot
  // support the regularization term
  double obj = objective(ev.compliance, ev.penalty, out.c_star, out.p_star, config.weight);
  d.history.push_back({ev.compliance, ev.penalty, obj, ev.volume});

  int n = d.num_cells();
  int ntv = config.free_orientations ? 3 : 1;
  MmaStepper mma(ntv * n, config.move_theta);

  for (int it = 1; it <= config.max_iter; ++it) {
    ObjectiveGradients grads = objective_gradients(sim, filter, ev.phys, ev.solve, out.c_star,
                                                   out.p_star, config.weight);

    oc_update_widths(d, filter, grads.compliance_alpha, sim.volume_budget, sim.l_min, sim.l_max,
                     config.move_width);

    std::vector<double> theta(size_t(ntv) * n, 0.0);
    for (int v = 0; v < ntv; ++v) {
      std::vector<double> col = extract(d, config.free_orientations ? 4 + v : 3);
      std::copy(col.begin(), col.end(), theta.begin() + size_t(v) * n);
    }
    mma.step(theta, grads.theta);
    for (int v = 0; v < ntv; ++v) {
      std::vector<double> col(theta.begin() + size_t(v) * n, theta.begin() + size_t(v + 1) * n);
      insert(d, config.free_orientations ? 4 + v : 3, col);
    }

    ev = evaluate(ctx, d);
    obj = objective(ev.compliance, ev.penalty, out.c_star, out.p_star, config.weight);
    if (!std::isfinite(obj))
      throw NumericalError("optimizer: objective not finite at iteration " + std::to_string(it) +
                           " (C=" + fmt_g17(ev.compliance) + ", P=" + fmt_g17(ev.penalty) + ")");
    d.history.push_back({ev.compliance, ev.penalty, obj, ev.volume});
    d.iterations = it;
    if (config.log)
      std::fprintf(stderr, "it %3d  C %.6g  P %.6g  O %.6g  V %.4f\n", it, ev.compliance,
                   ev.penalty, obj, ev.volume);
    if (config.on_iteration) config.on_iteration(it, d, ev.volume);
  }

  out.c_final = ev.compliance;
  out.p_final = ev.penalty;
  out.volume = ev.volume;
  return out;
}

}  // namespace trilat
