#include <cmath>
#include <functional>

#include "trilat/common.hpp"
#include "trilat/problem.hpp"

namespace trilat {

namespace {

// Mask defined on the sim grid, expanded into cf x cf fine blocks so that
// restriction recovers the sim mask exactly.
ProblemSpec from_sim_mask(const std::string& name, int snx, int sny, int cf,
                          const std::function<bool(double, double)>& inside) {
  ProblemSpec spec;
  spec.coarsening = cf;
  GridProblem& p = spec.fine;
  p.name = name;
  p.nx = snx * cf;
  p.ny = sny * cf;
  p.active.assign(p.num_cells(), 0);
  for (int sj = 0; sj < sny; ++sj)
    for (int si = 0; si < snx; ++si) {
      if (!inside(si + 0.5, sj + 0.5)) continue;
      for (int j = sj * cf; j < (sj + 1) * cf; ++j)
        for (int i = si * cf; i < (si + 1) * cf; ++i) p.active[p.cell(i, j)] = 1;
    }
  p.fixed_x.assign(p.num_nodes(), 0);
  p.fixed_y.assign(p.num_nodes(), 0);
  return spec;
}

// force spread over a 3x3 fine-node patch, total (fx, fy)
void patch_load(GridProblem& p, int q, int ci, int cj, double fx, double fy) {
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      int n = p.node(ci + di, cj + dj);
      p.loads[q][2 * n] += fx / 9.0;
      p.loads[q][2 * n + 1] += fy / 9.0;
    }
}

// Bone-like domain: vertical shaft, offset head sphere, lateral bump.
// Constants tuned so the 116x150 sim grid holds 10118 active cells.
ProblemSpec femur() {
  const double shaft_x0 = 30, shaft_x1 = 86, shaft_y1 = 88;
  const double head_cx = 44, head_cy = 118, head_r = 33.60;
  const double troch_cx = 92, troch_cy = 102, troch_r = 25.35;
  auto inside = [&](double x, double y) {
    if (x >= shaft_x0 && x <= shaft_x1 && y <= shaft_y1) return true;
    if (std::hypot(x - head_cx, y - head_cy) <= head_r) return true;
    return std::hypot(x - troch_cx, y - troch_cy) <= troch_r;
  };
  ProblemSpec spec = from_sim_mask("femur", 116, 150, 4, inside);
  GridProblem& p = spec.fine;
  p.volume_budget = 0.5;
  p.l_min = 0.1;
  p.l_max = 0.5;

  for (int i = int(shaft_x0) * 4; i <= int(shaft_x1) * 4; ++i) {
    p.fixed_x[p.node(i, 0)] = 1;
    p.fixed_y[p.node(i, 0)] = 1;
  }
  p.loads.assign(2, Eigen::VectorXd::Zero(2 * p.num_nodes()));
  p.weights.assign(2, 0.5);
  // joint contact forces pressing into the head from two arc positions;
  // magnitude calibrated against the homogenized femur compliance target
  const double mag = 1.1774;
  patch_load(p, 0, 4 * 26, 4 * 144, mag * 0.574, -mag * 0.819);
  patch_load(p, 1, 4 * 50, 4 * 148, -mag * 0.174, -mag * 0.985);
  return spec;
}

// Equilateral domain, corners pinned at the base, three inward loads
// (apex and both edge midpoints) as separate symmetric cases.
ProblemSpec triangle() {
  const Vec2 a{5, 4}, b{165, 4}, c{85, 142.6};
  auto side = [](Vec2 p, Vec2 q, double x, double y) {
    return (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x) >= 0;
  };
  auto inside = [&](double x, double y) {
    return side(a, b, x, y) && side(b, c, x, y) && side(c, a, x, y);
  };
  ProblemSpec spec = from_sim_mask("triangle", 170, 148, 2, inside);
  GridProblem& p = spec.fine;
  p.volume_budget = 0.5;
  p.l_min = 0.1;
  p.l_max = 0.5;

  for (int i = 2 * 6; i <= 2 * 26; ++i) {
    p.fixed_x[p.node(i, 2 * 4)] = 1;
    p.fixed_y[p.node(i, 2 * 4)] = 1;
  }
  for (int i = 2 * 144; i <= 2 * 164; ++i) {
    p.fixed_x[p.node(i, 2 * 4)] = 1;
    p.fixed_y[p.node(i, 2 * 4)] = 1;
  }
  p.loads.assign(3, Eigen::VectorXd::Zero(2 * p.num_nodes()));
  p.weights.assign(3, 1.0 / 3.0);
  const double mag = 1.0;
  patch_load(p, 0, 2 * 85, 2 * 138, 0.0, -mag);                          // apex, down
  patch_load(p, 1, 2 * 46, 2 * 72, mag * 0.866, -mag * 0.5);             // left mid, inward
  patch_load(p, 2, 2 * 124, 2 * 72, -mag * 0.866, -mag * 0.5);           // right mid, inward
  return spec;
}

// Half-beam with symmetry on the left edge and a roller bottom-right.
ProblemSpec mbb() {
  ProblemSpec spec = from_sim_mask("mbb", 60, 30, 1, [](double, double) { return true; });
  GridProblem& p = spec.fine;
  p.volume_budget = 0.5;
  p.l_min = 0.1;
  p.l_max = 0.5;
  for (int j = 0; j <= 30; ++j) p.fixed_x[p.node(0, j)] = 1;
  p.fixed_y[p.node(60, 0)] = 1;
  p.loads.assign(1, Eigen::VectorXd::Zero(2 * p.num_nodes()));
  p.weights.assign(1, 1.0);
  p.loads[0][2 * p.node(0, 30) + 1] = -1.0;
  return spec;
}

// Simply supported deck, five independent downward loads along the top.
ProblemSpec beam() {
  ProblemSpec spec = from_sim_mask("beam", 100, 50, 1, [](double, double) { return true; });
  GridProblem& p = spec.fine;
  p.volume_budget = 0.3;
  p.l_min = 1e-6;
  p.l_max = 1.0;
  for (int i = 0; i <= 2; ++i) {
    p.fixed_x[p.node(i, 0)] = 1;
    p.fixed_y[p.node(i, 0)] = 1;
  }
  for (int i = 98; i <= 100; ++i) p.fixed_y[p.node(i, 0)] = 1;
  p.loads.assign(5, Eigen::VectorXd::Zero(2 * p.num_nodes()));
  p.weights.assign(5, 0.2);
  for (int q = 0; q < 5; ++q) {
    int x = 10 + 20 * q;
    for (int i = x - 1; i <= x + 1; ++i) p.loads[q][2 * p.node(i, 50) + 1] = -1.0 / 3.0;
  }
  return spec;
}

}  // namespace

ProblemSpec make_preset(const std::string& name) {
  ProblemSpec spec;
  if (name == "femur")
    spec = femur();
  else if (name == "triangle")
    spec = triangle();
  else if (name == "mbb")
    spec = mbb();
  else if (name == "beam")
    spec = beam();
  else
    throw ValidationError("unknown preset '" + name +
                          "' (available: femur, triangle, mbb, beam)");
  spec.validate();
  return spec;
}

}  // namespace trilat
