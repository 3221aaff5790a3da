#include "trilat/meshing.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace trilat {

namespace {

constexpr double kThird = kPi / 3.0;

Vec2 cell_center(int i, int j) { return {i + 0.5, j + 0.5}; }

double point_segment_dist2(Vec2 p, Vec2 a, Vec2 b, Vec2* closest) {
  Vec2 ab = b - a;
  double t = ab.squaredNorm() > 0 ? std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
  Vec2 q = a + ab * t;
  if (closest) *closest = q;
  return (p - q).squaredNorm();
}

}  // namespace

DomainMask::DomainMask(const GridProblem& sim)
    : nx(sim.nx), ny(sim.ny), active(sim.active) {
  auto on = [&](int i, int j) {
    return i >= 0 && i < nx && j >= 0 && j < ny && active[cell(i, j)];
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!on(i, j)) continue;
      area += 1.0;
      double x = i, y = j;
      if (!on(i - 1, j)) outline.push_back({Vec2{x, y}, Vec2{x, y + 1}});
      if (!on(i + 1, j)) outline.push_back({Vec2{x + 1, y}, Vec2{x + 1, y + 1}});
      if (!on(i, j - 1)) outline.push_back({Vec2{x, y}, Vec2{x + 1, y}});
      if (!on(i, j + 1)) outline.push_back({Vec2{x, y + 1}, Vec2{x + 1, y + 1}});
    }
}

bool DomainMask::inside(Vec2 p) const {
  int i = int(std::floor(p.x)), j = int(std::floor(p.y));
  return i >= 0 && i < nx && j >= 0 && j < ny && active[cell(i, j)];
}

double DomainMask::outline_distance(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : outline) best = std::min(best, point_segment_dist2(p, s[0], s[1], nullptr));
  return std::sqrt(best);
}

Vec2 DomainMask::project_to_outline(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  Vec2 proj = p;
  for (const auto& s : outline) {
    Vec2 q;
    double d = point_segment_dist2(p, s[0], s[1], &q);
    if (d < best) {
      best = d;
      proj = q;
    }
  }
  return proj;
}

int RoSyField::nearest_valid(Vec2 p) const {
  int ci = std::clamp(int(std::floor(p.x)), 0, nx - 1);
  int cj = std::clamp(int(std::floor(p.y)), 0, ny - 1);
  if (valid[cell(ci, cj)]) return cell(ci, cj);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  int found_r = -1;
  for (int r = 1; r < nx + ny; ++r) {
    // nearest by center distance can sit one Chebyshev ring beyond the first hit
    if (found_r >= 0 && r > found_r + 1) break;
    for (int j = std::max(0, cj - r); j <= std::min(ny - 1, cj + r); ++j)
      for (int i = std::max(0, ci - r); i <= std::min(nx - 1, ci + r); ++i) {
        if (std::max(std::abs(i - ci), std::abs(j - cj)) != r) continue;
        int c = cell(i, j);
        if (!valid[c]) continue;
        double d = (cell_center(i, j) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
        if (found_r < 0) found_r = r;
      }
  }
  if (best < 0) throw ValidationError("rosy: no valid cells");
  return best;
}

double rosy_deviation(double a, double b) { return std::abs(std::remainder(a - b, kThird)); }

double rosy_energy(const RoSyField& field) {
  double e = 0;
  for (int j = 0; j < field.ny; ++j)
    for (int i = 0; i < field.nx; ++i) {
      int c = field.cell(i, j);
      if (!field.valid[c]) continue;
      if (i + 1 < field.nx && field.valid[c + 1]) {
        double d = rosy_deviation(field.rep[c], field.rep[c + 1]);
        e += d * d;
      }
      if (j + 1 < field.ny && field.valid[c + field.nx]) {
        double d = rosy_deviation(field.rep[c], field.rep[c + field.nx]);
        e += d * d;
      }
    }
  return e;
}

RoSyField build_rosy(const DesignField& design, int smoothing_iters) {
  if (smoothing_iters < 0) throw ValidationError("rosy: negative smoothing iterations");
  RoSyField f;
  f.nx = design.nx;
  f.ny = design.ny;
  f.valid = design.active;
  f.rep.assign(f.nx * f.ny, 0.0);
  std::vector<double> base(f.rep.size(), 0.0);
  for (int c = 0; c < int(f.rep.size()); ++c)
    if (f.valid[c]) base[c] = wrap_angle(design.cells[c].theta3 + kPi / 2, kThird);

  // Gauss-Seidel in an unwrapped coordinate: values stay within the pi/12
  // trust region of their input, so no mid-sweep reduction is needed.
  std::vector<double> work = base;
  f.rep = work;
  double energy = rosy_energy(f);
  for (int sweep = 0; sweep < smoothing_iters; ++sweep) {
    for (int j = 0; j < f.ny; ++j)
      for (int i = 0; i < f.nx; ++i) {
        int c = f.cell(i, j);
        if (!f.valid[c]) continue;
        double sum = 0;
        int cnt = 0;
        auto add = [&](int cc) {
          // neighbor's nearest pi/3 translate relative to the current value
          sum += work[c] - std::remainder(work[c] - work[cc], kThird);
          ++cnt;
        };
        if (i > 0 && f.valid[c - 1]) add(c - 1);
        if (i + 1 < f.nx && f.valid[c + 1]) add(c + 1);
        if (j > 0 && f.valid[c - f.nx]) add(c - f.nx);
        if (j + 1 < f.ny && f.valid[c + f.nx]) add(c + f.nx);
        if (!cnt) continue;
        work[c] = std::clamp(sum / cnt, base[c] - kPi / 12, base[c] + kPi / 12);
      }
    for (int c = 0; c < int(work.size()); ++c)
      f.rep[c] = f.valid[c] ? wrap_angle(work[c], kThird) : 0.0;
    double after = rosy_energy(f);
    if (after > energy + 1e-9)
      throw NumericalError("rosy: smoothing energy increased");
    energy = after;
  }
  for (int c = 0; c < int(work.size()); ++c)
    f.rep[c] = f.valid[c] ? wrap_angle(work[c], kThird) : 0.0;
  return f;
}

namespace {

struct LatticeBasis {
  Vec2 u, v;
  explicit LatticeBasis(double phi, double h) {
    u = {h * std::cos(phi), h * std::sin(phi)};
    v = {h * std::cos(phi + kThird), h * std::sin(phi + kThird)};
  }
  // translate of q by integer basis steps nearest to `target`
  Vec2 snap(Vec2 q, Vec2 target) const {
    Vec2 d = target - q;
    double det = u.cross(v);
    double t1 = d.cross(v) / det;
    double t2 = u.cross(d) / det;
    int a0 = int(std::lround(t1)), b0 = int(std::lround(t2));
    Vec2 best = q;
    double best_d = std::numeric_limits<double>::infinity();
    for (int da = -1; da <= 1; ++da)
      for (int db = -1; db <= 1; ++db) {
        Vec2 cand = q + u * double(a0 + da) + v * double(b0 + db);
        double dd = (cand - target).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = cand;
        }
      }
    return best;
  }
};

}  // namespace

PositionField optimize_positions(const GridProblem& sim, const RoSyField& rosy, double h,
                                 int iters, uint64_t seed) {
  if (!(h > 0)) throw ValidationError("positions: edge length must be positive");
  if (iters < 1) throw ValidationError("positions: at least one sweep");
  DomainMask dom(sim);
  if (dom.area == 0) throw ValidationError("positions: empty domain");

  // Oversample well past the lattice vertex density (one vertex per
  // sqrt(3)/2 h^2): with ~2.4 samples per lattice-site basin every site
  // catches at least one, and basin-mates converge together and collapse.
  // Near-critical sampling leaves unfilled sites, since nothing penalizes
  // two samples settling on the same site. The grid reaches one lattice
  // step past the domain so sites just outside the outline are populated;
  // they either conform onto the outline or are discarded after seeding.
  double s = 0.6 * h;
  double margin = 1.0 * h;
  int gx = std::max(1, int(std::ceil((sim.nx + 2 * margin) / s)));
  int gy = std::max(1, int(std::ceil((sim.ny + 2 * margin) / s)));

  PositionField field;
  field.h = h;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.25 * s, 0.25 * s);
  std::vector<int> slot(gx * gy, -1);
  for (int gj = 0; gj < gy; ++gj)
    for (int gi = 0; gi < gx; ++gi) {
      Vec2 p{(gi + 0.5) * s - margin + jitter(rng), (gj + 0.5) * s - margin + jitter(rng)};
      if (!dom.inside(p) && dom.outline_distance(p) >= margin) continue;
      slot[gj * gx + gi] = int(field.pos.size());
      field.pos.push_back(p);
    }
  if (field.pos.empty()) throw ValidationError("positions: no samples inside the domain");
  field.boundary.assign(field.pos.size(), 0);

  // fixed neighbor graph: 8-neighborhood on the init grid
  field.neighbor_offsets.assign(field.pos.size() + 1, 0);
  for (int gj = 0; gj < gy; ++gj)
    for (int gi = 0; gi < gx; ++gi) {
      int k = slot[gj * gx + gi];
      if (k < 0) continue;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj) continue;
          int ni = gi + di, nj = gj + dj;
          if (ni < 0 || ni >= gx || nj < 0 || nj >= gy) continue;
          int m = slot[nj * gx + ni];
          if (m >= 0) {
            field.neighbor_list.push_back(m);
            ++field.neighbor_offsets[k + 1];
          }
        }
    }
  for (size_t k = 1; k < field.neighbor_offsets.size(); ++k)
    field.neighbor_offsets[k] += field.neighbor_offsets[k - 1];

  // Seed a globally consistent lattice before any relaxation: breadth-first
  // from the sample nearest the domain centroid, each sample snaps onto the
  // lattice anchored at its parent's position. Relaxation alone cannot
  // annihilate surplus-column dislocations (sample count, not h, would set
  // the converged spacing); with 0.6h sampling every lattice-site basin
  // (inradius h/2) is guaranteed a sample, so the seeded field has no holes
  // and duplicates simply collapse during extraction.
  {
    Vec2 centroid{0, 0};
    double cnt = 0;
    for (int j = 0; j < sim.ny; ++j)
      for (int i = 0; i < sim.nx; ++i)
        if (sim.active[j * sim.nx + i]) {
          centroid += Vec2{i + 0.5, j + 0.5};
          cnt += 1;
        }
    centroid = centroid / cnt;
    int n = int(field.pos.size());
    std::vector<uint8_t> placed(n, 0);
    std::vector<int> queue;
    std::vector<Vec2> raw = field.pos;
    // a seed anchors its lattice at the origin, not at its own jittered
    // position: mask outlines run along integer coordinate lines, so this
    // phase puts boundary-row sites on straight outline segments exactly
    auto push_seed = [&](int k) {
      LatticeBasis basis(rosy.at(raw[k]), h);
      field.pos[k] = basis.snap(Vec2{0, 0}, raw[k]);
      placed[k] = 1;
      queue.push_back(k);
    };
    int seed_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      double d = (raw[k] - centroid).squaredNorm();
      if (d < best) {
        best = d;
        seed_k = k;
      }
    }
    push_seed(seed_k);
    for (size_t head = 0; head < queue.size(); ++head) {
      int k = queue[head];
      for (int idx = field.neighbor_offsets[k]; idx < field.neighbor_offsets[k + 1]; ++idx) {
        int m = field.neighbor_list[idx];
        if (placed[m]) continue;
        LatticeBasis basis(rosy.at(raw[m]), h);
        field.pos[m] = basis.snap(field.pos[k], raw[m]);
        placed[m] = 1;
        queue.push_back(m);
      }
      // disconnected fragments start their own lattice
      if (head + 1 == queue.size())
        for (int m = 0; m < n; ++m)
          if (!placed[m]) {
            push_seed(m);
            break;
          }
    }
  }

  // Samples whose seeded site hugs the outline, from either side, are
  // classified once and conform to it; samples whose site lies deeper
  // outside are discarded. The band is kept just below h/2: with the
  // origin-anchored phase the nearest interior sites of a straight outline
  // sit at exactly h/2 and must never be swallowed by rounding noise.
  {
    double band = 0.499 * h;
    std::vector<int> remap(field.pos.size(), -1);
    int kept = 0;
    for (int k = 0; k < int(field.pos.size()); ++k) {
      Vec2 p = field.pos[k];
      bool rim = dom.outline_distance(p) < band;
      if (!rim && !dom.inside(p)) continue;
      remap[k] = kept;
      field.boundary[kept] = rim ? 1 : 0;
      field.pos[kept] = rim ? dom.project_to_outline(p) : p;
      ++kept;
    }
    std::vector<int> offsets(kept + 1, 0);
    std::vector<int> list;
    for (int k = 0; k < int(remap.size()); ++k) {
      if (remap[k] < 0) continue;
      for (int idx = field.neighbor_offsets[k]; idx < field.neighbor_offsets[k + 1]; ++idx) {
        int m = remap[field.neighbor_list[idx]];
        if (m >= 0) {
          list.push_back(m);
          ++offsets[remap[k] + 1];
        }
      }
    }
    for (int k = 1; k <= kept; ++k) offsets[k] += offsets[k - 1];
    field.pos.resize(kept);
    field.boundary.resize(kept);
    field.neighbor_offsets = std::move(offsets);
    field.neighbor_list = std::move(list);
    if (field.pos.empty()) throw ValidationError("positions: no samples inside the domain");
  }

  // Progressive accumulation: each neighbor snaps to the running average, not
  // to the stale position. A plain mean has frustrated fixed points (a sample
  // exactly between two lattice sites stays put, its candidate residuals
  // canceling); the sequential pull breaks that symmetry deterministically.
  // Interior samples then re-round onto the fixed lattice through their
  // seeded site: where the orientation varies, neighbor proposals disagree
  // and a free-floating average drifts off-lattice a little more every
  // sweep. Rounding confines each sample to one discrete site set, so
  // relaxation can only hop whole lattice steps (which is how dislocations
  // heal) and the seeded structure cannot erode. Rim samples stay free:
  // their conformance to the outline is the accuracy that matters. The last
  // few sweeps drop the rounding so residual strain around dislocations can
  // spread over their neighborhoods instead of piling into one sliver.
  std::vector<Vec2> anchor = field.pos;
  int polish = std::min(8, iters / 4);
  for (int it = 0; it < iters; ++it) {
    bool anchored = it < iters - polish;
    for (int k = 0; k < int(field.pos.size()); ++k) {
      LatticeBasis basis(rosy.at(field.pos[k]), h);
      Vec2 q = field.pos[k];
      double w = 1;
      for (int idx = field.neighbor_offsets[k]; idx < field.neighbor_offsets[k + 1]; ++idx) {
        Vec2 cand = basis.snap(field.pos[field.neighbor_list[idx]], q);
        q = (q * w + cand) / (w + 1);
        w += 1;
      }
      if (anchored && !field.boundary[k]) q = basis.snap(anchor[k], q);
      if (field.boundary[k] || !dom.inside(q)) q = dom.project_to_outline(q);
      field.pos[k] = q;
    }
  }
  return field;
}

double edge_length_target(const GridProblem& sim, int target_lattices) {
  if (target_lattices < 1) throw ValidationError("mesh: target lattice count must be positive");
  double area = 0;
  for (uint8_t a : sim.active) area += a ? 1.0 : 0.0;
  return std::sqrt(4.0 * area / (std::sqrt(3.0) * target_lattices));
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int root(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = root(a);
    b = root(b);
    if (a == b) return;
    parent[std::max(a, b)] = std::min(a, b);  // lowest index wins: stable ids
  }
};

struct HashGrid {
  double cell;
  std::map<std::pair<int, int>, std::vector<int>> buckets;
  explicit HashGrid(double c) : cell(c) {}
  std::pair<int, int> key(Vec2 p) const {
    return {int(std::floor(p.x / cell)), int(std::floor(p.y / cell))};
  }
  void insert(Vec2 p, int id) { buckets[key(p)].push_back(id); }
  template <class F>
  void near(Vec2 p, F&& fn) const {
    auto [kx, ky] = key(p);
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        auto it = buckets.find({kx + di, ky + dj});
        if (it == buckets.end()) continue;
        for (int id : it->second) fn(id);
      }
  }
};

// families are line directions: deviation is pi-periodic
int edge_family(double edge_angle, double rep) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < 3; ++m) {
    double d = angle_dist(edge_angle, rep + m * kThird, kPi);
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

double polygon_area(const std::vector<Vec2>& pts, const std::vector<int>& face) {
  double a = 0;
  for (size_t k = 0; k < face.size(); ++k)
    a += pts[face[k]].cross(pts[face[(k + 1) % face.size()]]);
  return 0.5 * a;
}

bool ccw(Vec2 a, Vec2 b, Vec2 c) { return (b - a).cross(c - a) > 0; }

bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  double d1 = (b - a).cross(p - a);
  double d2 = (c - b).cross(p - b);
  double d3 = (a - c).cross(p - c);
  return d1 >= 0 && d2 >= 0 && d3 >= 0;
}

// deterministic ear clipping for small simple polygons (CCW input)
void ear_clip(const std::vector<Vec2>& pts, std::vector<int> face,
              std::vector<std::array<int, 3>>& out) {
  int guard = int(face.size()) * int(face.size()) + 8;
  while (face.size() > 3 && guard-- > 0) {
    bool clipped = false;
    for (size_t k = 0; k < face.size(); ++k) {
      int ia = face[(k + face.size() - 1) % face.size()];
      int ib = face[k];
      int ic = face[(k + 1) % face.size()];
      if (!ccw(pts[ia], pts[ib], pts[ic])) continue;
      bool ear = true;
      for (int iv : face) {
        if (iv == ia || iv == ib || iv == ic) continue;
        if (point_in_triangle(pts[iv], pts[ia], pts[ib], pts[ic])) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      out.push_back({ia, ib, ic});
      face.erase(face.begin() + k);
      clipped = true;
      break;
    }
    if (!clipped) return;  // degenerate: drop the remainder
  }
  if (face.size() == 3 && ccw(pts[face[0]], pts[face[1]], pts[face[2]]))
    out.push_back({face[0], face[1], face[2]});
}

}  // namespace

FieldAlignedMesh extract_mesh(const GridProblem& sim, const RoSyField& rosy,
                              const PositionField& pos) {
  double h = pos.h;
  int n = int(pos.pos.size());
  DomainMask dom(sim);

  // collapse samples within 0.3h into graph vertices
  UnionFind uf(n);
  {
    HashGrid grid(0.3 * h);
    for (int k = 0; k < n; ++k) {
      grid.near(pos.pos[k], [&](int j) {
        if (j < k && (pos.pos[j] - pos.pos[k]).norm() < 0.3 * h) uf.unite(j, k);
      });
      grid.insert(pos.pos[k], k);
    }
  }
  std::vector<int> vertex_of(n, -1);
  std::vector<Vec2> verts;
  std::vector<uint8_t> vert_boundary;
  std::vector<int> count;
  for (int k = 0; k < n; ++k) {
    int r = uf.root(k);
    if (vertex_of[r] < 0) {
      vertex_of[r] = int(verts.size());
      verts.push_back({0, 0});
      vert_boundary.push_back(0);
      count.push_back(0);
    }
    int v = vertex_of[r];
    vertex_of[k] = v;
    verts[v] += pos.pos[k];
    vert_boundary[v] |= pos.boundary[k];
    ++count[v];
  }
  for (size_t v = 0; v < verts.size(); ++v) {
    verts[v] = verts[v] / count[v];
    if (vert_boundary[v]) verts[v] = dom.project_to_outline(verts[v]);
  }

  // connect vertices one lattice step apart (any of the six directions)
  std::vector<std::pair<int, int>> links;
  {
    HashGrid grid(1.45 * h);
    for (int v = 0; v < int(verts.size()); ++v) grid.insert(verts[v], v);
    for (int a = 0; a < int(verts.size()); ++a) {
      grid.near(verts[a], [&](int b) {
        if (b <= a) return;
        // projection onto the outline pulls rim vertices off their lattice
        // sites, so pairs touching the rim get a wider acceptance budget
        double slack = (vert_boundary[a] || vert_boundary[b]) ? 0.55 * h : 0.4 * h;
        Vec2 d = verts[b] - verts[a];
        double len = d.norm();
        if (len < h - slack || len > h + slack) return;
        // each endpoint sits on the lattice of its own local orientation, so
        // where the field bends the chord tracks an endpoint, not the midpoint
        double reps[3] = {rosy.at(verts[a]), rosy.at(verts[b]),
                          rosy.at((verts[a] + verts[b]) / 2)};
        for (double rep : reps)
          for (int m = 0; m < 6; ++m) {
            Vec2 step{h * std::cos(rep + m * kThird), h * std::sin(rep + m * kThird)};
            if ((d - step).norm() < slack) {
              links.emplace_back(a, b);
              return;
            }
          }
      });
    }
  }
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());

  // sorted incidence (counterclockwise) for the planar face walk
  int nv = int(verts.size());
  std::vector<std::vector<int>> adj(nv);
  for (auto [a, b] : links) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (int v = 0; v < nv; ++v)
    std::sort(adj[v].begin(), adj[v].end(), [&](int p, int q) {
      double ap = std::atan2(verts[p].y - verts[v].y, verts[p].x - verts[v].x);
      double aq = std::atan2(verts[q].y - verts[v].y, verts[q].x - verts[v].x);
      return ap != aq ? ap < aq : p < q;
    });

  // trace faces: next half-edge turns to the clockwise predecessor around the
  // head vertex, which walks interior faces counterclockwise
  std::map<std::pair<int, int>, char> visited;
  std::vector<std::vector<int>> faces;
  for (auto [sa, sb] : links)
    for (auto [a0, b0] : {std::pair{sa, sb}, std::pair{sb, sa}}) {
      if (visited.count({a0, b0})) continue;
      std::vector<int> face;
      int a = a0, b = b0;
      bool ok = true;
      for (int step = 0; step < 64; ++step) {
        visited[{a, b}] = 1;
        face.push_back(a);
        auto& nb = adj[b];
        int idx = int(std::find(nb.begin(), nb.end(), a) - nb.begin());
        int c = nb[(idx + nb.size() - 1) % nb.size()];
        a = b;
        b = c;
        if (a == a0 && b == b0) break;
        if (step == 63) ok = false;
      }
      if (!ok || face.size() < 3) continue;
      bool dup = false;
      std::vector<int> sorted_face = face;
      std::sort(sorted_face.begin(), sorted_face.end());
      for (size_t k = 1; k < sorted_face.size(); ++k)
        if (sorted_face[k] == sorted_face[k - 1]) dup = true;
      if (dup || face.size() > 8) continue;
      if (polygon_area(verts, face) <= 1e-9 * h * h) continue;  // outer/degenerate
      faces.push_back(std::move(face));
    }

  // triangulate faces; a missing interior sample shows up as a convex hole,
  // filled by a centroid star to keep the lattice count and angles
  std::vector<std::array<int, 3>> tris;
  for (auto& face : faces) {
    if (face.size() == 3) {
      tris.push_back({face[0], face[1], face[2]});
      continue;
    }
    if (face.size() == 4) {
      double d02 = (verts[face[0]] - verts[face[2]]).squaredNorm();
      double d13 = (verts[face[1]] - verts[face[3]]).squaredNorm();
      int off = d02 <= d13 ? 0 : 1;
      std::array<std::array<int, 3>, 2> cand = {
          {{face[off], face[off + 1], face[off + 2]},
           {face[off], face[off + 2], face[(off + 3) % 4]}}};
      bool valid = true;
      for (auto& t : cand)
        if (!ccw(verts[t[0]], verts[t[1]], verts[t[2]])) valid = false;
      if (!valid) {  // concave quad: the other diagonal
        off = 1 - off;
        cand = {{{face[off], face[off + 1], face[off + 2]},
                 {face[off], face[off + 2], face[(off + 3) % 4]}}};
        valid = true;
        for (auto& t : cand)
          if (!ccw(verts[t[0]], verts[t[1]], verts[t[2]])) valid = false;
      }
      if (valid)
        for (auto& t : cand) tris.push_back(t);
      continue;
    }
    bool convex = true;
    for (size_t k = 0; k < face.size(); ++k) {
      Vec2 a = verts[face[k]];
      Vec2 b = verts[face[(k + 1) % face.size()]];
      Vec2 c = verts[face[(k + 2) % face.size()]];
      if ((b - a).cross(c - b) < -1e-9 * h * h) convex = false;
    }
    if (convex) {
      Vec2 centroid{0, 0};
      for (int v : face) centroid += verts[v];
      centroid = centroid / double(face.size());
      int cv = int(verts.size());
      verts.push_back(centroid);
      vert_boundary.push_back(0);
      for (size_t k = 0; k < face.size(); ++k)
        tris.push_back({face[k], face[(k + 1) % face.size()], cv});
    } else {
      ear_clip(verts, face, tris);
    }
  }

  // drop triangles that cover no active cell center
  std::vector<std::array<int, 3>> kept;
  for (auto& t : tris) {
    Vec2 a = verts[t[0]], b = verts[t[1]], c = verts[t[2]];
    int i0 = std::max(0, int(std::floor(std::min({a.x, b.x, c.x}))));
    int i1 = std::min(sim.nx - 1, int(std::floor(std::max({a.x, b.x, c.x}))));
    int j0 = std::max(0, int(std::floor(std::min({a.y, b.y, c.y}))));
    int j1 = std::min(sim.ny - 1, int(std::floor(std::max({a.y, b.y, c.y}))));
    bool covers = false;
    for (int j = j0; j <= j1 && !covers; ++j)
      for (int i = i0; i <= i1 && !covers; ++i)
        if (sim.active[j * sim.nx + i] && point_in_triangle(cell_center(i, j), a, b, c))
          covers = true;
    if (covers) kept.push_back(t);
  }

  // compact vertices
  std::vector<int> remap(verts.size(), -1);
  FieldAlignedMesh mesh;
  mesh.h = h;
  for (auto& t : kept)
    for (int k = 0; k < 3; ++k)
      if (remap[t[k]] < 0) {
        remap[t[k]] = int(mesh.vertex.size());
        mesh.vertex.push_back(verts[t[k]]);
      }
  for (auto& t : kept) mesh.tri.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});

  // unique edges, tangent family, edge-opposite-corner table
  std::map<std::pair<int, int>, int> edge_id;
  mesh.tri_edge.assign(mesh.tri.size(), {-1, -1, -1});
  for (size_t t = 0; t < mesh.tri.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      int a = mesh.tri[t][(k + 1) % 3], b = mesh.tri[t][(k + 2) % 3];
      auto key = std::minmax(a, b);
      auto it = edge_id.find(key);
      int id;
      if (it == edge_id.end()) {
        id = int(mesh.edge.size());
        edge_id.emplace(key, id);
        Vec2 pa = mesh.vertex[key.first], pb = mesh.vertex[key.second];
        double ang = std::atan2(pb.y - pa.y, pb.x - pa.x);
        double rep = rosy.at((pa + pb) / 2);
        mesh.edge.push_back({key.first, key.second, edge_family(ang, rep)});
      } else {
        id = it->second;
      }
      mesh.tri_edge[t][k] = id;
    }
  mesh.validate();
  return mesh;
}

int FieldAlignedMesh::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  for (size_t e = 0; e < edge.size(); ++e)
    if (edge[e].a == a && edge[e].b == b) return int(e);
  return -1;
}

void FieldAlignedMesh::validate() const {
  int nv = int(vertex.size());
  if (tri.size() != tri_edge.size()) throw ValidationError("mesh: corner table size mismatch");
  std::vector<int> edge_use(edge.size(), 0);
  for (size_t t = 0; t < tri.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int v = tri[t][k];
      if (v < 0 || v >= nv) throw ValidationError("mesh: vertex index out of range");
      int e = tri_edge[t][k];
      if (e < 0 || e >= int(edge.size())) throw ValidationError("mesh: edge index out of range");
      auto [lo, hi] = std::minmax(tri[t][(k + 1) % 3], tri[t][(k + 2) % 3]);
      if (edge[e].a != lo || edge[e].b != hi)
        throw ValidationError("mesh: corner table inconsistent");
      ++edge_use[e];
    }
    Vec2 a = vertex[tri[t][0]], b = vertex[tri[t][1]], c = vertex[tri[t][2]];
    if ((b - a).cross(c - a) <= 0) throw ValidationError("mesh: triangle not counterclockwise");
  }
  for (size_t e = 0; e < edge.size(); ++e) {
    if (edge[e].a >= edge[e].b || edge[e].b >= nv || edge[e].a < 0)
      throw ValidationError("mesh: bad edge endpoints");
    if (edge[e].cls < 0 || edge[e].cls > 2) throw ValidationError("mesh: bad edge class");
    if (edge_use[e] < 1 || edge_use[e] > 2) throw ValidationError("mesh: non-manifold edge");
  }
}

FieldAlignedMesh triangulate_design(const GridProblem& sim, const DesignField& phys,
                                    const TriangulateConfig& config) {
  if ((config.target_lattices > 0) == (config.edge_length > 0))
    throw ValidationError("mesh: give exactly one of target lattice count or edge length");
  if (config.position_iters < 1) throw ValidationError("mesh: position iterations must be >= 1");
  double h = config.edge_length > 0 ? config.edge_length
                                    : edge_length_target(sim, config.target_lattices);
  RoSyField rosy = build_rosy(phys, config.smooth_iters);
  PositionField positions = optimize_positions(sim, rosy, h, config.position_iters, config.seed);
  FieldAlignedMesh mesh = extract_mesh(sim, rosy, positions);
  mesh.problem = sim.name;
  return mesh;
}

void save_mesh(const std::string& path, const FieldAlignedMesh& mesh) {
  std::ostringstream out;
  out << "trilat-mesh 1\n";
  out << "problem " << mesh.problem << "\n";
  out << "h " << fmt_g17(mesh.h) << "\n";
  out << "vertices " << mesh.vertex.size() << "\n";
  for (const Vec2& v : mesh.vertex) out << fmt_g17(v.x) << " " << fmt_g17(v.y) << "\n";
  out << "triangles " << mesh.tri.size() << "\n";
  for (const auto& t : mesh.tri) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "edges " << mesh.edge.size() << "\n";
  for (const auto& e : mesh.edge) out << e.a << " " << e.b << " " << e.cls << "\n";
  out << "end\n";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("mesh: cannot open " + path + " for writing");
  f << out.str();
}

FieldAlignedMesh load_mesh(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("mesh: cannot open " + path);
  auto bad = [&](const std::string& m) { return ValidationError("mesh file: " + m); };
  std::string tok;
  int version = 0;
  if (!(f >> tok >> version) || tok != "trilat-mesh") throw bad("missing header");
  if (version != 1) throw bad("unsupported version");
  FieldAlignedMesh mesh;
  size_t nv = 0, nt = 0, ne = 0;
  if (!(f >> tok >> mesh.problem) || tok != "problem") throw bad("missing problem name");
  if (!(f >> tok >> mesh.h) || tok != "h") throw bad("missing edge length");
  if (!(f >> tok >> nv) || tok != "vertices") throw bad("missing vertices");
  mesh.vertex.resize(nv);
  for (auto& v : mesh.vertex)
    if (!(f >> v.x >> v.y)) throw bad("truncated vertices");
  if (!(f >> tok >> nt) || tok != "triangles") throw bad("missing triangles");
  mesh.tri.resize(nt);
  for (auto& t : mesh.tri)
    if (!(f >> t[0] >> t[1] >> t[2])) throw bad("truncated triangles");
  if (!(f >> tok >> ne) || tok != "edges") throw bad("missing edges");
  mesh.edge.resize(ne);
  for (auto& e : mesh.edge)
    if (!(f >> e.a >> e.b >> e.cls)) throw bad("truncated edges");
  if (!(f >> tok) || tok != "end") throw bad("missing end marker");

  std::map<std::pair<int, int>, int> edge_id;
  for (size_t e = 0; e < mesh.edge.size(); ++e) {
    auto key = std::make_pair(mesh.edge[e].a, mesh.edge[e].b);
    if (!edge_id.emplace(key, int(e)).second) throw bad("duplicate edge");
  }
  mesh.tri_edge.assign(mesh.tri.size(), {-1, -1, -1});
  for (size_t t = 0; t < mesh.tri.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      auto key = std::minmax(mesh.tri[t][(k + 1) % 3], mesh.tri[t][(k + 2) % 3]);
      auto it = edge_id.find(key);
      if (it == edge_id.end()) throw bad("triangle references missing edge");
      mesh.tri_edge[t][k] = it->second;
    }
  mesh.validate();
  return mesh;
}

}  // namespace trilat
