#include "trilat/dehomog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "trilat/rank3.hpp"

namespace trilat {

namespace {

bool contains(Vec2 a, Vec2 b, Vec2 c, Vec2 p, double tol) {
  return (b - a).cross(p - a) >= tol && (c - b).cross(p - b) >= tol &&
         (a - c).cross(p - c) >= tol;
}

// Masked bilinear sample of the design field at a point in cell coordinates.
LaminateSpec sample_field(const GridProblem& sim, const DesignField& phys, double x, double y) {
  int ci = std::clamp(int(x), 0, sim.nx - 1);
  int cj = std::clamp(int(y), 0, sim.ny - 1);
  double u = x - 0.5, v = y - 0.5;
  int i0 = int(std::floor(u)), j0 = int(std::floor(v));
  double fx = u - i0, fy = v - j0;
  std::array<double, 3> alpha{0, 0, 0};
  double theta = 0, wsum = 0;
  for (int dj = 0; dj < 2; ++dj)
    for (int di = 0; di < 2; ++di) {
      int i = i0 + di, j = j0 + dj;
      if (i < 0 || i >= sim.nx || j < 0 || j >= sim.ny) continue;
      if (!sim.active[sim.cell(i, j)]) continue;
      double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy);
      if (w <= 0) continue;
      const LaminateSpec& s = phys.cells[phys.cell(i, j)];
      for (int n = 0; n < 3; ++n) alpha[n] += w * s.alpha[n];
      theta += w * s.theta3;
      wsum += w;
    }
  if (wsum <= 0) return phys.cells[phys.cell(ci, cj)];
  for (int n = 0; n < 3; ++n) alpha[n] /= wsum;
  return LaminateSpec{alpha, theta / wsum};
}

struct TriLocator {
  const FieldAlignedMesh& mesh;
  int nx, ny;
  std::vector<std::vector<int>> bucket;  // triangle ids per unit cell, ascending

  TriLocator(const FieldAlignedMesh& m, int nx_, int ny_) : mesh(m), nx(nx_), ny(ny_) {
    bucket.resize(size_t(nx) * ny);
    for (size_t t = 0; t < mesh.tri.size(); ++t) {
      Vec2 a = mesh.vertex[mesh.tri[t][0]];
      Vec2 b = mesh.vertex[mesh.tri[t][1]];
      Vec2 c = mesh.vertex[mesh.tri[t][2]];
      int i0 = std::clamp(int(std::floor(std::min({a.x, b.x, c.x}))), 0, nx - 1);
      int i1 = std::clamp(int(std::floor(std::max({a.x, b.x, c.x}))), 0, nx - 1);
      int j0 = std::clamp(int(std::floor(std::min({a.y, b.y, c.y}))), 0, ny - 1);
      int j1 = std::clamp(int(std::floor(std::max({a.y, b.y, c.y}))), 0, ny - 1);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) bucket[size_t(j) * nx + i].push_back(int(t));
    }
  }

  int find(Vec2 p) const {
    int i = std::clamp(int(std::floor(p.x)), 0, nx - 1);
    int j = std::clamp(int(std::floor(p.y)), 0, ny - 1);
    for (int t : bucket[size_t(j) * nx + i]) {
      auto& tri = mesh.tri[t];
      if (contains(mesh.vertex[tri[0]], mesh.vertex[tri[1]], mesh.vertex[tri[2]], p, -1e-9))
        return t;
    }
    return -1;
  }
};

double tri_area(Vec2 a, Vec2 b, Vec2 c) { return 0.5 * (b - a).cross(c - a); }

// Corners of the polygon left after insetting each edge by d[e]; for three
// half-planes sharing the triangle's edge normals that polygon is again a
// triangle, corner c being the crossing of the offset lines of the two
// edges meeting at the original corner c. The corners move linearly with
// the insets and pass through a point reflection at the collapse, so the
// emptiness test is not the orientation but each corner staying on the
// inward side of its own opposite offset line: slack = min over corners.
struct InsetCorners {
  std::array<Vec2, 3> corner;
  double signed_area;
  std::array<double, 3> slack;  // per corner, against its own opposite line
};

InsetCorners inset_corners(const std::array<Vec2, 3>& tri, const std::array<double, 3>& d) {
  std::array<Vec2, 3> n;     // inward unit normal per edge slot
  std::array<double, 3> c;   // offset line: n.x = c
  for (int e = 0; e < 3; ++e) {
    Vec2 p = tri[(e + 1) % 3], q = tri[(e + 2) % 3];
    Vec2 g = q - p;
    double len = g.norm();
    n[e] = Vec2{-g.y, g.x} / len;
    c[e] = n[e].dot(p) + d[e];
  }
  InsetCorners out;
  for (int k = 0; k < 3; ++k) {
    int a = (k + 1) % 3, b = (k + 2) % 3;
    double det = n[a].cross(n[b]);
    out.corner[k] = Vec2{c[a] * n[b].y - c[b] * n[a].y, n[a].x * c[b] - n[b].x * c[a]} / det;
  }
  out.signed_area = tri_area(out.corner[0], out.corner[1], out.corner[2]);
  for (int k = 0; k < 3; ++k) out.slack[k] = n[k].dot(out.corner[k]) - c[k];
  return out;
}

void refresh_areas(LatticeDesign& lat) {
  double solid = 0;
  for (const auto& lt : lat.lattice) {
    auto& t = lat.tri[lt.tri];
    solid += tri_area(lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]]) - lt.thick.void_area;
  }
  for (const auto& pa : lat.patch) solid += tri_area(pa.p[0], pa.p[1], pa.p[2]);
  lat.solid_area = solid;
  lat.volume = lat.domain_area > 0 ? solid / lat.domain_area : 0.0;
}

// Sorted vertex pair -> up to two (lattice index, edge slot) entries.
using EdgeMap = std::map<std::pair<int, int>, std::array<std::pair<int, int>, 2>>;

EdgeMap lattice_adjacency(const LatticeDesign& lat) {
  EdgeMap adj;
  for (size_t k = 0; k < lat.lattice.size(); ++k) {
    auto& t = lat.tri[lat.lattice[k].tri];
    for (int e = 0; e < 3; ++e) {
      auto key = std::minmax(t[(e + 1) % 3], t[(e + 2) % 3]);
      auto [it, fresh] = adj.try_emplace(key, std::array<std::pair<int, int>, 2>{
                                                  std::pair<int, int>{-1, -1}, {-1, -1}});
      auto& slots = it->second;
      if (slots[0].first < 0)
        slots[0] = {int(k), e};
      else if (slots[1].first < 0)
        slots[1] = {int(k), e};
      else
        throw ValidationError("lattice: edge shared by more than two triangles");
      (void)fresh;
    }
  }
  return adj;
}

void build_patches(LatticeDesign& lat) {
  lat.patch.clear();
  EdgeMap adj = lattice_adjacency(lat);
  for (size_t k = 0; k < lat.lattice.size(); ++k) {
    const LatticeTri& own = lat.lattice[k];
    if (own.thick.solid || own.thick.void_area <= 1e-12) continue;
    auto& t = lat.tri[own.tri];
    for (int c = 0; c < 3; ++c) {
      int v = t[c];
      // neighbors across the two edges meeting at v
      std::array<Vec2, 2> nb;
      bool ok = true;
      for (int s = 0; s < 2; ++s) {
        int e = (c + 1 + s) % 3;
        auto key = std::minmax(t[(e + 1) % 3], t[(e + 2) % 3]);
        auto& slots = adj.at(key);
        std::pair<int, int> other{-1, -1};
        if (slots[0].first == int(k))
          other = slots[1];
        else
          other = slots[0];
        if (other.first < 0) {  // hull edge or dropped neighbor
          ok = false;
          break;
        }
        const LatticeTri& nl = lat.lattice[other.first];
        auto& nt = lat.tri[nl.tri];
        int cc = nt[0] == v ? 0 : nt[1] == v ? 1 : 2;
        nb[s] = nl.thick.corner[cc];
      }
      if (!ok) continue;

      Vec2 p1 = lat.vertex[v], p2 = nb[0], p3 = nb[1];
      double orient = (p2 - p1).cross(p3 - p1);
      if (std::abs(orient) < 1e-14) continue;
      if (orient < 0) std::swap(p2, p3);
      Vec2 hat1 = own.thick.corner[c];
      double scale = std::abs(orient);
      bool inside = (p2 - p1).cross(hat1 - p1) > 1e-10 * scale &&
                    (p3 - p2).cross(hat1 - p2) > 1e-10 * scale &&
                    (p1 - p3).cross(hat1 - p3) > 1e-10 * scale;
      if (!inside) continue;

      // clip the own void at the chord between the neighbors' corners
      std::array<Vec2, 2> q;
      bool valid = true;
      for (int s = 0; s < 2; ++s) {
        Vec2 far = own.thick.corner[(c + 1 + s) % 3];
        Vec2 r = far - hat1, g = p3 - p2;
        double det = r.cross(g);
        if (std::abs(det) < 1e-14) {
          valid = false;
          break;
        }
        double sv = (p2 - hat1).cross(g) / det;   // along the void edge
        double uv = (p2 - hat1).cross(r) / det;   // along the chord
        if (sv < -1e-9 || sv > 1 + 1e-9 || uv < -1e-9 || uv > 1 + 1e-9) {
          valid = false;
          break;
        }
        q[s] = hat1 + r * std::clamp(sv, 0.0, 1.0);
      }
      if (!valid) continue;

      LatticePatch patch;
      patch.vertex = v;
      patch.p = {hat1, q[0], q[1]};
      double area = tri_area(patch.p[0], patch.p[1], patch.p[2]);
      if (area < 0) {
        std::swap(patch.p[1], patch.p[2]);
        area = -area;
      }
      if (area <= 1e-12) continue;
      lat.patch.push_back(patch);
    }
  }
}

}  // namespace

BinnedDesign bin_cells(const GridProblem& sim, const DesignField& phys,
                       const FieldAlignedMesh& mesh, int min_samples) {
  if (mesh.tri.empty()) throw ValidationError("binning: empty mesh");
  if (min_samples < 1) throw ValidationError("binning: min_samples must be positive");
  if (phys.nx != sim.nx || phys.ny != sim.ny)
    throw ValidationError("binning: design field does not match the problem grid");

  BinnedDesign out;
  for (int j = 0; j < sim.ny; ++j)
    for (int i = 0; i < sim.nx; ++i)
      if (sim.active[sim.cell(i, j)]) {
        out.domain_area += 1.0;
        out.domain_density_sum += volume_fraction(phys.cells[phys.cell(i, j)].alpha);
      }
  if (out.domain_area <= 0) throw ValidationError("binning: no active cells");

  TriLocator locator(mesh, sim.nx, sim.ny);
  for (int r = 1; r <= 16; r *= 2) {
    out.budget.assign(mesh.tri.size(), TriangleBudget{});
    out.refine = r;
    for (int j = 0; j < sim.ny * r; ++j)
      for (int i = 0; i < sim.nx * r; ++i) {
        if (!sim.active[sim.cell(i / r, j / r)]) continue;
        double x = (i + 0.5) / r, y = (j + 0.5) / r;
        int t = locator.find({x, y});
        if (t < 0) continue;
        LaminateSpec spec =
            r == 1 ? phys.cells[phys.cell(i, j)] : sample_field(sim, phys, x, y);
        std::array<double, 3> dep = layer_densities(spec.alpha);
        std::array<double, 3> tan = spec.layer_tangents();
        TriangleBudget& b = out.budget[t];
        b.samples += 1;
        for (int n = 0; n < 3; ++n) {
          b.density_sum += dep[n];
          b.dep[n] += dep[n];
          b.dir2[n] += dep[n] * Vec2{std::cos(2 * tan[n]), std::sin(2 * tan[n])};
        }
      }
    bool enough = true;
    for (const auto& b : out.budget) enough = enough && b.samples >= min_samples;
    if (enough) break;
    if (r == 16) {
      for (size_t t = 0; t < out.budget.size(); ++t)
        if (out.budget[t].samples < min_samples)
          throw ValidationError("binning: triangle " + std::to_string(t) +
                                " covers too little of the active domain");
    }
  }
  for (auto& b : out.budget) b.target_ratio = b.density_sum / b.samples;
  return out;
}

std::array<double, 3> representative_widths(const TriangleBudget& budget) {
  double peak = std::max({budget.dep[0], budget.dep[1], budget.dep[2]});
  if (peak <= 0) throw ValidationError("widths: all layer depositions vanish");
  return {budget.dep[0] / peak, budget.dep[1] / peak, budget.dep[2] / peak};
}

std::array<double, 3> representative_orientations(const TriangleBudget& budget,
                                                  const std::array<double, 3>& fallback_dirs) {
  std::array<double, 3> out;
  for (int n = 0; n < 3; ++n) {
    Vec2 acc = budget.dir2[n];
    if (acc.norm() > 1e-12)
      out[n] = wrap_angle(0.5 * std::atan2(acc.y, acc.x), kPi);
    else
      out[n] = fallback_dirs[n];
  }
  return out;
}

std::array<int, 3> match_edges(const std::array<double, 3>& edge_dirs,
                               const std::array<double, 3>& tangents) {
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::array<int, 3> best{0, 1, 2};
  double best_cost = 1e300;
  for (const auto& p : kPerms) {
    double cost = 0;
    for (int e = 0; e < 3; ++e) cost += angle_dist(edge_dirs[e], tangents[p[e]], kPi);
    // lex order of kPerms makes the first minimum the lexicographic winner
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best = {p[0], p[1], p[2]};
    }
  }
  return best;
}

ThicknessSolution solve_thickness(const std::array<Vec2, 3>& tri,
                                  const std::array<double, 3>& edge_scale, double ratio) {
  double A = tri_area(tri[0], tri[1], tri[2]);
  double span = std::max({(tri[1] - tri[0]).norm(), (tri[2] - tri[1]).norm(),
                          (tri[0] - tri[2]).norm()});
  if (!(A > 1e-12 * span * span)) throw ValidationError("thickness: degenerate triangle");
  double peak = std::max({edge_scale[0], edge_scale[1], edge_scale[2]});
  if (peak <= 0) throw ValidationError("thickness: all edge scales vanish");
  for (double w : edge_scale)
    if (w < 0) throw ValidationError("thickness: negative edge scale");
  ratio = std::clamp(ratio, 0.0, 1.0);

  auto at = [&](double t) {
    return inset_corners(tri, {t * edge_scale[0], t * edge_scale[1], t * edge_scale[2]});
  };
  ThicknessSolution out;
  if (ratio <= 0) {
    out.corner = tri;
    out.void_area = A;
    return out;
  }

  // each corner's slack is linear in t: the void collapses at the first root
  InsetCorners ic0 = at(0), ic1 = at(1);
  double t_solid = 1e300;
  for (int k = 0; k < 3; ++k) {
    double drop = ic0.slack[k] - ic1.slack[k];
    if (drop > 0) t_solid = std::min(t_solid, ic0.slack[k] / drop);
  }
  if (!(t_solid > 0) || t_solid == 1e300)
    throw NumericalError("thickness: void never collapses");

  if (ratio >= 1 - 1e-9) {
    out.t = t_solid;
    out.solid = true;
    InsetCorners ic = at(t_solid);
    out.corner = ic.corner;
    out.void_area = 0;
    for (int e = 0; e < 3; ++e) out.inset[e] = t_solid * edge_scale[e];
    return out;
  }

  double lo = 0, hi = t_solid;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    double realized = (A - std::max(0.0, at(mid).signed_area)) / A;
    (realized < ratio ? lo : hi) = mid;
  }
  out.t = 0.5 * (lo + hi);
  InsetCorners ic = at(out.t);
  out.corner = ic.corner;
  out.void_area = std::max(0.0, ic.signed_area);
  for (int e = 0; e < 3; ++e) out.inset[e] = out.t * edge_scale[e];
  return out;
}

void fill_gaps(LatticeDesign& lat) {
  build_patches(lat);
  if (!lat.patch.empty()) {
    double budget = 0, added = 0;
    for (const auto& lt : lat.lattice) {
      auto& t = lat.tri[lt.tri];
      budget += lt.ratio * tri_area(lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]]);
    }
    for (const auto& pa : lat.patch) added += tri_area(pa.p[0], pa.p[1], pa.p[2]);
    if (budget > 0) {
      double f = std::max(0.0, (budget - added) / budget);
      for (auto& lt : lat.lattice) {
        lt.ratio *= f;
        auto& t = lat.tri[lt.tri];
        lt.thick = solve_thickness(
            {lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]]}, lt.scale, lt.ratio);
      }
      build_patches(lat);  // final geometry
    }
  }
  refresh_areas(lat);
}

LatticeDesign dehomogenize(const GridProblem& sim, const DesignField& phys,
                           const FieldAlignedMesh& mesh, const DehomogConfig& config) {
  if (config.drop_ratio < 0 || config.drop_ratio >= 1)
    throw ValidationError("dehomog: drop_ratio must be in [0, 1)");
  mesh.validate();
  BinnedDesign bin = bin_cells(sim, phys, mesh, config.min_samples);

  LatticeDesign lat;
  lat.problem = mesh.problem;
  lat.h = mesh.h;
  lat.domain_area = bin.domain_area;
  lat.vertex = mesh.vertex;
  lat.tri = mesh.tri;

  for (size_t t = 0; t < mesh.tri.size(); ++t) {
    const TriangleBudget& b = bin.budget[t];
    if (b.target_ratio < config.drop_ratio) continue;
    std::array<Vec2, 3> pts{lat.vertex[mesh.tri[t][0]], lat.vertex[mesh.tri[t][1]],
                            lat.vertex[mesh.tri[t][2]]};
    std::array<double, 3> edge_dirs;
    for (int e = 0; e < 3; ++e) {
      Vec2 g = pts[(e + 2) % 3] - pts[(e + 1) % 3];
      edge_dirs[e] = wrap_angle(std::atan2(g.y, g.x), kPi);
    }
    std::array<double, 3> widths = representative_widths(b);
    std::array<double, 3> tangents = representative_orientations(b, edge_dirs);
    std::array<int, 3> layer = match_edges(edge_dirs, tangents);
    LatticeTri lt;
    lt.tri = int(t);
    lt.ratio = b.target_ratio;
    lt.layer = layer;
    for (int e = 0; e < 3; ++e) lt.scale[e] = widths[layer[e]];
    lat.lattice.push_back(lt);
  }

  if (config.conserve_total && !lat.lattice.empty()) {
    // carry the material of the whole active domain, including cells the
    // kept triangles never covered, so the realized volume matches the
    // optimized field's mean density
    double covered = 0;
    for (const auto& lt : lat.lattice) {
      auto& t = lat.tri[lt.tri];
      covered += lt.ratio * tri_area(lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]]);
    }
    if (covered > 0) {
      double f = bin.domain_density_sum / covered;
      for (auto& lt : lat.lattice) lt.ratio = std::min(1.0, lt.ratio * f);
    }
  }

  for (auto& lt : lat.lattice) {
    auto& t = lat.tri[lt.tri];
    lt.thick = solve_thickness({lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]]},
                               lt.scale, lt.ratio);
  }

  if (config.fill_gaps)
    fill_gaps(lat);
  else
    refresh_areas(lat);

  // both-side inset records for every mesh edge
  std::map<std::pair<int, int>, std::pair<double, double>> sides;
  for (const auto& lt : lat.lattice) {
    auto& t = lat.tri[lt.tri];
    for (int e = 0; e < 3; ++e) {
      int va = t[(e + 1) % 3], vb = t[(e + 2) % 3], vc = t[e];
      auto key = std::minmax(va, vb);
      Vec2 g = lat.vertex[key.second] - lat.vertex[key.first];
      bool left = g.cross(lat.vertex[vc] - lat.vertex[key.first]) > 0;
      auto& rec = sides[key];
      (left ? rec.first : rec.second) = lt.thick.inset[e];
    }
  }
  for (const MeshEdge& e : mesh.edge) {
    LatticeEdgeRecord rec;
    rec.a = e.a;
    rec.b = e.b;
    rec.cls = e.cls;
    auto it = sides.find({e.a, e.b});
    if (it != sides.end()) {
      rec.inset_left = it->second.first;
      rec.inset_right = it->second.second;
    }
    lat.edge.push_back(rec);
  }

  lat.validate();
  return lat;
}

void LatticeDesign::validate() const {
  if (!(h > 0)) throw ValidationError("lattice: edge length must be positive");
  if (domain_area < 0) throw ValidationError("lattice: negative domain area");
  int nv = int(vertex.size());
  for (const Vec2& v : vertex)
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw ValidationError("lattice: non-finite vertex");
  for (const auto& t : tri)
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= nv) throw ValidationError("lattice: triangle index out of range");
  std::vector<char> used(tri.size(), 0);
  for (const auto& lt : lattice) {
    if (lt.tri < 0 || lt.tri >= int(tri.size()))
      throw ValidationError("lattice: mesh triangle index out of range");
    if (used[lt.tri]++) throw ValidationError("lattice: duplicate mesh triangle");
    if (!(lt.ratio >= 0 && lt.ratio <= 1 + 1e-9))
      throw ValidationError("lattice: deposition ratio out of range");
    std::array<int, 3> seen{0, 0, 0};
    for (int e = 0; e < 3; ++e) {
      if (!(lt.scale[e] >= 0 && lt.scale[e] <= 1 + 1e-9))
        throw ValidationError("lattice: edge scale out of range");
      if (lt.layer[e] < 0 || lt.layer[e] > 2 || seen[lt.layer[e]]++)
        throw ValidationError("lattice: edge-layer assignment is not a bijection");
      if (lt.thick.inset[e] < 0) throw ValidationError("lattice: negative inset");
    }
    if (lt.thick.void_area < 0) throw ValidationError("lattice: negative void area");
  }
  for (const auto& e : edge) {
    if (e.a < 0 || e.b >= nv || e.a >= e.b)
      throw ValidationError("lattice: bad edge endpoints");
    if (e.cls < 0 || e.cls > 2) throw ValidationError("lattice: bad edge class");
    if (e.inset_left < 0 || e.inset_right < 0)
      throw ValidationError("lattice: negative edge inset");
  }
  for (const auto& pa : patch) {
    if (pa.vertex < 0 || pa.vertex >= nv)
      throw ValidationError("lattice: patch vertex out of range");
    if (!(tri_area(pa.p[0], pa.p[1], pa.p[2]) > 0))
      throw ValidationError("lattice: patch is not positively oriented");
  }
  if (domain_area > 0 &&
      std::abs(solid_area - volume * domain_area) > 1e-6 * std::max(1.0, solid_area))
    throw ValidationError("lattice: volume and solid area disagree");
}

void save_lattice(const std::string& path, const LatticeDesign& lat) {
  std::ostringstream out;
  out << "trilat-lattice 1\n";
  out << "problem " << lat.problem << "\n";
  out << "h " << fmt_g17(lat.h) << "\n";
  out << "domain_area " << fmt_g17(lat.domain_area) << "\n";
  out << "solid_area " << fmt_g17(lat.solid_area) << "\n";
  out << "volume " << fmt_g17(lat.volume) << "\n";
  out << "vertices " << lat.vertex.size() << "\n";
  for (const Vec2& v : lat.vertex) out << fmt_g17(v.x) << " " << fmt_g17(v.y) << "\n";
  out << "triangles " << lat.tri.size() << "\n";
  for (const auto& t : lat.tri) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "lattices " << lat.lattice.size() << "\n";
  for (const auto& lt : lat.lattice) {
    out << lt.tri << " " << fmt_g17(lt.ratio);
    for (int e = 0; e < 3; ++e) out << " " << fmt_g17(lt.scale[e]);
    for (int e = 0; e < 3; ++e) out << " " << lt.layer[e];
    out << " " << fmt_g17(lt.thick.t);
    for (int e = 0; e < 3; ++e) out << " " << fmt_g17(lt.thick.inset[e]);
    for (int e = 0; e < 3; ++e)
      out << " " << fmt_g17(lt.thick.corner[e].x) << " " << fmt_g17(lt.thick.corner[e].y);
    out << " " << fmt_g17(lt.thick.void_area) << " " << int(lt.thick.solid) << "\n";
  }
  out << "edges " << lat.edge.size() << "\n";
  for (const auto& e : lat.edge)
    out << e.a << " " << e.b << " " << e.cls << " " << fmt_g17(e.inset_left) << " "
        << fmt_g17(e.inset_right) << "\n";
  out << "patches " << lat.patch.size() << "\n";
  for (const auto& pa : lat.patch) {
    out << pa.vertex;
    for (int k = 0; k < 3; ++k) out << " " << fmt_g17(pa.p[k].x) << " " << fmt_g17(pa.p[k].y);
    out << "\n";
  }
  out << "end\n";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("lattice: cannot open " + path + " for writing");
  f << out.str();
}

LatticeDesign load_lattice(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("lattice: cannot open " + path);
  auto bad = [&](const std::string& m) { return ValidationError("lattice file: " + m); };
  std::string tok;
  int version = 0;
  if (!(f >> tok >> version) || tok != "trilat-lattice") throw bad("missing header");
  if (version != 1) throw bad("unsupported version");
  LatticeDesign lat;
  if (!(f >> tok >> lat.problem) || tok != "problem") throw bad("missing problem name");
  if (!(f >> tok >> lat.h) || tok != "h") throw bad("missing edge length");
  if (!(f >> tok >> lat.domain_area) || tok != "domain_area") throw bad("missing domain area");
  if (!(f >> tok >> lat.solid_area) || tok != "solid_area") throw bad("missing solid area");
  if (!(f >> tok >> lat.volume) || tok != "volume") throw bad("missing volume");
  size_t nv = 0, nt = 0, nl = 0, ne = 0, np = 0;
  if (!(f >> tok >> nv) || tok != "vertices") throw bad("missing vertices");
  lat.vertex.resize(nv);
  for (auto& v : lat.vertex)
    if (!(f >> v.x >> v.y)) throw bad("truncated vertices");
  if (!(f >> tok >> nt) || tok != "triangles") throw bad("missing triangles");
  lat.tri.resize(nt);
  for (auto& t : lat.tri)
    if (!(f >> t[0] >> t[1] >> t[2])) throw bad("truncated triangles");
  if (!(f >> tok >> nl) || tok != "lattices") throw bad("missing lattices");
  lat.lattice.resize(nl);
  for (auto& lt : lat.lattice) {
    int solid = 0;
    bool ok = bool(f >> lt.tri >> lt.ratio);
    for (int e = 0; e < 3; ++e) ok = ok && bool(f >> lt.scale[e]);
    for (int e = 0; e < 3; ++e) ok = ok && bool(f >> lt.layer[e]);
    ok = ok && bool(f >> lt.thick.t);
    for (int e = 0; e < 3; ++e) ok = ok && bool(f >> lt.thick.inset[e]);
    for (int e = 0; e < 3; ++e) ok = ok && bool(f >> lt.thick.corner[e].x >> lt.thick.corner[e].y);
    ok = ok && bool(f >> lt.thick.void_area >> solid);
    if (!ok) throw bad("truncated lattices");
    lt.thick.solid = solid != 0;
  }
  if (!(f >> tok >> ne) || tok != "edges") throw bad("missing edges");
  lat.edge.resize(ne);
  for (auto& e : lat.edge)
    if (!(f >> e.a >> e.b >> e.cls >> e.inset_left >> e.inset_right))
      throw bad("truncated edges");
  if (!(f >> tok >> np) || tok != "patches") throw bad("missing patches");
  lat.patch.resize(np);
  for (auto& pa : lat.patch) {
    bool ok = bool(f >> pa.vertex);
    for (int k = 0; k < 3; ++k) ok = ok && bool(f >> pa.p[k].x >> pa.p[k].y);
    if (!ok) throw bad("truncated patches");
  }
  if (!(f >> tok) || tok != "end") throw bad("missing end marker");
  lat.validate();
  return lat;
}

}  // namespace trilat
