#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "trilat/dehomog.hpp"

using namespace trilat;

namespace {

GridProblem bare_grid(int nx, int ny) {
  GridProblem p;
  p.name = "grid";
  p.nx = nx;
  p.ny = ny;
  p.active.assign(nx * ny, 1);
  p.fixed_x.assign(p.num_nodes(), 0);
  p.fixed_y.assign(p.num_nodes(), 0);
  for (int j = 0; j <= ny; ++j) {
    p.fixed_x[p.node(0, j)] = 1;
    p.fixed_y[p.node(0, j)] = 1;
  }
  p.loads.assign(1, Eigen::VectorXd::Zero(2 * p.num_nodes()));
  p.weights.assign(1, 1.0);
  p.loads[0][2 * p.node(nx, ny) + 1] = -1.0;
  return p;
}

DesignField constant_design(int nx, int ny, std::array<double, 3> alpha, double theta3) {
  DesignField d;
  d.nx = nx;
  d.ny = ny;
  d.active.assign(nx * ny, 1);
  d.cells.assign(nx * ny, LaminateSpec{alpha, theta3});
  return d;
}

// Hand-built mesh: fills the edge and corner tables from vertex triples.
FieldAlignedMesh make_mesh(std::vector<Vec2> verts, std::vector<std::array<int, 3>> tris,
                           double h) {
  FieldAlignedMesh m;
  m.problem = "hand";
  m.h = h;
  m.vertex = std::move(verts);
  m.tri = std::move(tris);
  m.tri_edge.assign(m.tri.size(), {-1, -1, -1});
  for (size_t t = 0; t < m.tri.size(); ++t)
    for (int c = 0; c < 3; ++c) {
      auto [lo, hi] = std::minmax(m.tri[t][(c + 1) % 3], m.tri[t][(c + 2) % 3]);
      int id = m.find_edge(lo, hi);
      if (id < 0) {
        id = int(m.edge.size());
        m.edge.push_back({lo, hi, 0});
      }
      m.tri_edge[t][c] = id;
    }
  m.validate();
  return m;
}

// Two triangles covering the full [0,nx]x[0,ny] rectangle.
FieldAlignedMesh cover_mesh(int nx, int ny) {
  return make_mesh({{0, 0}, {double(nx), 0}, {double(nx), double(ny)}, {0, double(ny)}},
                   {{0, 1, 2}, {0, 2, 3}}, std::hypot(nx, ny));
}

bool in_tri(Vec2 p, Vec2 a, Vec2 b, Vec2 c, double eps) {
  return (b - a).cross(p - a) >= eps && (c - b).cross(p - b) >= eps &&
         (a - c).cross(p - c) >= eps;
}

// How many solid primitives (triangle strut bands, patches) claim the point.
int claims(const LatticeDesign& lat, Vec2 p) {
  int n = 0;
  for (const auto& lt : lat.lattice) {
    auto& t = lat.tri[lt.tri];
    if (!in_tri(p, lat.vertex[t[0]], lat.vertex[t[1]], lat.vertex[t[2]], -1e-12)) continue;
    bool hollow = !lt.thick.solid && lt.thick.void_area > 0 &&
                  in_tri(p, lt.thick.corner[0], lt.thick.corner[1], lt.thick.corner[2], 1e-12);
    if (!hollow) ++n;
  }
  for (const auto& pa : lat.patch)
    if (in_tri(p, pa.p[0], pa.p[1], pa.p[2], 1e-12)) ++n;
  return n;
}

double solid_fraction(const LatticeDesign& lat, const LatticeTri& lt, int raster) {
  auto& t = lat.tri[lt.tri];
  Vec2 a = lat.vertex[t[0]], b = lat.vertex[t[1]], c = lat.vertex[t[2]];
  // centroids of the raster^2 equal-area subtriangles: unbiased quadrature
  int solid = 0, total = 0;
  auto tap = [&](double u, double v) {
    Vec2 p = a + (b - a) * u + (c - a) * v;
    ++total;
    bool hollow = !lt.thick.solid && lt.thick.void_area > 0 &&
                  in_tri(p, lt.thick.corner[0], lt.thick.corner[1], lt.thick.corner[2], 0);
    if (!hollow) ++solid;
  };
  for (int i = 0; i < raster; ++i)
    for (int j = 0; j < raster - i; ++j) {
      tap((i + 1.0 / 3) / raster, (j + 1.0 / 3) / raster);
      if (i + j < raster - 1) tap((i + 2.0 / 3) / raster, (j + 2.0 / 3) / raster);
    }
  REQUIRE(total == raster * raster);
  return double(solid) / total;
}

}  // namespace

TEST_CASE("per-layer depositions follow the sequential construction") {
  // one triangle pair covering an 8x8 constant field: alpha (0.5,0.5,0.5)
  // deposits (0.125, 0.25, 0.5) per cell, so max-normalized widths are
  // (0.25, 0.5, 1.0) regardless of the cell count
  GridProblem sim = bare_grid(8, 8);
  DesignField d = constant_design(8, 8, {0.5, 0.5, 0.5}, 0.3);
  FieldAlignedMesh mesh = cover_mesh(8, 8);
  BinnedDesign bin = bin_cells(sim, d, mesh, 10);
  REQUIRE(bin.budget.size() == 2);
  CHECK(bin.refine == 1);
  CHECK(bin.budget[0].samples + bin.budget[1].samples == 64);
  for (const auto& b : bin.budget) {
    CHECK(b.target_ratio == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(b.dep[0] == doctest::Approx(0.125 * b.samples).epsilon(1e-12));
    CHECK(b.dep[1] == doctest::Approx(0.25 * b.samples).epsilon(1e-12));
    CHECK(b.dep[2] == doctest::Approx(0.5 * b.samples).epsilon(1e-12));
    auto w = representative_widths(b);
    CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(1.0).epsilon(1e-12));
  }

  // random field: depositions match an independent per-cell summation
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  DesignField r = constant_design(8, 8, {0, 0, 0}, 0);
  std::array<double, 2> rho_sum{0, 0};
  std::array<std::array<double, 3>, 2> dep_sum{{{0, 0, 0}, {0, 0, 0}}};
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      std::array<double, 3> a{U(rng), U(rng), U(rng)};
      r.cells[r.cell(i, j)] = LaminateSpec{a, U(rng)};
    }
  BinnedDesign rb = bin_cells(sim, r, mesh, 10);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      Vec2 p{i + 0.5, j + 0.5};
      int owner = in_tri(p, mesh.vertex[0], mesh.vertex[1], mesh.vertex[2], -1e-12) ? 0 : 1;
      auto a = r.cells[r.cell(i, j)].alpha;
      double h1 = (1 - a[2]) * (1 - a[1]) * a[0];
      double h2 = (1 - a[2]) * a[1];
      double h3 = a[2];
      rho_sum[owner] += h1 + h2 + h3;
      dep_sum[owner][0] += h1;
      dep_sum[owner][1] += h2;
      dep_sum[owner][2] += h3;
    }
  for (int k = 0; k < 2; ++k) {
    CHECK(rb.budget[k].density_sum == doctest::Approx(rho_sum[k]).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      CHECK(rb.budget[k].dep[i] == doctest::Approx(dep_sum[k][i]).epsilon(1e-12));
  }
  CHECK(rb.domain_density_sum == doctest::Approx(rho_sum[0] + rho_sum[1]).epsilon(1e-12));

  TriangleBudget dead;
  dead.samples = 4;
  CHECK_THROWS_AS((void)representative_widths(dead), ValidationError);
}

TEST_CASE("representative orientations average in doubled-angle space") {
  TriangleBudget b;
  b.samples = 2;
  auto feed = [&](int layer, double tangent, double weight) {
    b.dep[layer] += weight;
    b.dir2[layer] += weight * Vec2{std::cos(2 * tangent), std::sin(2 * tangent)};
  };
  // opposite tangents describe the same line: theta, not theta + pi/2
  feed(0, 0.4, 1.0);
  feed(0, 0.4 + kPi, 1.0);
  feed(1, 1.1 - kPi / 18, 1.0);
  feed(1, 1.1 + kPi / 18, 1.0);
  feed(2, 2.9, 2.0);
  std::array<double, 3> fb{0.1, 0.2, 0.3};
  auto t = representative_orientations(b, fb);
  CHECK(t[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(t[1] == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(t[2] == doctest::Approx(wrap_angle(2.9, kPi)).epsilon(1e-12));

  TriangleBudget z;
  z.samples = 1;
  z.dep = {1.0, 0, 0};
  z.dir2[0] = {1.0, 0};
  auto f = representative_orientations(z, fb);
  CHECK(f[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f[1] == doctest::Approx(0.2).epsilon(1e-12));  // zero weight: edge direction
  CHECK(f[2] == doctest::Approx(0.3).epsilon(1e-12));

  // through binning: raw theta3 values a half-turn apart give the same lines
  GridProblem sim = bare_grid(2, 1);
  DesignField d = constant_design(2, 1, {0.3, 0.3, 0.3}, 0.25);
  d.cells[1].theta3 = 0.25 + kPi;
  FieldAlignedMesh mesh = cover_mesh(2, 1);
  BinnedDesign bin = bin_cells(sim, d, mesh, 1);
  auto tangents = LaminateSpec{{0.3, 0.3, 0.3}, 0.25}.layer_tangents();
  for (const auto& bud : bin.budget) {
    if (!bud.samples) continue;
    auto got = representative_orientations(bud, fb);
    for (int i = 0; i < 3; ++i)
      CHECK(angle_dist(got[i], tangents[i], kPi) < 1e-9);
  }
}

TEST_CASE("edge matching is optimal with stable ties") {
  // edges of an equilateral triangle point at 90, 150, 30 degrees
  std::array<double, 3> dirs{kPi / 2, kPi * 5 / 6, kPi / 6};
  auto perm = match_edges(dirs, {dirs[0], dirs[1], dirs[2]});
  CHECK(perm == std::array<int, 3>{0, 1, 2});
  // a small rotation of all tangents keeps the assignment
  auto perm5 = match_edges(dirs, {dirs[0] + kPi / 36, dirs[1] + kPi / 36, dirs[2] + kPi / 36});
  CHECK(perm5 == perm);
  auto swapped = match_edges(dirs, {dirs[1], dirs[2], dirs[0]});
  CHECK(swapped == std::array<int, 3>{2, 0, 1});

  // each tangent sits 30 degrees from two edges, so two bijections tie at
  // the minimum; the lexicographically smallest assignment wins
  std::array<double, 3> mid{kPi / 3, 0.0, 2 * kPi / 3};
  auto tie = match_edges(dirs, mid);
  CHECK(tie == std::array<int, 3>{0, 2, 1});

  // brute-force oracle on random instances
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> U(0, kPi);
  constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int it = 0; it < 300; ++it) {
    std::array<double, 3> e{U(rng), U(rng), U(rng)};
    std::array<double, 3> t{U(rng), U(rng), U(rng)};
    auto got = match_edges(e, t);
    double got_cost = 0;
    for (int k = 0; k < 3; ++k) got_cost += angle_dist(e[k], t[got[k]], kPi);
    double best = 1e30;
    for (auto& p : kPerms) {
      double c = angle_dist(e[0], t[p[0]], kPi) + angle_dist(e[1], t[p[1]], kPi) +
                 angle_dist(e[2], t[p[2]], kPi);
      best = std::min(best, c);
    }
    CHECK(got_cost == doctest::Approx(best).epsilon(1e-12));
    for (auto& p : kPerms) {
      double c = angle_dist(e[0], t[p[0]], kPi) + angle_dist(e[1], t[p[1]], kPi) +
                 angle_dist(e[2], t[p[2]], kPi);
      if (c < got_cost - 1e-12) FAIL("missed better assignment");
      if (std::abs(c - got_cost) <= 1e-12) {
        // got must not be lexicographically larger than any tied assignment
        std::array<int, 3> q{p[0], p[1], p[2]};
        CHECK(got <= q);
        break;
      }
    }
  }
}

TEST_CASE("thickness bisection matches the equilateral closed form") {
  for (double L : {1.0, 5.8, 22.0}) {
    std::array<Vec2, 3> tri{Vec2{0, 0}, Vec2{L, 0}, Vec2{L / 2, L * std::sqrt(3.0) / 2}};
    double r = L / (2 * std::sqrt(3.0));
    double A = std::sqrt(3.0) / 4 * L * L;
    for (double rho : {0.05, 0.2, 0.5, 0.875, 0.95}) {
      ThicknessSolution s = solve_thickness(tri, {1, 1, 1}, rho);
      double expect = r * (1 - std::sqrt(1 - rho));
      CHECK(std::abs(s.t - expect) <= 1e-9 * std::max(1.0, expect));
      CHECK(s.inset[0] + s.inset[1] + s.inset[2] == doctest::Approx(3 * s.t).epsilon(1e-12));
      CHECK(std::abs(s.void_area / A - (1 - rho)) <= 1e-9);
      CHECK(!s.solid);
    }
    ThicknessSolution zero = solve_thickness(tri, {1, 1, 1}, 0.0);
    CHECK(zero.t == 0.0);
    CHECK(zero.void_area == doctest::Approx(A).epsilon(1e-12));
    ThicknessSolution full = solve_thickness(tri, {1, 1, 1}, 1.0);
    CHECK(full.solid);
    CHECK(full.void_area == 0.0);
    CHECK(full.t == doctest::Approx(r).epsilon(1e-9));
  }

  // scalene triangles, uneven scales: the realized ratio still matches and
  // the inset ordering follows the scale ordering
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0, 1);
  for (int it = 0; it < 200; ++it) {
    std::array<Vec2, 3> tri{Vec2{0, 0}, Vec2{3 + 4 * U(rng), 0}, Vec2{4 * U(rng) - 1, 2 + 3 * U(rng)}};
    std::array<double, 3> w{U(rng), U(rng), 1.0};
    if (it % 4 == 0) w[0] = 0;       // a dead layer leaves its edge open
    if (it % 8 == 0) w[1] = 0;
    double rho = 0.05 + 0.9 * U(rng);
    ThicknessSolution s = solve_thickness(tri, w, rho);
    double A = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    double void_indep = std::max(0.0, 0.5 * (s.corner[1] - s.corner[0]).cross(s.corner[2] - s.corner[0]));
    CHECK(s.void_area == doctest::Approx(void_indep).epsilon(1e-9));
    CHECK(std::abs((A - s.void_area) / A - rho) <= 1e-9);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (w[a] < w[b]) CHECK(s.inset[a] <= s.inset[b] + 1e-12);
    ThicknessSolution s2 = solve_thickness(tri, w, std::min(1.0, rho + 0.03));
    CHECK(s2.t >= s.t - 1e-12);
  }

  std::array<Vec2, 3> degen{Vec2{0, 0}, Vec2{1, 0}, Vec2{2, 0}};
  CHECK_THROWS_AS((void)solve_thickness(degen, {1, 1, 1}, 0.5), ValidationError);
}

TEST_CASE("cell binning refines until the sample floor and conserves material") {
  GridProblem sim = bare_grid(3, 3);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  DesignField d = constant_design(3, 3, {0, 0, 0}, 0);
  double rho_total = 0;
  for (auto& c : d.cells) {
    c = LaminateSpec{{U(rng), U(rng), U(rng)}, U(rng)};
    rho_total += volume_fraction(c.alpha);
  }
  FieldAlignedMesh mesh = cover_mesh(3, 3);
  BinnedDesign bin = bin_cells(sim, d, mesh, 10);
  CHECK(bin.refine >= 2);  // 9 coarse cells split across 2 triangles
  for (const auto& b : bin.budget) CHECK(b.samples >= 10);
  // the virtual samples are a bilinear resampling: their mean density stays
  // within the coarse field's range, and full coverage keeps totals close
  double covered = bin.budget[0].density_sum + bin.budget[1].density_sum;
  double per_sample_area = 1.0 / (bin.refine * bin.refine);
  CHECK(covered * per_sample_area == doctest::Approx(rho_total).epsilon(0.05));
  CHECK(bin.domain_density_sum == doctest::Approx(rho_total).epsilon(1e-12));
  CHECK(bin.domain_area == 9.0);

  // a mesh triangle covering no active cell is a degenerate bin
  GridProblem half = bare_grid(4, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 2; i < 4; ++i) half.active[half.cell(i, j)] = 0;
  DesignField hd = constant_design(4, 4, {0.3, 0.3, 0.3}, 0.1);
  hd.active = half.active;
  FieldAlignedMesh off = make_mesh({{2.2, 0.2}, {3.8, 0.2}, {3.0, 3.8}}, {{0, 1, 2}}, 4);
  CHECK_THROWS_AS((void)bin_cells(half, hd, off, 10), ValidationError);

  // inactive cells contribute nothing even when triangles span them
  FieldAlignedMesh whole = cover_mesh(4, 4);
  BinnedDesign hb = bin_cells(half, hd, whole, 1);
  double rho_cell = volume_fraction({0.3, 0.3, 0.3});
  double hsum = 0;
  for (const auto& b : hb.budget) hsum += b.density_sum;
  CHECK(hsum / (hb.refine * hb.refine) == doctest::Approx(8 * rho_cell).epsilon(1e-9));
  for (const auto& b : hb.budget)
    CHECK(b.target_ratio == doctest::Approx(rho_cell).epsilon(1e-9));
}

TEST_CASE("gap filling patches uneven corners and compensates the volume") {
  // regular fan: six equilateral triangles around a center vertex
  std::vector<Vec2> verts{{0, 0}};
  for (int k = 0; k < 6; ++k)
    verts.push_back({4 * std::cos(kPi / 3 * k), 4 * std::sin(kPi / 3 * k)});
  std::vector<std::array<int, 3>> tris;
  for (int k = 0; k < 6; ++k) tris.push_back({0, 1 + k, 1 + (k + 1) % 6});
  FieldAlignedMesh mesh = make_mesh(verts, tris, 4);

  auto assemble = [&](const std::array<double, 6>& ratios) {
    LatticeDesign lat;
    lat.problem = "fan";
    lat.h = 4;
    lat.vertex = mesh.vertex;
    lat.tri = mesh.tri;
    double area_sum = 0;
    for (int k = 0; k < 6; ++k) {
      LatticeTri lt;
      lt.tri = k;
      lt.ratio = ratios[k];
      lt.scale = {1, 1, 1};
      std::array<Vec2, 3> pts{lat.vertex[lat.tri[k][0]], lat.vertex[lat.tri[k][1]],
                              lat.vertex[lat.tri[k][2]]};
      lt.thick = solve_thickness(pts, lt.scale, lt.ratio);
      area_sum += 0.5 * (pts[1] - pts[0]).cross(pts[2] - pts[0]);
      lat.lattice.push_back(lt);
    }
    lat.domain_area = area_sum;
    return lat;
  };

  // equal insets meet flush: nothing to fill
  LatticeDesign flush = assemble({0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
  fill_gaps(flush);
  CHECK(flush.patch.empty());
  CHECK(flush.volume == doctest::Approx(0.4).epsilon(1e-9));

  // a thin triangle between two thick ones: its void corner pokes inside the
  // chord between the neighbors' corners, so the hub gap gets patched
  LatticeDesign gap = assemble({0.9, 0.2, 0.9, 0.3, 0.3, 0.3});
  double target = (0.9 + 0.2 + 0.9 + 3 * 0.3) / 6;
  fill_gaps(gap);
  REQUIRE(gap.patch.size() == 1);
  CHECK(gap.patch[0].vertex == 0);  // rim corners lack two neighbors
  // compensation keeps the total material budget
  CHECK(gap.volume == doctest::Approx(target).epsilon(0.01));
  CHECK(gap.solid_area == doctest::Approx(gap.volume * gap.domain_area).epsilon(1e-9));
  for (const auto& lt : gap.lattice) CHECK(lt.ratio < 0.91);  // scaled down, never up
  // patches live inside their host voids: no point is claimed twice
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(-4, 4);
  for (int it = 0; it < 20000; ++it) {
    Vec2 p{U(rng), U(rng)};
    CHECK(claims(gap, p) <= 1);
  }

  // every patch corner sits on or inside its repaired vertex's triangles
  for (const auto& pa : gap.patch) {
    double area = 0.5 * (pa.p[1] - pa.p[0]).cross(pa.p[2] - pa.p[0]);
    CHECK(area > 0);
    CHECK(area < 0.5 * 16 * std::sqrt(3.0) / 4);
  }
}

TEST_CASE("dehomogenization realizes the optimized material budget") {
  GridProblem sim = bare_grid(30, 26);
  // equal per-layer depositions: alpha (1/3, 1/4, 1/5)... solved so each
  // layer deposits 0.2 of the cell, density 0.6, insets all equal
  std::array<double, 3> alpha{0.2 / (1 - 2 * 0.2), 0.2 / (1 - 0.2), 0.2};
  DesignField d = constant_design(30, 26, alpha, kPi / 2);
  double rho = volume_fraction(alpha);
  CHECK(rho == doctest::Approx(0.6).epsilon(1e-12));

  TriangulateConfig mcfg;
  mcfg.edge_length = 5.0;
  mcfg.position_iters = 120;
  FieldAlignedMesh mesh = triangulate_design(sim, d, mcfg);
  REQUIRE(mesh.tri.size() > 30);

  LatticeDesign lat = dehomogenize(sim, d, mesh);
  lat.validate();
  CHECK(lat.lattice.size() == mesh.tri.size());
  CHECK(lat.volume == doctest::Approx(rho).epsilon(0.005));

  // constant field: a perfectly uniform lattice, same ratio everywhere
  for (const auto& lt : lat.lattice) {
    CHECK(lt.ratio == doctest::Approx(lat.lattice[0].ratio).epsilon(1e-9));
    std::array<double, 3> sorted_scale = lt.scale;
    std::array<double, 3> sorted_inset = lt.thick.inset;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (sorted_scale[a] < sorted_scale[b])
          CHECK(sorted_inset[a] <= sorted_inset[b] + 1e-12);
  }

  // per-triangle conservation at raster resolution
  for (size_t k = 0; k < lat.lattice.size(); k += 7)
    CHECK(std::abs(solid_fraction(lat, lat.lattice[k], 40) - lat.lattice[k].ratio) <= 0.02);

  // no double-claimed material anywhere
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> Ux(0, 30), Uy(0, 26);
  for (int it = 0; it < 10000; ++it) CHECK(claims(lat, {Ux(rng), Uy(rng)}) <= 1);

  // edge records carry each side's inset
  REQUIRE(!lat.edge.empty());
  int two_sided = 0;
  for (const auto& e : lat.edge) {
    CHECK(e.inset_left >= 0);
    CHECK(e.inset_right >= 0);
    if (e.inset_left > 0 && e.inset_right > 0) ++two_sided;
  }
  CHECK(two_sided > int(lat.edge.size()) / 2);

  // everything below the drop threshold vanishes
  DehomogConfig drop;
  drop.drop_ratio = 0.7;
  LatticeDesign bare = dehomogenize(sim, d, mesh, drop);
  CHECK(bare.lattice.empty());
  CHECK(bare.volume == 0.0);

  // single-layer design: only the matched edge thickens
  DesignField mono = constant_design(30, 26, {0.55, 0, 0}, kPi / 2);
  LatticeDesign ml = dehomogenize(sim, mono, mesh);
  for (const auto& lt : ml.lattice) {
    int nonzero = 0;
    for (int e = 0; e < 3; ++e) nonzero += lt.thick.inset[e] > 1e-12;
    CHECK(nonzero == 1);
  }
}

TEST_CASE("lattice files round trip byte-identically") {
  GridProblem sim = bare_grid(12, 10);
  DesignField d = constant_design(12, 10, {0.3, 0.25, 0.2}, 0.7);
  TriangulateConfig mcfg;
  mcfg.edge_length = 4.0;
  mcfg.position_iters = 60;
  FieldAlignedMesh mesh = triangulate_design(sim, d, mcfg);
  LatticeDesign lat = dehomogenize(sim, d, mesh);

  std::string tmp = (std::filesystem::temp_directory_path() / "trilat_lat_").string();
  save_lattice(tmp + "a.txt", lat);
  LatticeDesign back = load_lattice(tmp + "a.txt");
  back.validate();
  CHECK(back.problem == lat.problem);
  CHECK(back.vertex.size() == lat.vertex.size());
  CHECK(back.lattice.size() == lat.lattice.size());
  CHECK(back.patch.size() == lat.patch.size());
  CHECK(back.volume == lat.volume);
  save_lattice(tmp + "b.txt", back);
  std::ifstream f1(tmp + "a.txt"), f2(tmp + "b.txt");
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());

  // rebuilding from the same inputs is bit-stable
  LatticeDesign again = dehomogenize(sim, d, mesh);
  save_lattice(tmp + "c.txt", again);
  std::ifstream f3(tmp + "c.txt");
  std::string s3((std::istreambuf_iterator<char>(f3)), std::istreambuf_iterator<char>());
  CHECK(s1 == s3);

  {
    std::ofstream bad(tmp + "bad.txt");
    bad << "trilat-lattice 2\n";
  }
  CHECK_THROWS_AS((void)load_lattice(tmp + "bad.txt"), ValidationError);
  {
    std::ofstream bad(tmp + "bad.txt");
    bad << "trilat-lattice 1\nproblem x\nh 1\nvertices 2\n0 0\n";
  }
  CHECK_THROWS_AS((void)load_lattice(tmp + "bad.txt"), ValidationError);
}
