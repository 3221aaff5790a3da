#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trilat/fea.hpp"
#include "trilat/optimizer.hpp"

namespace trilat {

// The active-cell region seen as geometry: cells are unit squares, the
// outline is the set of edges between active and non-active cells.
struct DomainMask {
  int nx = 0, ny = 0;
  std::vector<uint8_t> active;
  double area = 0;                              // active cell count x unit area
  std::vector<std::array<Vec2, 2>> outline;     // outline segments

  explicit DomainMask(const GridProblem& sim);
  int cell(int i, int j) const { return j * nx + i; }
  bool inside(Vec2 p) const;                    // containing cell is active
  double outline_distance(Vec2 p) const;
  Vec2 project_to_outline(Vec2 p) const;
};

// Six-fold symmetric direction field: one representative tangent angle in
// [0, pi/3) per cell; the six expanded directions are the three layer
// tangents and their opposites.
struct RoSyField {
  int nx = 0, ny = 0;
  std::vector<uint8_t> valid;
  std::vector<double> rep;

  int cell(int i, int j) const { return j * nx + i; }
  int nearest_valid(Vec2 p) const;              // ring search, deterministic
  double at(Vec2 p) const { return rep[nearest_valid(p)]; }
};

// min_k |a - b + k pi/3| reduced to [0, pi/6]
double rosy_deviation(double a, double b);
// sum of squared deviations over 4-neighbor pairs of valid cells
double rosy_energy(const RoSyField& field);

// Representative = layer-3 tangent (theta3 + pi/2) reduced mod pi/3, then
// `smoothing_iters` Gauss-Seidel sweeps, each cell clamped to a pi/12 trust
// region around its input value. Energy is non-increasing per sweep.
RoSyField build_rosy(const DesignField& design, int smoothing_iters);

// One movable sample per init-grid cell (spacing tuned to the lattice vertex
// density), seeded breadth-first onto a globally consistent lattice of
// spacing h. Gauss-Seidel sweeps move each sample to the mean of its
// neighbors' positions snapped to the sample's local lattice, re-rounded
// onto the lattice through the sample's seeded site; the final few sweeps
// run unrounded to spread residual strain. Samples seeded within half a
// step of the outline are constrained onto it; free samples are projected
// back only if an update leaves the domain.
struct PositionField {
  double h = 0;
  std::vector<Vec2> pos;
  std::vector<uint8_t> boundary;                // projected onto the outline
  std::vector<int> neighbor_offsets, neighbor_list;  // init-grid adjacency
};
PositionField optimize_positions(const GridProblem& sim, const RoSyField& rosy, double h,
                                 int iters, uint64_t seed);

struct MeshEdge {
  int a = 0, b = 0;    // a < b
  int cls = 0;         // tangent family 0..2 (layer with least deviation)
};

struct FieldAlignedMesh {
  std::string problem;
  double h = 0;
  std::vector<Vec2> vertex;
  std::vector<std::array<int, 3>> tri;          // counterclockwise
  std::vector<MeshEdge> edge;
  std::vector<std::array<int, 3>> tri_edge;     // edge opposite each corner

  int find_edge(int a, int b) const;            // -1 if absent
  void validate() const;                        // indices, orientation, edge cover
};

// Edge length whose equilateral-triangle area tiles the active area into
// `target_lattices` triangles: h = sqrt(4 A / (sqrt(3) N)).
double edge_length_target(const GridProblem& sim, int target_lattices);

// Collapse coincident samples (0.3h), connect lattice-step pairs (0.3h along
// any of the six directions), extract faces from the planar embedding, fill
// interior holes, triangulate, drop triangles covering no active cell.
FieldAlignedMesh extract_mesh(const GridProblem& sim, const RoSyField& rosy,
                              const PositionField& pos);

struct TriangulateConfig {
  int target_lattices = 0;     // one of target_lattices / edge_length required
  double edge_length = 0;
  int smooth_iters = 2;
  int position_iters = 100;
  uint64_t seed = 1;
};

// build_rosy -> optimize_positions -> extract_mesh on the filtered design
FieldAlignedMesh triangulate_design(const GridProblem& sim, const DesignField& phys,
                                    const TriangulateConfig& config);

void save_mesh(const std::string& path, const FieldAlignedMesh& mesh);
FieldAlignedMesh load_mesh(const std::string& path);

}  // namespace trilat
