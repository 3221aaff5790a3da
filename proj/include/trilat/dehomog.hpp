#pragma once

#include <array>
#include <string>
#include <vector>

#include "trilat/meshing.hpp"

namespace trilat {

// Accumulation of the design cells whose centers a mesh triangle covers.
// dep[i] is the summed per-layer deposition of layer i (the physical share
// each layer adds to the density in the sequential construction); dir2[i]
// is the deposition-weighted sum of doubled layer tangents (cos 2t, sin 2t),
// which makes the average respect the pi-periodicity of line directions.
struct TriangleBudget {
  int samples = 0;
  double density_sum = 0;
  double target_ratio = 0;                 // density_sum / samples
  std::array<double, 3> dep{0, 0, 0};
  std::array<Vec2, 3> dir2{};
};

struct BinnedDesign {
  std::vector<TriangleBudget> budget;      // one per mesh triangle
  int refine = 1;                          // virtual resampling factor used
  double domain_area = 0;                  // active cell count
  double domain_density_sum = 0;           // sum of density over active cells
};

// Assign each active (virtual) cell center to the triangle containing it.
// If any triangle covers fewer than min_samples centers, the design field
// is resampled by masked bilinear interpolation on a refine x refine finer
// virtual grid until every triangle has enough; a triangle that covers no
// center at all is a degenerate-mesh error.
BinnedDesign bin_cells(const GridProblem& sim, const DesignField& phys,
                       const FieldAlignedMesh& mesh, int min_samples = 10);

// Per-layer deposition representatives, normalized by the largest. Errors
// if all three are zero (such triangles must have been dropped earlier).
std::array<double, 3> representative_widths(const TriangleBudget& budget);

// Deposition-weighted average layer tangents in [0, pi). A layer with zero
// accumulated weight falls back to the matching entry of fallback_dirs
// (the triangle's own edge directions).
std::array<double, 3> representative_orientations(const TriangleBudget& budget,
                                                  const std::array<double, 3>& fallback_dirs);

// Edge slot -> layer assignment minimizing the summed pi-periodic deviation
// between edge directions and layer tangents, exhaustive over all six
// bijections; ties break to the lexicographically smallest assignment.
std::array<int, 3> match_edges(const std::array<double, 3>& edge_dirs,
                               const std::array<double, 3>& tangents);

// Inward edge insets d_e = t * scale_e and the void triangle they leave.
// corner[c] is the intersection of the offset lines of the two edges meeting
// at triangle corner c; the void is empty once those corners invert.
struct ThicknessSolution {
  double t = 0;
  std::array<double, 3> inset{0, 0, 0};    // per edge slot (slot e opposite corner e)
  std::array<Vec2, 3> corner{};
  double void_area = 0;
  bool solid = false;
};

// Solve (A - A_void(t)) / A = ratio by monotone bisection on t in
// [0, t_solid]; ratio >= 1 - 1e-9 yields the fully solid triangle.
ThicknessSolution solve_thickness(const std::array<Vec2, 3>& tri,
                                  const std::array<double, 3>& edge_scale, double ratio);

struct LatticeTri {
  int tri = -1;                            // mesh triangle index
  double ratio = 0;                        // deposition ratio the insets realize
  std::array<double, 3> scale{0, 0, 0};    // per edge slot, matched layer width
  std::array<int, 3> layer{0, 1, 2};       // edge slot -> layer
  ThicknessSolution thick;
};

struct LatticePatch {
  std::array<Vec2, 3> p{};                 // solid corner-filling triangle
  int vertex = -1;                         // mesh vertex it repairs
};

// Both-side view of one mesh edge: the inset each adjacent lattice applies
// from its side (0 where a side is missing or dropped).
struct LatticeEdgeRecord {
  int a = 0, b = 0;
  double inset_left = 0, inset_right = 0;  // left/right of the a->b direction
  int cls = 0;                             // tangent family from the mesh
};

struct LatticeDesign {
  std::string problem;
  double h = 0;
  double domain_area = 0;
  std::vector<Vec2> vertex;
  std::vector<std::array<int, 3>> tri;     // all mesh triangles
  std::vector<LatticeTri> lattice;         // kept triangles only
  std::vector<LatticeEdgeRecord> edge;
  std::vector<LatticePatch> patch;
  double solid_area = 0;
  double volume = 0;                       // solid_area / domain_area

  void validate() const;
};

// Repair corner gaps and refresh the area totals. At each mesh vertex of a
// kept hollow triangle with kept neighbors across both incident edges, the
// own void corner is tested against the triangle spanned by the vertex and
// the neighbors' void corners; when it falls inside, the slab of the own
// void between the corner and the neighbors' chord becomes a solid patch.
// The added material is compensated by scaling every deposition ratio down
// once, re-solving the thicknesses, and rebuilding the patches on the final
// geometry. Also recomputes solid_area and volume (and does so even when no
// patch is needed, so it doubles as the area finalizer).
void fill_gaps(LatticeDesign& lat);

struct DehomogConfig {
  int min_samples = 10;
  double drop_ratio = 0.02;                // triangles below this are dropped
  bool fill_gaps = true;
  // Rescale kept ratios so the lattice carries the material of the whole
  // active domain, including cells no kept triangle covers. Keeps the
  // realized volume fraction equal to the optimized field's mean density.
  bool conserve_total = true;
};

LatticeDesign dehomogenize(const GridProblem& sim, const DesignField& phys,
                           const FieldAlignedMesh& mesh, const DehomogConfig& config = {});

void save_lattice(const std::string& path, const LatticeDesign& lat);
LatticeDesign load_lattice(const std::string& path);

}  // namespace trilat
