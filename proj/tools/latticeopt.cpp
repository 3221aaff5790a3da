// latticeopt: functionally graded triangular lattice design pipeline.
// Subcommands cover the stages: optimize, triangulate, dehomog, evaluate,
// render, pipeline, plus make-problem for writing the bundled presets.
// Exit codes: 0 ok, 2 validation error, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>

#include "trilat/meshing.hpp"
#include "trilat/optimizer.hpp"
#include "trilat/problem.hpp"

using namespace trilat;

namespace {

ProblemSpec resolve_problem(const std::string& arg) {
  if (std::filesystem::exists(arg)) return load_problem(arg);
  return make_preset(arg);  // throws with the known names if unknown
}

struct CommonOpts {
  uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "RNG seed for stages that sample");
  cmd->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out_dir, "output directory");
}

std::string out_path(const CommonOpts& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  return (std::filesystem::path(c.out_dir) / name).string();
}

struct OptimizeOpts {
  std::string problem;
  std::string init = "stress";
  double weight = 0.5;
  int iters = 300;
  double filter_radius = 2.0;
  bool free_orientations = false;
  std::string solver = "auto";
  bool quiet = false;
};

void add_optimize_opts(CLI::App* cmd, OptimizeOpts& o) {
  cmd->add_option("problem", o.problem, "problem file or preset name")->required();
  cmd->add_option("--init", o.init, "initial orientations: uniform or stress")
      ->check(CLI::IsMember({"uniform", "stress"}));
  cmd->add_option("--weight", o.weight, "compliance weight W in (0,1]");
  cmd->add_option("--iters", o.iters, "optimization iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--filter-radius", o.filter_radius, "cone filter radius in cells");
  cmd->add_flag("--free-orientations", o.free_orientations,
                "three independent layer normals per cell (test mode)");
  cmd->add_option("--solver", o.solver, "linear solver")
      ->check(CLI::IsMember({"auto", "direct", "pcg"}));
  cmd->add_flag("--quiet", o.quiet, "suppress the per-iteration log line");
}

SolverKind parse_solver(const std::string& s) {
  if (s == "direct") return SolverKind::Direct;
  if (s == "pcg") return SolverKind::Pcg;
  return SolverKind::Auto;
}

int run_optimize(const CommonOpts& common, const OptimizeOpts& o) {
  ProblemSpec spec = resolve_problem(o.problem);
  OptimizerConfig cfg;
  cfg.init = o.init;
  cfg.weight = o.weight;
  cfg.max_iter = o.iters;
  cfg.filter_radius = o.filter_radius;
  cfg.free_orientations = o.free_orientations;
  cfg.solver = parse_solver(o.solver);
  cfg.log = !o.quiet;
  OptimizeOutcome outcome = run_optimization(spec, cfg);
  std::string ckpt = out_path(common, spec.fine.name + "_design.txt");
  save_checkpoint(ckpt, outcome, cfg);
  std::printf("%s: C %.6g (C0 %.6g)  P %.6g  volume %.6g  iterations %d\n",
              ckpt.c_str(), outcome.c_final, outcome.c_star, outcome.p_final, outcome.volume,
              outcome.design.iterations);
  return 0;
}

struct TriangulateOpts {
  std::string problem;
  std::string checkpoint;
  int target_lattices = 0;
  double edge_length = 0;
  int smooth_iters = 2;
};

void add_triangulate_opts(CLI::App* cmd, TriangulateOpts& t) {
  cmd->add_option("problem", t.problem, "problem file or preset name")->required();
  cmd->add_option("checkpoint", t.checkpoint, "design checkpoint from optimize")->required();
  cmd->add_option("--target-lattices", t.target_lattices,
                  "desired triangle count (picks the edge length)");
  cmd->add_option("--edge-length", t.edge_length, "lattice edge length in cells");
  cmd->add_option("--smooth-iters", t.smooth_iters, "orientation smoothing sweeps");
}

int run_triangulate(const CommonOpts& common, const TriangulateOpts& t) {
  ProblemSpec spec = resolve_problem(t.problem);
  Checkpoint ck = load_checkpoint(t.checkpoint, spec);
  // meshing reads the filtered field, the one the compliance was computed on
  DesignField phys = filter_fields(ck.outcome.design, ck.config.filter_radius);
  TriangulateConfig cfg;
  cfg.target_lattices = t.target_lattices;
  cfg.edge_length = t.edge_length;
  cfg.smooth_iters = t.smooth_iters;
  cfg.seed = common.seed;
  FieldAlignedMesh mesh = triangulate_design(ck.outcome.sim, phys, cfg);
  std::string path = out_path(common, spec.fine.name + "_mesh.txt");
  save_mesh(path, mesh);
  std::printf("%s: %zu lattices, %zu vertices, edge length %.6g\n", path.c_str(),
              mesh.tri.size(), mesh.vertex.size(), mesh.h);
  return 0;
}

int run_make_problem(const CommonOpts& common, const std::string& preset) {
  ProblemSpec spec = make_preset(preset);
  std::string path = out_path(common, spec.fine.name + "_problem.txt");
  save_problem(path, spec);
  std::printf("%s: %dx%d fine grid, coarsening %d, %d load case(s)\n", path.c_str(),
              spec.fine.nx, spec.fine.ny, spec.coarsening, spec.fine.num_cases());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"functionally graded triangular lattice design pipeline"};
  app.require_subcommand(1);

  CommonOpts common;
  OptimizeOpts opt;
  TriangulateOpts tri;
  std::string preset_name;

  CLI::App* c_opt = app.add_subcommand("optimize", "homogenization-based topology optimization");
  add_common(c_opt, common);
  add_optimize_opts(c_opt, opt);

  CLI::App* c_tri = app.add_subcommand("triangulate", "field-aligned lattice mesh extraction");
  add_common(c_tri, common);
  add_triangulate_opts(c_tri, tri);

  CLI::App* c_mk = app.add_subcommand("make-problem", "write a bundled preset problem file");
  add_common(c_mk, common);
  c_mk->add_option("preset", preset_name, "femur, triangle, mbb, or beam")->required();

  try {
    app.parse(argc, argv);
    if (c_opt->parsed()) return run_optimize(common, opt);
    if (c_tri->parsed()) return run_triangulate(common, tri);
    if (c_mk->parsed()) return run_make_problem(common, preset_name);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
