#include <fstream>
#include <sstream>

#include "trilat/common.hpp"
#include "trilat/optimizer.hpp"
#include "trilat/problem.hpp"

namespace trilat {

namespace {

ValidationError bad_ckpt(const std::string& what) {
  return ValidationError("checkpoint file: " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const OptimizeOutcome& outcome,
                     const OptimizerConfig& config) {
  outcome.design.validate(outcome.sim);
  std::ofstream os(path);
  if (!os) throw ValidationError("checkpoint file: cannot open " + path + " for writing");
  const DesignField& d = outcome.design;
  os << "trilat-checkpoint 1\n";
  os << "problem " << (outcome.sim.name.empty() ? "unnamed" : outcome.sim.name) << "\n";
  os << "grid " << d.nx << " " << d.ny << "\n";
  os << "config " << config.init << " " << fmt_g17(config.weight) << " " << config.max_iter
     << " " << fmt_g17(config.filter_radius) << " " << fmt_g17(config.move_width) << " "
     << fmt_g17(config.move_theta) << " " << int(config.free_orientations) << "\n";
  os << "normalizers " << fmt_g17(outcome.c_star) << " " << fmt_g17(outcome.p_star) << "\n";
  os << "final " << fmt_g17(outcome.c_final) << " " << fmt_g17(outcome.p_final) << " "
     << fmt_g17(outcome.volume) << "\n";
  os << "iterations " << d.iterations << "\n";
  os << "cells " << d.num_cells() << "\n";
  for (int c = 0; c < d.num_cells(); ++c) {
    const LaminateSpec& s = d.cells[c];
    os << fmt_g17(s.alpha[0]) << " " << fmt_g17(s.alpha[1]) << " " << fmt_g17(s.alpha[2]) << " "
       << fmt_g17(s.theta3);
    if (d.free_orientations)
      os << " " << fmt_g17(d.normals[c][0]) << " " << fmt_g17(d.normals[c][1]) << " "
         << fmt_g17(d.normals[c][2]);
    os << "\n";
  }
  os << "history " << d.history.size() << "\n";
  for (const HistoryEntry& h : d.history)
    os << fmt_g17(h.compliance) << " " << fmt_g17(h.penalty) << " " << fmt_g17(h.objective)
       << " " << fmt_g17(h.volume) << "\n";
  os << "end\n";
  if (!os) throw NumericalError("checkpoint file: write failure");
}

Checkpoint load_checkpoint(const std::string& path, const ProblemSpec& problem) {
  std::ifstream is(path);
  if (!is) throw ValidationError("checkpoint file: cannot open " + path);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "trilat-checkpoint") throw bad_ckpt("missing header");
  if (version != 1) throw bad_ckpt("unsupported version " + std::to_string(version));

  Checkpoint ck;
  ck.outcome.sim = restrict_problem(problem);
  DesignField& d = ck.outcome.design;
  std::string key;
  bool saw_cells = false, saw_end = false;
  while (is >> key) {
    if (key == "problem") {
      std::string name;
      is >> name;
      if (name != ck.outcome.sim.name)
        throw bad_ckpt("checkpoint is for problem '" + name + "', not '" + ck.outcome.sim.name +
                       "'");
    } else if (key == "grid") {
      int nx, ny;
      if (!(is >> nx >> ny)) throw bad_ckpt("bad grid line");
      if (nx != ck.outcome.sim.nx || ny != ck.outcome.sim.ny)
        throw bad_ckpt("grid does not match the problem's sim resolution");
      d.nx = nx;
      d.ny = ny;
      d.active = ck.outcome.sim.active;
    } else if (key == "config") {
      int free = 0;
      if (!(is >> ck.config.init >> ck.config.weight >> ck.config.max_iter >>
            ck.config.filter_radius >> ck.config.move_width >> ck.config.move_theta >> free))
        throw bad_ckpt("bad config line");
      ck.config.free_orientations = free != 0;
      d.free_orientations = ck.config.free_orientations;
    } else if (key == "normalizers") {
      if (!(is >> ck.outcome.c_star >> ck.outcome.p_star)) throw bad_ckpt("bad normalizers");
    } else if (key == "final") {
      if (!(is >> ck.outcome.c_final >> ck.outcome.p_final >> ck.outcome.volume))
        throw bad_ckpt("bad final line");
    } else if (key == "iterations") {
      if (!(is >> d.iterations)) throw bad_ckpt("bad iterations line");
    } else if (key == "cells") {
      int n = 0;
      if (!(is >> n) || n != d.num_cells() || n == 0)
        throw bad_ckpt("cell count does not match grid");
      d.cells.assign(n, LaminateSpec{});
      if (d.free_orientations) d.normals.assign(n, {0, 0, 0});
      for (int c = 0; c < n; ++c) {
        LaminateSpec& s = d.cells[c];
        if (!(is >> s.alpha[0] >> s.alpha[1] >> s.alpha[2] >> s.theta3))
          throw bad_ckpt("bad cell entry");
        if (d.free_orientations &&
            !(is >> d.normals[c][0] >> d.normals[c][1] >> d.normals[c][2]))
          throw bad_ckpt("bad cell entry (free orientations)");
      }
      saw_cells = true;
    } else if (key == "history") {
      int n = 0;
      if (!(is >> n) || n < 0) throw bad_ckpt("bad history count");
      d.history.assign(n, HistoryEntry{});
      for (HistoryEntry& h : d.history)
        if (!(is >> h.compliance >> h.penalty >> h.objective >> h.volume))
          throw bad_ckpt("bad history entry");
    } else if (key == "end") {
      saw_end = true;
      break;
    } else {
      throw bad_ckpt("unknown key '" + key + "'");
    }
  }
  if (!saw_cells || !saw_end) throw bad_ckpt("incomplete file");
  d.validate(ck.outcome.sim);
  return ck;
}

}  // namespace trilat
