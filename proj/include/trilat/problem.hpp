#pragma once

#include <iosfwd>
#include <string>

#include "trilat/fea.hpp"

namespace trilat {

// Versioned text format ("trilat-problem 1"): resolution, coarsening,
// budget/bounds/material, run-length encoded activity mask, fixation list,
// load cases. All floats serialized with %.17g so files round-trip exactly.
void save_problem(std::ostream& os, const ProblemSpec& spec);
void save_problem(const std::string& path, const ProblemSpec& spec);
ProblemSpec load_problem(std::istream& is);
ProblemSpec load_problem(const std::string& path);

// Bundled problems: "femur" (two load cases on a bone-like mask, sim grid
// 116x150), "triangle" (equilateral domain, three symmetric cases),
// "mbb" (60x30 half-beam), "beam" (100x50, five separate top loads).
ProblemSpec make_preset(const std::string& name);

}  // namespace trilat
