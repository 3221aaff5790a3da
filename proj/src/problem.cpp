#include "trilat/problem.hpp"

#include <fstream>
#include <sstream>

#include "trilat/common.hpp"

namespace trilat {

namespace {

void put(std::ostream& os, double v) { os << fmt_g17(v); }

ValidationError bad(const std::string& what) {
  return ValidationError("problem file: " + what);
}

}  // namespace

void save_problem(std::ostream& os, const ProblemSpec& spec) {
  spec.validate();
  const GridProblem& p = spec.fine;
  os << "trilat-problem 1\n";
  os << "name " << (p.name.empty() ? "unnamed" : p.name) << "\n";
  os << "grid " << p.nx << " " << p.ny << "\n";
  os << "coarsening " << spec.coarsening << "\n";
  os << "budget ";
  put(os, p.volume_budget);
  os << "\nbounds ";
  put(os, p.l_min);
  os << " ";
  put(os, p.l_max);
  os << "\nmaterial ";
  put(os, p.material.e_plus);
  os << " ";
  put(os, p.material.e_minus);
  os << " ";
  put(os, p.material.v0);
  os << "\n";

  // mask as alternating run lengths, first run counts zeros
  os << "mask";
  int64_t total = int64_t(p.nx) * p.ny;
  uint8_t cur = 0;
  int64_t run = 0;
  for (int64_t c = 0; c < total; ++c) {
    if (p.active[c] == cur) {
      ++run;
    } else {
      os << " " << run;
      cur = p.active[c];
      run = 1;
    }
  }
  os << " " << run << "\n";

  int nfix = 0;
  for (int n = 0; n < p.num_nodes(); ++n) nfix += (p.fixed_x[n] || p.fixed_y[n]) ? 1 : 0;
  os << "fixations " << nfix << "\n";
  for (int n = 0; n < p.num_nodes(); ++n)
    if (p.fixed_x[n] || p.fixed_y[n])
      os << n << " " << int(p.fixed_x[n]) << " " << int(p.fixed_y[n]) << "\n";

  os << "cases " << p.num_cases() << "\n";
  for (int q = 0; q < p.num_cases(); ++q) {
    int nload = 0;
    for (int n = 0; n < p.num_nodes(); ++n)
      if (p.loads[q][2 * n] != 0 || p.loads[q][2 * n + 1] != 0) ++nload;
    os << "case ";
    put(os, p.weights[q]);
    os << " " << nload << "\n";
    for (int n = 0; n < p.num_nodes(); ++n)
      if (p.loads[q][2 * n] != 0 || p.loads[q][2 * n + 1] != 0) {
        os << n << " ";
        put(os, p.loads[q][2 * n]);
        os << " ";
        put(os, p.loads[q][2 * n + 1]);
        os << "\n";
      }
  }
  os << "end\n";
  if (!os) throw NumericalError("problem file: write failure");
}

void save_problem(const std::string& path, const ProblemSpec& spec) {
  std::ofstream f(path);
  if (!f) throw ValidationError("problem file: cannot open " + path + " for writing");
  save_problem(f, spec);
}

ProblemSpec load_problem(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "trilat-problem") throw bad("missing header");
  if (version != 1) throw bad("unsupported version " + std::to_string(version));

  ProblemSpec spec;
  GridProblem& p = spec.fine;
  std::string key;
  bool saw_grid = false, saw_mask = false, saw_cases = false, saw_fix = false, saw_end = false;
  while (is >> key) {
    if (key == "name") {
      is >> p.name;
    } else if (key == "grid") {
      if (!(is >> p.nx >> p.ny) || p.nx < 1 || p.ny < 1) throw bad("bad grid line");
      saw_grid = true;
    } else if (key == "coarsening") {
      if (!(is >> spec.coarsening)) throw bad("bad coarsening line");
    } else if (key == "budget") {
      if (!(is >> p.volume_budget)) throw bad("bad budget line");
    } else if (key == "bounds") {
      if (!(is >> p.l_min >> p.l_max)) throw bad("bad bounds line");
    } else if (key == "material") {
      if (!(is >> p.material.e_plus >> p.material.e_minus >> p.material.v0))
        throw bad("bad material line");
    } else if (key == "mask") {
      if (!saw_grid) throw bad("mask before grid");
      int64_t total = int64_t(p.nx) * p.ny;
      p.active.assign(total, 0);
      int64_t at = 0;
      uint8_t cur = 0;
      while (at < total) {
        int64_t run;
        if (!(is >> run) || run < 0 || at + run > total) throw bad("mask runs do not fit grid");
        std::fill(p.active.begin() + at, p.active.begin() + at + run, cur);
        at += run;
        cur = uint8_t(1 - cur);
      }
      saw_mask = true;
    } else if (key == "fixations") {
      if (!saw_grid) throw bad("fixations before grid");
      p.fixed_x.assign(p.num_nodes(), 0);
      p.fixed_y.assign(p.num_nodes(), 0);
      int n = 0;
      if (!(is >> n) || n < 0) throw bad("bad fixation count");
      for (int k = 0; k < n; ++k) {
        int node, fx, fy;
        if (!(is >> node >> fx >> fy) || node < 0 || node >= p.num_nodes())
          throw bad("bad fixation entry");
        p.fixed_x[node] = uint8_t(fx != 0);
        p.fixed_y[node] = uint8_t(fy != 0);
      }
      saw_fix = true;
    } else if (key == "cases") {
      if (!saw_grid) throw bad("cases before grid");
      int m = 0;
      if (!(is >> m) || m < 1) throw bad("bad case count");
      p.loads.clear();
      p.weights.clear();
      for (int q = 0; q < m; ++q) {
        std::string kw;
        double w;
        int n;
        if (!(is >> kw >> w >> n) || kw != "case" || n < 0) throw bad("bad case header");
        Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * p.num_nodes());
        for (int k = 0; k < n; ++k) {
          int node;
          double fx, fy;
          if (!(is >> node >> fx >> fy) || node < 0 || node >= p.num_nodes())
            throw bad("bad load entry");
          f[2 * node] = fx;
          f[2 * node + 1] = fy;
        }
        p.loads.push_back(std::move(f));
        p.weights.push_back(w);
      }
      saw_cases = true;
    } else if (key == "end") {
      saw_end = true;
      break;
    } else {
      throw bad("unknown key '" + key + "'");
    }
  }
  if (!saw_grid || !saw_mask || !saw_fix || !saw_cases || !saw_end)
    throw bad("incomplete file (grid/mask/fixations/cases/end required)");
  spec.validate();
  return spec;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("problem file: cannot open " + path);
  return load_problem(f);
}

}  // namespace trilat
