#include "cavitytn/cnf.hpp"

#include <algorithm>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "cavitytn/rng.hpp"

namespace cavitytn {

CnfInstance parse_dimacs(std::istream& in) {
  CnfInstance inst;
  bool header_seen = false;
  int declared_clauses = 0;
  int line_no = 0;
  Clause current;
  std::unordered_set<int> current_vars;
  bool clause_open = false;
  int last_clause_line = 0;

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;  // blank line
    if (first == "c" || first[0] == 'c') continue;
    if (first == "p") {
      if (header_seen) throw ParseError("duplicate header", line_no);
      std::string fmt;
      if (!(ls >> fmt) || fmt != "cnf") throw ParseError("expected 'p cnf N M'", line_no);
      if (!(ls >> inst.num_vars >> declared_clauses) || inst.num_vars < 0 ||
          declared_clauses < 0)
        throw ParseError("malformed header", line_no);
      header_seen = true;
      continue;
    }
    if (!header_seen) throw ParseError("missing 'p cnf' header", line_no);
    // Clause data; integers may continue across lines until a 0.
    std::istringstream ts(line);
    long long lit;
    while (ts >> lit) {
      if (lit == 0) {
        if (current.empty()) throw ParseError("empty clause", line_no);
        inst.clauses.push_back(current);
        current.clear();
        current_vars.clear();
        clause_open = false;
        continue;
      }
      long long v = lit < 0 ? -lit : lit;
      if (v > inst.num_vars)
        throw ParseError("literal " + std::to_string(lit) + " out of range", line_no);
      if (!current_vars.insert(static_cast<int>(v)).second)
        throw ParseError("duplicate variable " + std::to_string(v) + " in clause",
                         line_no);
      current.push_back(Literal{static_cast<int>(v) - 1, lit < 0});
      clause_open = true;
      last_clause_line = line_no;
    }
    if (!ts.eof()) throw ParseError("unexpected token", line_no);
  }
  if (!header_seen) throw ParseError("missing 'p cnf' header", line_no ? line_no : 1);
  if (clause_open) throw ParseError("unterminated clause", last_clause_line);
  if (static_cast<int>(inst.clauses.size()) != declared_clauses)
    throw ParseError("clause count mismatch: header says " +
                         std::to_string(declared_clauses) + ", found " +
                         std::to_string(inst.clauses.size()),
                     line_no ? line_no : 1);
  return inst;
}

CnfInstance parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

std::string write_dimacs(const CnfInstance& instance) {
  std::ostringstream out;
  out << "p cnf " << instance.num_vars << ' ' << instance.clauses.size() << '\n';
  for (const Clause& c : instance.clauses) {
    for (const Literal& l : c) out << (l.negated ? -(l.var + 1) : (l.var + 1)) << ' ';
    out << "0\n";
  }
  return out.str();
}

CnfInstance random_ksat(int n, int m, int k, std::uint64_t seed) {
  if (k > n) throw std::invalid_argument("random_ksat requires k <= n");
  if (n < 0 || m < 0 || k < 1) throw std::invalid_argument("bad random_ksat arguments");
  CnfInstance inst;
  inst.num_vars = n;
  inst.clauses.reserve(static_cast<size_t>(m));
  Rng rng(seed);
  std::vector<int> vars;
  for (int c = 0; c < m; ++c) {
    // Floyd's sampling: k distinct variables, deterministic in the seed.
    vars.clear();
    for (int j = n - k; j < n; ++j) {
      std::uniform_int_distribution<int> dist(0, j);
      int t = dist(rng);
      if (std::find(vars.begin(), vars.end(), t) != vars.end())
        vars.push_back(j);
      else
        vars.push_back(t);
    }
    std::sort(vars.begin(), vars.end());
    Clause clause;
    for (int v : vars) {
      bool neg = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      clause.push_back(Literal{v, neg});
    }
    inst.clauses.push_back(std::move(clause));
  }
  return inst;
}

std::int64_t energy(const CnfInstance& instance, const Assignment& x) {
  if (static_cast<int>(x.values.size()) != instance.num_vars)
    throw std::invalid_argument("assignment length mismatch");
  std::int64_t violated = 0;
  for (const Clause& c : instance.clauses) {
    bool sat = false;
    for (const Literal& l : c)
      if (l.satisfied_by(x.values[static_cast<size_t>(l.var)])) {
        sat = true;
        break;
      }
    if (!sat) ++violated;
  }
  return violated;
}

SimplifyResult simplify(const CnfInstance& instance, int var, bool value) {
  if (var < 0 || var >= instance.num_vars)
    throw std::invalid_argument("variable out of range");
  if (instance.fixed_assignments.count(var))
    throw std::invalid_argument("variable already fixed");
  CnfInstance out;
  out.num_vars = instance.num_vars;
  out.fixed_assignments = instance.fixed_assignments;
  out.fixed_assignments[var] = value;
  for (const Clause& c : instance.clauses) {
    bool satisfied = false;
    for (const Literal& l : c)
      if (l.var == var && l.satisfied_by(value)) {
        satisfied = true;
        break;
      }
    if (satisfied) continue;
    Clause kept;
    for (const Literal& l : c)
      if (l.var != var) kept.push_back(l);
    if (kept.empty()) return Contradiction{};
    out.clauses.push_back(std::move(kept));
  }
  return out;
}

Assignment assignment_from_fixed(const CnfInstance& instance) {
  Assignment a;
  a.values.assign(static_cast<size_t>(instance.num_vars), false);
  for (const auto& [v, val] : instance.fixed_assignments)
    a.values[static_cast<size_t>(v)] = val;
  return a;
}

}  // namespace cavitytn
