#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cavitytn {

/// Signed literal over a 0-based variable index.
struct Literal {
  int var = 0;
  bool negated = false;

  /// True when the literal evaluates true under the given variable value.
  bool satisfied_by(bool value) const { return value != negated; }
  /// Variable value at which this literal is false (the violating value).
  bool violating_value() const { return negated; }

  friend bool operator==(const Literal&, const Literal&) = default;
};

using Clause = std::vector<Literal>;

struct Assignment {
  std::vector<bool> values;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

/// A k-SAT formula. Variables are 0-based internally and 1-based in DIMACS
/// I/O. Instances are immutable values; simplification returns a new one.
struct CnfInstance {
  int num_vars = 0;
  std::vector<Clause> clauses;
  // Values assigned so far by decimation; keyed by variable index.
  std::map<int, bool> fixed_assignments;

  int num_clauses() const { return static_cast<int>(clauses.size()); }
  int num_unfixed() const { return num_vars - static_cast<int>(fixed_assignments.size()); }
  double alpha() const { return num_vars ? static_cast<double>(clauses.size()) / num_vars : 0.0; }
};

struct Contradiction {};
using SimplifyResult = std::variant<CnfInstance, Contradiction>;

/// Parses DIMACS CNF (comment lines `c`, header `p cnf N M`, 0-terminated
/// clauses). Throws ParseError with the offending line number.
CnfInstance parse_dimacs(std::istream& in);
CnfInstance parse_dimacs(const std::string& text);

/// Canonical single-space DIMACS writer; parse_dimacs(write_dimacs(x)) == x.
std::string write_dimacs(const CnfInstance& instance);

/// Uniform random k-SAT: m clauses, each over k distinct variables with
/// independent random signs. Deterministic in the seed. Duplicate clauses
/// are allowed.
CnfInstance random_ksat(int n, int m, int k, std::uint64_t seed);

/// Number of violated clauses (0 iff satisfying).
std::int64_t energy(const CnfInstance& instance, const Assignment& x);

/// Fixes var := value: drops satisfied clauses, deletes falsified literals,
/// records the assignment. An emptied clause signals a contradiction.
SimplifyResult simplify(const CnfInstance& instance, int var, bool value);

/// Full assignment from fixed values; unfixed variables default to false.
Assignment assignment_from_fixed(const CnfInstance& instance);

}  // namespace cavitytn
