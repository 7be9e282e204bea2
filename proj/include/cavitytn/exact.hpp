#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cavitytn/cnf.hpp"
#include "cavitytn/tfg.hpp"

namespace cavitytn {

/// Brute-force ground truth for one instance. count == 0 marks UNSAT:
/// entropy is -inf and marginals are empty.
struct ExactSummary {
  std::int64_t count = 0;
  // Per variable: probability of x=0 and x=1 among satisfying assignments.
  std::vector<std::pair<double, double>> marginals;
  double entropy = 0.0;
  double per_variable_entropy = 0.0;

  bool unsat() const { return count == 0; }
};

/// Iterates every assignment (N <= limit) and tallies satisfying ones.
ExactSummary enumerate_all(const CnfInstance& instance, int limit = 26);

/// Full contraction by direct iteration over the independent index groups
/// (bonds merged through copy tensors). Refuses when the configuration
/// space exceeds the limit.
double exact_contract(const TensorFactorGraph& graph,
                      std::int64_t config_limit = std::int64_t{1} << 24);

/// Estimated marginals to compare against an exact summary. A run that
/// signalled a contradiction counts as an UNSAT claim.
struct EstimatedMarginals {
  bool unsat_claimed = false;
  std::vector<std::pair<double, double>> marginals;
};

/// Mean halved L1 distance between marginal pairs, in [0,1]. Both sides
/// claiming UNSAT counts as 0; an UNSAT claim against a satisfiable
/// instance counts as 1. Exact-UNSAT against estimated marginals is
/// undefined and returns NaN.
double marginal_distance(const ExactSummary& exact, const EstimatedMarginals& estimated);

}  // namespace cavitytn
