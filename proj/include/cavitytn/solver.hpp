#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cavitytn/bp.hpp"
#include "cavitytn/cnf.hpp"

namespace cavitytn {

enum class SolverEngine { kBp, kSp };
enum class SolveStatus { kSat, kUnknown, kContradiction };

struct DecimationConfig {
  SolverEngine engine = SolverEngine::kSp;
  double bias_threshold = 1e-3;
  BpConfig bp;
  std::int64_t walksat_flips = 1000000;
  double walksat_mixing = 0.5;
  std::uint64_t seed = 0;
  // Exhaustive unit propagation after each fix; defaults to on for the SP
  // engine when unset.
  std::optional<bool> unit_propagation;
  // Hand the residual instance to WalkSat once the largest bias drops below
  // the threshold (SP only).
  bool walksat_on_residual = true;
  // Reuse the previous step's converged messages as the next start.
  bool warm_start = true;
  // Divide SP biases by p0 + p1 + p_free.
  bool normalized_biases = false;
  // Restrict the WalkSat greedy scan to variables of violated clauses
  // instead of all variables.
  bool restrict_greedy = false;

  bool unit_propagation_effective() const {
    return unit_propagation.value_or(engine == SolverEngine::kSp);
  }
};

struct DecimationStep {
  enum class Source { kEngine, kUnitPropagation };
  Source source = Source::kEngine;
  int var = -1;  // 0-based
  bool value = false;
  double bias = 0.0;
  int engine_iterations = 0;
  double engine_delta = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kUnknown;
  Assignment assignment;  // meaningful when status == kSat
  int decimation_steps = 0;
  std::vector<DecimationStep> trace;
  std::int64_t walksat_flips_used = 0;
  bool engine_converged_throughout = true;

  bool sat() const { return status == SolveStatus::kSat; }
};

/// Randomized local search: with probability 1-p flip the globally best
/// variable (ties uniform), otherwise flip a random variable of a random
/// violated clause. Fixed variables of the instance are pinned. Every SAT
/// verdict is re-verified against the instance before returning.
SolveResult walksat(const CnfInstance& instance, std::int64_t flips, double mixing,
                    std::uint64_t seed, bool restrict_greedy = false);

/// Message-passing decimation: converge the engine, fix the most biased
/// variable, simplify, repeat. The SP engine stops at the bias threshold
/// and hands the residual to WalkSat; BP fixes variables regardless of the
/// bias magnitude. SAT results are re-verified against the instance.
SolveResult decimate(const CnfInstance& instance, const DecimationConfig& config);

/// SP decimation followed by WalkSat on the residual.
SolveResult solve_pipeline(const CnfInstance& instance, DecimationConfig config);

}  // namespace cavitytn
