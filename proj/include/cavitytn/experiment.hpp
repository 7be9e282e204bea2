#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavitytn/solver.hpp"

namespace cavitytn {

enum class Engine { kBp, kSp, kWalksat, kSpWalksat };

std::string engine_name(Engine e);

/// Per-instance seeds are derived from (base, engine, alpha index, instance
/// index); instance generation uses the engine-independent part so that all
/// engines face identical formulas.
std::uint64_t instance_seed(std::uint64_t base, int alpha_index, int instance_index);
std::uint64_t run_seed(std::uint64_t base, Engine engine, int alpha_index,
                       int instance_index);

// ---------------------------------------------------------------------------
// BP validation against the exact oracle (small N).

struct ValidateSpec {
  int n = 20;
  std::vector<double> alphas;
  int instances_per_point = 20;
  std::uint64_t seed = 1;
  BpConfig bp;
  int workers = 0;  // 0 = hardware concurrency
};

struct ValidateRow {
  double alpha = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  bool sat = false;
  bool bp_converged = false;
  double s_exact_per_n = 0.0;   // NaN when UNSAT
  double s_bethe_per_n = 0.0;   // NaN when BP hit a contradiction
  double marginal_distance = 0.0;  // NaN when undefined
};

std::vector<ValidateRow> run_validate(const ValidateSpec& spec);

/// CSV with `# config:` preamble, one row per instance plus per-alpha
/// aggregate rows (seed column "mean", NaN-skipping means).
std::string validate_csv(const ValidateSpec& spec, const std::vector<ValidateRow>& rows);

// ---------------------------------------------------------------------------
// Solver success-fraction sweep.

struct SweepSpec {
  int n = 1000;
  int k = 3;
  std::vector<double> alphas;
  int instances_per_point = 20;
  std::vector<Engine> engines;
  std::uint64_t seed = 1;
  DecimationConfig solver;         // tolerance, iterations, flips, mixing
  std::vector<double> mixing_values;  // WalkSat-only: best-of list
  int workers = 0;
};

struct SweepRecord {
  Engine engine;
  double alpha = 0.0;
  int alpha_index = 0;
  int instance_index = 0;
  std::uint64_t seed = 0;
  SolveStatus status = SolveStatus::kUnknown;
  double wall_ms = 0.0;
  int engine_iterations = 0;  // message-passing sweeps of the final step
  int decimation_steps = 0;
  bool sound = true;  // SAT verdicts re-verified on the original instance
};

struct SweepAggregate {
  Engine engine;
  std::string engine_label;
  double alpha = 0.0;
  int n = 0;
  int successes = 0;
  int total = 0;
  double fraction = 0.0;
  double mean_wall_ms = 0.0;
};

struct SweepOutput {
  std::vector<SweepRecord> records;
  std::vector<SweepAggregate> aggregates;
};

SweepOutput run_sweep(const SweepSpec& spec);

/// Aggregate CSV: engine,alpha,n,successes,total,fraction,mean_wall_ms with
/// a `# config:` preamble.
std::string sweep_csv(const SweepSpec& spec, const SweepOutput& out);

int default_workers();

}  // namespace cavitytn
