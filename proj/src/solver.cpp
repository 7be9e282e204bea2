#include "cavitytn/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "cavitytn/rng.hpp"
#include "cavitytn/sp.hpp"
#include "cavitytn/tfg.hpp"

namespace cavitytn {

namespace {

// Incremental WalkSat state over the unfixed variables of an instance.
// Tracks per clause the number of true literals and the id-sum of the true
// ones (the critical variable is the sum when the count is 1), and per
// variable the break/make counts so that delta-E queries are O(1).
class WalkSatState {
 public:
  WalkSatState(const CnfInstance& instance, Rng& rng) : instance_(&instance) {
    compact_.assign(static_cast<size_t>(instance.num_vars), -1);
    for (int v = 0; v < instance.num_vars; ++v)
      if (!instance.fixed_assignments.count(v)) {
        compact_[static_cast<size_t>(v)] = static_cast<int>(vars_.size());
        vars_.push_back(v);
      }
    const int n = static_cast<int>(vars_.size());
    occ_.assign(static_cast<size_t>(n), {});
    value_.resize(static_cast<size_t>(n));
    break_count_.assign(static_cast<size_t>(n), 0);
    make_count_.assign(static_cast<size_t>(n), 0);
    for (int v = 0; v < n; ++v)
      value_[static_cast<size_t>(v)] = std::uniform_int_distribution<int>(0, 1)(rng) == 1;

    clauses_.reserve(instance.clauses.size());
    for (const Clause& c : instance.clauses) {
      ClauseState cs;
      for (const Literal& l : c) {
        const int cv = compact_[static_cast<size_t>(l.var)];
        if (cv < 0) throw std::invalid_argument("clause references a fixed variable");
        cs.lits.push_back({cv, l.negated});
      }
      clauses_.push_back(std::move(cs));
    }
    violated_pos_.assign(clauses_.size(), -1);
    for (size_t c = 0; c < clauses_.size(); ++c) init_clause(static_cast<int>(c));
  }

  std::int64_t energy() const { return static_cast<std::int64_t>(violated_.size()); }
  int num_vars() const { return static_cast<int>(vars_.size()); }

  // E(X with v flipped) - E(X).
  std::int64_t delta_energy(int v) const {
    return break_count_[static_cast<size_t>(v)] - make_count_[static_cast<size_t>(v)];
  }

  int greedy_pick(Rng& rng, bool restrict_greedy) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    int chosen = -1, ties = 0;
    auto consider = [&](int v) {
      const std::int64_t d = delta_energy(v);
      if (d < best) {
        best = d;
        chosen = v;
        ties = 1;
      } else if (d == best) {
        ++ties;
        if (std::uniform_int_distribution<int>(1, ties)(rng) == 1) chosen = v;
      }
    };
    if (!restrict_greedy) {
      for (int v = 0; v < num_vars(); ++v) consider(v);
      return chosen;
    }
    ++epoch_;
    if (seen_.size() != static_cast<size_t>(num_vars())) seen_.assign(static_cast<size_t>(num_vars()), 0);
    for (int c : violated_)
      for (const auto& [v, neg] : clauses_[static_cast<size_t>(c)].lits)
        if (seen_[static_cast<size_t>(v)] != epoch_) {
          seen_[static_cast<size_t>(v)] = epoch_;
          consider(v);
        }
    return chosen;
  }

  int random_walk_pick(Rng& rng) {
    const int c = violated_[static_cast<size_t>(
        std::uniform_int_distribution<int>(0, static_cast<int>(violated_.size()) - 1)(rng))];
    const auto& lits = clauses_[static_cast<size_t>(c)].lits;
    return lits[static_cast<size_t>(std::uniform_int_distribution<int>(
                    0, static_cast<int>(lits.size()) - 1)(rng))]
        .first;
  }

  void flip(int v) {
    const bool new_value = !value_[static_cast<size_t>(v)];
    value_[static_cast<size_t>(v)] = new_value;
    for (const auto& [c, negated] : occ_[static_cast<size_t>(v)]) {
      ClauseState& cs = clauses_[static_cast<size_t>(c)];
      const bool now_true = new_value != negated;
      if (now_true) {
        const int old_count = cs.true_count++;
        cs.true_sum += v;
        if (old_count == 0) {
          remove_violated(c);
          for (const auto& [u, n2] : cs.lits) --make_count_[static_cast<size_t>(u)];
          ++break_count_[static_cast<size_t>(v)];
        } else if (old_count == 1) {
          --break_count_[static_cast<size_t>(cs.true_sum - v)];
        }
      } else {
        --cs.true_count;
        cs.true_sum -= v;
        if (cs.true_count == 0) {
          add_violated(c);
          for (const auto& [u, n2] : cs.lits) ++make_count_[static_cast<size_t>(u)];
          --break_count_[static_cast<size_t>(v)];
        } else if (cs.true_count == 1) {
          ++break_count_[static_cast<size_t>(cs.true_sum)];
        }
      }
    }
  }

  Assignment merged_assignment() const {
    Assignment a = assignment_from_fixed(*instance_);
    for (size_t i = 0; i < vars_.size(); ++i)
      a.values[static_cast<size_t>(vars_[i])] = value_[i];
    return a;
  }

 private:
  struct ClauseState {
    std::vector<std::pair<int, bool>> lits;  // compact var, negated
    int true_count = 0;
    std::int64_t true_sum = 0;
  };

  void init_clause(int c) {
    ClauseState& cs = clauses_[static_cast<size_t>(c)];
    for (const auto& [v, negated] : cs.lits) {
      occ_[static_cast<size_t>(v)].emplace_back(c, negated);
      if (value_[static_cast<size_t>(v)] != negated) {
        ++cs.true_count;
        cs.true_sum += v;
      }
    }
    if (cs.true_count == 0) {
      add_violated(c);
      for (const auto& [u, n2] : cs.lits) ++make_count_[static_cast<size_t>(u)];
    } else if (cs.true_count == 1) {
      ++break_count_[static_cast<size_t>(cs.true_sum)];
    }
  }

  void add_violated(int c) {
    violated_pos_[static_cast<size_t>(c)] = static_cast<int>(violated_.size());
    violated_.push_back(c);
  }
  void remove_violated(int c) {
    const int pos = violated_pos_[static_cast<size_t>(c)];
    const int last = violated_.back();
    violated_[static_cast<size_t>(pos)] = last;
    violated_pos_[static_cast<size_t>(last)] = pos;
    violated_.pop_back();
    violated_pos_[static_cast<size_t>(c)] = -1;
  }

  const CnfInstance* instance_;
  std::vector<int> vars_;      // compact -> original
  std::vector<int> compact_;   // original -> compact (-1 = fixed)
  std::vector<bool> value_;
  std::vector<ClauseState> clauses_;
  std::vector<std::vector<std::pair<int, bool>>> occ_;
  std::vector<std::int64_t> break_count_, make_count_;
  std::vector<int> violated_;
  std::vector<int> violated_pos_;
  std::vector<std::uint32_t> seen_;
  std::uint32_t epoch_ = 0;
};

}  // namespace

SolveResult walksat(const CnfInstance& instance, std::int64_t flips, double mixing,
                    std::uint64_t seed, bool restrict_greedy) {
  if (mixing < 0.0 || mixing > 1.0) throw std::invalid_argument("mixing outside [0,1]");
  Rng rng(seed);
  WalkSatState state(instance, rng);
  SolveResult result;
  std::int64_t t = 0;
  while (t < flips) {
    if (state.energy() == 0) {
      result.status = SolveStatus::kSat;
      result.assignment = state.merged_assignment();
      result.walksat_flips_used = t;
      if (cavitytn::energy(instance, result.assignment) != 0)
        throw std::logic_error("walksat produced an unverified assignment");
      return result;
    }
    const double r = uniform01(rng);
    int v;
    if (r < 1.0 - mixing) {
      v = state.greedy_pick(rng, restrict_greedy);
    } else {
      v = state.random_walk_pick(rng);
    }
    state.flip(v);
    ++t;
  }
  result.status = SolveStatus::kUnknown;
  result.walksat_flips_used = t;
  return result;
}

namespace {

struct WarmMessages {
  // Keyed by (clause uid, variable).
  std::map<std::pair<int, int>, double> q_hat;
  std::map<std::pair<int, int>, Eigen::Vector3d> q_triple;
  std::map<std::pair<int, int>, Eigen::VectorXd> bp_var_to_clause;
  std::map<std::pair<int, int>, Eigen::VectorXd> bp_clause_to_var;
  bool available = false;
};

SolveResult finish_sat(const CnfInstance& original, const CnfInstance& residual,
                       SolveResult result) {
  result.status = SolveStatus::kSat;
  result.assignment = assignment_from_fixed(residual);
  if (energy(original, result.assignment) != 0)
    throw std::logic_error("decimation produced an unverified assignment");
  return result;
}

}  // namespace

SolveResult decimate(const CnfInstance& instance, const DecimationConfig& config) {
  if (config.bias_threshold <= 0) throw std::invalid_argument("bias threshold must be positive");
  const bool unit_prop = config.unit_propagation_effective();
  CnfInstance working = instance;
  SolveResult result;
  WarmMessages warm;

  // Stable clause identity across simplifications (clause indices shift as
  // satisfied clauses are dropped; warm-started messages are keyed by uid).
  std::vector<int> clause_uid(working.clauses.size());
  std::iota(clause_uid.begin(), clause_uid.end(), 0);

  // Applies var := value to `working`, keeping clause uids aligned.
  // Returns false on contradiction.
  auto apply_fix = [&](int var, bool value) {
    std::vector<int> kept;
    kept.reserve(clause_uid.size());
    for (size_t i = 0; i < working.clauses.size(); ++i) {
      bool satisfied = false;
      for (const Literal& l : working.clauses[i])
        if (l.var == var && l.satisfied_by(value)) {
          satisfied = true;
          break;
        }
      if (!satisfied) kept.push_back(clause_uid[i]);
    }
    SimplifyResult simplified = simplify(working, var, value);
    if (std::holds_alternative<Contradiction>(simplified)) return false;
    working = std::get<CnfInstance>(std::move(simplified));
    clause_uid = std::move(kept);
    return true;
  };

  while (true) {
    if (working.clauses.empty()) return finish_sat(instance, working, std::move(result));

    BpConfig engine_cfg = config.bp;
    if (!config.warm_start || !warm.available)
      engine_cfg.seed = derive_seed(config.seed, 0x6270u, static_cast<std::uint64_t>(
                                                              result.decimation_steps));

    BiasVector biases;
    int engine_iterations = 0;
    double engine_delta = 0.0;
    bool contradiction = false, converged = false;

    if (config.engine == SolverEngine::kSp) {
      SpGraph graph = build_sp_graph(working);
      SpState start;
      if (config.warm_start && warm.available) {
        start = trivial_sp_state(graph);
        for (int e = 0; e < graph.num_edges(); ++e) {
          const auto& info = graph.edges[static_cast<size_t>(e)];
          const auto key = std::make_pair(clause_uid[static_cast<size_t>(info.clause)],
                                          info.var);
          if (auto it = warm.q_hat.find(key); it != warm.q_hat.end())
            start.q_hat[static_cast<size_t>(e)] = it->second;
          if (auto it = warm.q_triple.find(key); it != warm.q_triple.end())
            start.q_triple[static_cast<size_t>(e)] = it->second;
        }
      } else {
        start = init_sp_state(graph, engine_cfg);
      }
      SpReport report = run_sp(graph, working, engine_cfg, SpMode::kDirect, &start);
      engine_iterations = report.iterations;
      engine_delta = report.final_delta;
      contradiction = report.contradiction;
      converged = report.converged();
      if (converged) {
        biases = sp_biases(graph, report.state, config.normalized_biases);
        if (config.warm_start) {
          warm.q_hat.clear();
          warm.q_triple.clear();
          for (int e = 0; e < graph.num_edges(); ++e) {
            const auto& info = graph.edges[static_cast<size_t>(e)];
            const auto key = std::make_pair(clause_uid[static_cast<size_t>(info.clause)],
                                            info.var);
            warm.q_hat[key] = report.state.q_hat[static_cast<size_t>(e)];
            warm.q_triple[key] = report.state.q_triple[static_cast<size_t>(e)];
          }
          warm.available = true;
        }
      }
    } else {
      TensorFactorGraph graph = build_tfg(working);
      BpReport report;
      if (config.warm_start && warm.available) {
        BpConfig uniform_cfg = engine_cfg;
        uniform_cfg.init = BpInit::kUniform;
        EnvironmentSet start = init_environments(graph, uniform_cfg);
        for (int e = 0; e < graph.num_edges(); ++e) {
          const TfgEdge& ed = graph.edge(e);
          const int uid = clause_uid[static_cast<size_t>(ed.node_b - working.num_vars)];
          const auto key = std::make_pair(uid, ed.node_a);
          if (auto it = warm.bp_var_to_clause.find(key); it != warm.bp_var_to_clause.end())
            start.env[static_cast<size_t>(2 * e)] = it->second;
          if (auto it = warm.bp_clause_to_var.find(key); it != warm.bp_clause_to_var.end())
            start.env[static_cast<size_t>(2 * e + 1)] = it->second;
        }
        report = run_bp(graph, engine_cfg, start);
      } else {
        report = run_bp(graph, engine_cfg);
      }
      engine_iterations = report.iterations;
      engine_delta = report.final_delta;
      contradiction = report.contradiction;
      converged = report.converged();
      if (converged) {
        try {
          biases = bp_biases(graph, report.environments, working.num_vars);
        } catch (const ContradictionError&) {
          contradiction = true;
          converged = false;
        }
        if (converged && config.warm_start) {
          warm.bp_var_to_clause.clear();
          warm.bp_clause_to_var.clear();
          for (int e = 0; e < graph.num_edges(); ++e) {
            const TfgEdge& ed = graph.edge(e);
            const int uid = clause_uid[static_cast<size_t>(ed.node_b - working.num_vars)];
            warm.bp_var_to_clause[{uid, ed.node_a}] = report.environments.at(2 * e);
            warm.bp_clause_to_var[{uid, ed.node_a}] = report.environments.at(2 * e + 1);
          }
          warm.available = true;
        }
      }
    }

    if (!converged) {
      result.engine_converged_throughout = false;
      result.status = contradiction ? SolveStatus::kContradiction : SolveStatus::kUnknown;
      return result;
    }

    // Most biased unfixed variable; ties break toward the lowest index.
    int best_var = -1;
    double best_abs = -1.0;
    for (int v = 0; v < working.num_vars; ++v) {
      if (working.fixed_assignments.count(v)) continue;
      const double b = std::abs(biases.bias[static_cast<size_t>(v)]);
      if (b > best_abs) {
        best_abs = b;
        best_var = v;
      }
    }
    if (best_var < 0) return finish_sat(instance, working, std::move(result));

    if (config.engine == SolverEngine::kSp && best_abs < config.bias_threshold) {
      // Trivial-survey regime: hand the residual to local search.
      if (!config.walksat_on_residual) {
        result.status = SolveStatus::kUnknown;
        return result;
      }
      SolveResult ws =
          walksat(working, config.walksat_flips, config.walksat_mixing,
                  derive_seed(config.seed, 0x77616c6bu), config.restrict_greedy);
      result.walksat_flips_used = ws.walksat_flips_used;
      if (ws.status != SolveStatus::kSat) {
        result.status = ws.status;
        return result;
      }
      result.status = SolveStatus::kSat;
      result.assignment = ws.assignment;
      if (energy(instance, result.assignment) != 0)
        throw std::logic_error("pipeline produced an unverified assignment");
      return result;
    }

    const bool value = biases.bias[static_cast<size_t>(best_var)] <= 0.0;
    if (!apply_fix(best_var, value)) {
      result.status = SolveStatus::kContradiction;
      return result;
    }
    ++result.decimation_steps;
    result.trace.push_back(DecimationStep{DecimationStep::Source::kEngine, best_var, value,
                                          biases.bias[static_cast<size_t>(best_var)],
                                          engine_iterations, engine_delta});

    if (unit_prop) {
      bool changed = true;
      while (changed) {
        changed = false;
        for (const Clause& c : working.clauses) {
          if (c.size() != 1) continue;
          const Literal l = c[0];
          if (!apply_fix(l.var, !l.negated)) {
            result.status = SolveStatus::kContradiction;
            return result;
          }
          result.trace.push_back(DecimationStep{DecimationStep::Source::kUnitPropagation,
                                                l.var, !l.negated, 0.0, 0, 0.0});
          changed = true;
          break;
        }
      }
    }
  }
}

SolveResult solve_pipeline(const CnfInstance& instance, DecimationConfig config) {
  config.engine = SolverEngine::kSp;
  config.walksat_on_residual = true;
  return decimate(instance, config);
}

}  // namespace cavitytn
