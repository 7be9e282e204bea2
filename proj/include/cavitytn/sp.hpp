#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "cavitytn/bp.hpp"
#include "cavitytn/cnf.hpp"
#include "cavitytn/tfg.hpp"

namespace cavitytn {

/// Occurrence structure of an instance laid out per edge (one edge per
/// clause-literal pair, numbered exactly like build_tfg / build_sp_tfg).
struct SpGraph {
  struct EdgeInfo {
    int var = -1;
    int clause = -1;
    bool negated = false;
  };
  int num_vars = 0;
  int num_clauses = 0;
  std::vector<EdgeInfo> edges;
  std::vector<std::vector<int>> var_edges;     // per variable, ascending ids
  std::vector<std::vector<int>> clause_edges;  // per clause, ascending ids
  // Sibling edges of the same variable, split by literal sign relative to
  // this edge (the same-direction / opposite-direction clause sets).
  std::vector<std::vector<int>> same_sign;
  std::vector<std::vector<int>> opposite_sign;

  int num_edges() const { return static_cast<int>(edges.size()); }
};

SpGraph build_sp_graph(const CnfInstance& instance);

/// Survey propagation messages: one scalar per clause->variable edge and
/// one normalized (Q_U, Q_S, Q_*) triple per variable->clause edge.
struct SpState {
  std::vector<double> q_hat;
  std::vector<Eigen::Vector3d> q_triple;
};

/// All-zero warnings, all triples at (0,0,1): invariant under both update
/// paths.
SpState trivial_sp_state(const SpGraph& graph);

/// Uniform or simplex-uniform random state, deterministic in the seed.
SpState init_sp_state(const SpGraph& graph, const BpConfig& config);

/// Clause -> variable warning: product of Q_U over the other literals.
double sp_update_clause_to_var(const SpGraph& graph, const SpState& state, int edge);

/// Variable -> clause triple from the sibling warnings; nullopt when all
/// three components vanish (contradictory forcing).
std::optional<Eigen::Vector3d> sp_update_var_to_clause(const SpGraph& graph,
                                                       const SpState& state, int edge);

/// Embedding into the 5-vector bond basis (Qhat, 1-Qhat, Q_U, Q_S, Q_*) on
/// the auxiliary network's directed edges, and its lossless inverse.
EnvironmentSet embed_sp_state(const TensorFactorGraph& sp_tfg, const SpState& state);
SpState project_environments(const TensorFactorGraph& sp_tfg, const EnvironmentSet& envs);

/// Raw directional-tensor contraction for one directed edge of the
/// auxiliary network (generic tensor path; equals the direct update).
Eigen::VectorXd sp_update_tensor(const TensorFactorGraph& sp_tfg,
                                 const EnvironmentSet& envs, int from_node, int edge_id);

enum class SpMode { kDirect, kTensor };

struct SpReport {
  BpStatus status = BpStatus::kFailure;
  int iterations = 0;
  double final_delta = 0.0;
  bool contradiction = false;
  SpState state;

  bool converged() const { return status == BpStatus::kSuccess; }
};

/// Sweeps the SP equations with the BP convergence contract (L1 distances
/// on the 5-vector embedding). kDirect runs the sparse products; kTensor
/// runs regular tensorized BP on the auxiliary network. Identical seeds
/// give identical trajectories in either mode.
SpReport run_sp(const CnfInstance& instance, const BpConfig& config,
                SpMode mode = SpMode::kDirect);
SpReport run_sp(const SpGraph& graph, const CnfInstance& instance, const BpConfig& config,
                SpMode mode, const SpState* warm_start);

/// Per-variable decimation statistics: bias = p0 - p1.
struct BiasVector {
  std::vector<double> p0, p1, bias;
};

/// Survey-propagation biases from converged warnings. The normalized
/// variant divides by p0 + p1 + p_free.
BiasVector sp_biases(const SpGraph& graph, const SpState& state, bool normalized = false);

/// Belief-propagation biases from variable marginals: bias = m(0) - m(1).
BiasVector bp_biases(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                     int num_vars);

}  // namespace cavitytn
