#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cavitytn/tfg.hpp"

namespace cavitytn {

/// Raised when a query hits a locally contradictory state (zero normalizer).
class ContradictionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One nonnegative L1-normalized vector per directed edge. Directed slot
/// layout follows TensorFactorGraph::env_index.
struct EnvironmentSet {
  std::vector<Eigen::VectorXd> env;

  Eigen::VectorXd& at(int directed_index) { return env[static_cast<size_t>(directed_index)]; }
  const Eigen::VectorXd& at(int directed_index) const {
    return env[static_cast<size_t>(directed_index)];
  }
};

enum class BpStatus { kSuccess, kFailure };
enum class BpSchedule { kInPlace, kTwoPhase };
enum class BpInit { kUniform, kRandom };

struct BpConfig {
  double tolerance = 1e-3;
  int max_iterations = 1000;
  BpSchedule schedule = BpSchedule::kInPlace;
  double damping = 0.0;
  std::uint64_t seed = 0;
  BpInit init = BpInit::kRandom;
};

struct BpReport {
  BpStatus status = BpStatus::kFailure;
  int iterations = 0;
  double final_delta = 0.0;
  bool contradiction = false;
  EnvironmentSet environments;

  bool converged() const { return status == BpStatus::kSuccess; }
};

/// One vector per directed edge: uniform 1/extent, or i.i.d. uniform(0,1)
/// then L1-normalized. Deterministic in the seed.
EnvironmentSet init_environments(const TensorFactorGraph& graph, const BpConfig& config);

/// Single fixed-point update: contracts the source node tensor with every
/// incoming environment except the target's and L1-normalizes. Returns
/// nullopt when the raw result is the zero vector (locally contradictory).
std::optional<Eigen::VectorXd> update_environment(const TensorFactorGraph& graph,
                                                  const EnvironmentSet& envs,
                                                  int from_node, int edge_id);

/// Sweeps all directed edges (node id, then edge id order) until the maximum
/// L1 distance between successive environments drops below the tolerance.
BpReport run_bp(const TensorFactorGraph& graph, const BpConfig& config);
BpReport run_bp(const TensorFactorGraph& graph, const BpConfig& config,
                const EnvironmentSet& initial);

struct Marginal {
  Eigen::VectorXd distribution;
  double local_z = 0.0;  // raw normalizer (local partition function)
};

/// Single-variable marginal of a variable node with its local partition
/// value. Throws ContradictionError on a zero normalizer.
Marginal variable_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                           int node_id);

/// Bond distribution: elementwise product of the two opposing environments.
Marginal bond_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                       int edge_id);

struct RegionMarginal {
  Tensor distribution;  // over the node's physical and bond labels
  double local_z = 0.0;
};

/// Joint marginal of a node region: node tensor times all incoming
/// environments, normalized.
RegionMarginal region_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                               int node_id);

/// Bethe free entropy from local partition functions:
/// sum_nodes log Z_node - sum_bonds log Z_bond. Exact log Z on trees.
double bethe_free_entropy(const TensorFactorGraph& graph, const EnvironmentSet& envs);

struct BetheMarginals {
  std::vector<RegionMarginal> regions;  // per node
  std::vector<Marginal> bonds;          // per edge
};

BetheMarginals collect_marginals(const TensorFactorGraph& graph,
                                 const EnvironmentSet& envs);

/// Bethe free entropy in its relative-entropy form over region and bond
/// marginals; agrees with bethe_free_entropy at any BP fixed point.
double bethe_free_entropy_from_marginals(const TensorFactorGraph& graph,
                                         const BetheMarginals& marginals);

}  // namespace cavitytn
