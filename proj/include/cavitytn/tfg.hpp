#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "cavitytn/cnf.hpp"
#include "cavitytn/tensor.hpp"

namespace cavitytn {

enum class NodeKind { kVariable, kFactor };

struct TfgNode {
  NodeKind kind = NodeKind::kVariable;
  Tensor tensor;
  std::vector<int> edges;  // incident edge ids, order matches tensor labels
  bool copy_tensor = false;
  bool has_physical = false;  // tensor carries an open physical label
  std::int64_t alphabet = 2;
};

struct TfgEdge {
  int node_a = -1;  // variable side for CNF-derived graphs
  int node_b = -1;
  std::int64_t extent = 2;
};

/// Bipartite tensor network of variable and factor nodes. For survey
/// propagation graphs each (node, outgoing edge) pair additionally carries a
/// directional update tensor.
class TensorFactorGraph {
 public:
  int add_node(TfgNode node);
  int add_edge(int node_a, int node_b, std::int64_t extent);
  void set_tensor(int node, Tensor t, bool copy_tensor, bool has_physical);
  void set_directional(int node, int edge, Tensor t);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const TfgNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  const TfgEdge& edge(int id) const { return edges_[static_cast<size_t>(id)]; }
  const std::vector<TfgNode>& nodes() const { return nodes_; }
  const std::vector<TfgEdge>& edges() const { return edges_; }

  int neighbor(int edge_id, int node_id) const;
  /// Directed environment slot: 2*edge + 0 for node_a -> node_b, +1 reverse.
  int env_index(int edge_id, int from_node) const;
  int num_directed_edges() const { return 2 * num_edges(); }

  const Tensor* directional_tensor(int node, int edge) const;
  bool has_directional() const { return !directional_.empty(); }

  /// Checks bipartiteness, label/edge agreement and extent consistency;
  /// throws on violation.
  void validate() const;

 private:
  std::vector<TfgNode> nodes_;
  std::vector<TfgEdge> edges_;
  std::map<std::pair<int, int>, Tensor> directional_;
};

/// Whether build_tfg absorbs the open physical indices into the variable
/// copy tensors (the default) or keeps them open for marginal inspection.
enum class PhysicalIndices { kAbsorbed, kOpen };

/// Factor tensor of one clause: every entry 1 except a single 0 at the
/// unique violating configuration.
Tensor sat_factor_tensor(const Clause& clause, std::vector<Label> labels);
Tensor sat_factor_tensor(const Clause& clause);

/// Tensor network of a CNF instance: one copy tensor per variable, one
/// clause tensor per factor; full contraction equals the SAT-assignment
/// count. Variable node ids are 0..N-1, clause node ids N..N+M-1; edges are
/// numbered clause by clause, literal by literal. Degree-0 variables carry
/// the free tensor (1,1).
TensorFactorGraph build_tfg(const CnfInstance& instance,
                            PhysicalIndices physical = PhysicalIndices::kAbsorbed);

/// Clause neighborhoods split by forcing direction: for edge (j,a), S holds
/// the clauses b != a containing j with the same literal sign as in a, U
/// those with the opposite sign.
struct Neighborhood {
  std::vector<int> same_sign;
  std::vector<int> opposite_sign;
};
std::map<std::pair<int, int>, Neighborhood> classify_neighborhoods(
    const CnfInstance& instance);

/// Auxiliary survey-propagation network over bond extent 5 with the basis
/// order (Qhat, 1-Qhat, Q_U, Q_S, Q_*). Topology matches build_tfg; node
/// tensors are the sums of the per-direction update tensors, which are also
/// stored individually.
TensorFactorGraph build_sp_tfg(const CnfInstance& instance);

/// Periodic-free LxLxL cubic-lattice tensor network with uniformly random
/// positive entries; bipartite by site parity. Used for benchmarks.
TensorFactorGraph build_cubic_lattice_tfg(int side, std::int64_t bond_extent,
                                          std::uint64_t seed);

}  // namespace cavitytn
