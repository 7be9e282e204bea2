#include "cavitytn/tfg.hpp"

#include <algorithm>
#include <stdexcept>

#include "cavitytn/rng.hpp"

namespace cavitytn {

int TensorFactorGraph::add_node(TfgNode node) {
  nodes_.push_back(std::move(node));
  return num_nodes() - 1;
}

int TensorFactorGraph::add_edge(int node_a, int node_b, std::int64_t extent) {
  if (node_a < 0 || node_a >= num_nodes() || node_b < 0 || node_b >= num_nodes())
    throw std::invalid_argument("edge endpoint out of range");
  edges_.push_back(TfgEdge{node_a, node_b, extent});
  int id = num_edges() - 1;
  nodes_[static_cast<size_t>(node_a)].edges.push_back(id);
  nodes_[static_cast<size_t>(node_b)].edges.push_back(id);
  return id;
}

void TensorFactorGraph::set_tensor(int node, Tensor t, bool copy_tensor,
                                   bool has_physical) {
  auto& n = nodes_[static_cast<size_t>(node)];
  n.tensor = std::move(t);
  n.copy_tensor = copy_tensor;
  n.has_physical = has_physical;
}

void TensorFactorGraph::set_directional(int node, int edge, Tensor t) {
  directional_[{node, edge}] = std::move(t);
}

int TensorFactorGraph::neighbor(int edge_id, int node_id) const {
  const TfgEdge& e = edges_[static_cast<size_t>(edge_id)];
  if (e.node_a == node_id) return e.node_b;
  if (e.node_b == node_id) return e.node_a;
  throw std::invalid_argument("node not incident to edge");
}

int TensorFactorGraph::env_index(int edge_id, int from_node) const {
  const TfgEdge& e = edges_[static_cast<size_t>(edge_id)];
  if (e.node_a == from_node) return 2 * edge_id;
  if (e.node_b == from_node) return 2 * edge_id + 1;
  throw std::invalid_argument("node not incident to edge");
}

const Tensor* TensorFactorGraph::directional_tensor(int node, int edge) const {
  auto it = directional_.find({node, edge});
  return it == directional_.end() ? nullptr : &it->second;
}

void TensorFactorGraph::validate() const {
  for (int e = 0; e < num_edges(); ++e) {
    const TfgEdge& ed = edges_[static_cast<size_t>(e)];
    if (node(ed.node_a).kind == node(ed.node_b).kind)
      throw std::logic_error("graph is not bipartite");
    for (int nid : {ed.node_a, ed.node_b}) {
      const TfgNode& n = node(nid);
      if (!n.tensor.has_label(e))
        throw std::logic_error("node tensor missing incident edge label");
      if (n.tensor.extent_of(e) != ed.extent)
        throw std::logic_error("bond extent mismatch");
    }
  }
  for (int i = 0; i < num_nodes(); ++i) {
    const TfgNode& n = node(i);
    size_t expected = n.edges.size() + (n.has_physical ? 1u : 0u);
    if (n.tensor.labels().size() != expected)
      throw std::logic_error("node tensor label count mismatch");
    for (int e : n.edges)
      if (!n.tensor.has_label(e))
        throw std::logic_error("node adjacency and labels disagree");
  }
}

Tensor sat_factor_tensor(const Clause& clause) {
  std::vector<Label> labels(clause.size());
  for (size_t i = 0; i < clause.size(); ++i) labels[i] = static_cast<Label>(i);
  return sat_factor_tensor(clause, std::move(labels));
}

Tensor sat_factor_tensor(const Clause& clause, std::vector<Label> labels) {
  const int k = static_cast<int>(clause.size());
  if (k < 1) throw std::invalid_argument("clause must be nonempty");
  if (labels.size() != clause.size())
    throw std::invalid_argument("label count mismatch");
  const std::int64_t size = std::int64_t{1} << k;
  Eigen::VectorXd vals = Eigen::VectorXd::Ones(size);
  std::int64_t violating = 0;
  for (int i = 0; i < k; ++i) {
    violating <<= 1;
    violating |= clause[static_cast<size_t>(i)].violating_value() ? 1 : 0;
  }
  vals(violating) = 0.0;
  return Tensor::dense(std::move(labels), std::vector<std::int64_t>(static_cast<size_t>(k), 2),
                       std::move(vals));
}

TensorFactorGraph build_tfg(const CnfInstance& instance, PhysicalIndices physical) {
  TensorFactorGraph g;
  const int n = instance.num_vars;
  for (int v = 0; v < n; ++v) {
    TfgNode node;
    node.kind = NodeKind::kVariable;
    node.alphabet = 2;
    g.add_node(std::move(node));
  }
  for (int a = 0; a < instance.num_clauses(); ++a) {
    TfgNode node;
    node.kind = NodeKind::kFactor;
    g.add_node(std::move(node));
  }
  // Edges in clause-by-clause, literal-by-literal order.
  for (int a = 0; a < instance.num_clauses(); ++a)
    for (const Literal& l : instance.clauses[static_cast<size_t>(a)])
      g.add_edge(l.var, n + a, 2);

  for (int a = 0; a < instance.num_clauses(); ++a) {
    const int node_id = n + a;
    std::vector<Label> labels(g.node(node_id).edges.begin(), g.node(node_id).edges.end());
    g.set_tensor(node_id,
                 sat_factor_tensor(instance.clauses[static_cast<size_t>(a)], labels),
                 false, false);
  }
  for (int v = 0; v < n; ++v) {
    const auto& edges = g.node(v).edges;
    if (edges.empty()) {
      // Free variable: contributes a factor 2 to the contraction.
      g.set_tensor(v,
                   Tensor::dense({physical_label(v)}, {2}, Eigen::VectorXd::Ones(2)),
                   false, true);
      continue;
    }
    std::vector<Label> labels;
    if (physical == PhysicalIndices::kOpen) labels.push_back(physical_label(v));
    labels.insert(labels.end(), edges.begin(), edges.end());
    const int rank = static_cast<int>(labels.size());
    g.set_tensor(v, delta_tensor(2, rank, std::move(labels)), true,
                 physical == PhysicalIndices::kOpen);
  }
  return g;
}

std::map<std::pair<int, int>, Neighborhood> classify_neighborhoods(
    const CnfInstance& instance) {
  // Per variable: list of (clause, negated) occurrences.
  std::vector<std::vector<std::pair<int, bool>>> occ(
      static_cast<size_t>(instance.num_vars));
  for (int a = 0; a < instance.num_clauses(); ++a)
    for (const Literal& l : instance.clauses[static_cast<size_t>(a)])
      occ[static_cast<size_t>(l.var)].emplace_back(a, l.negated);

  std::map<std::pair<int, int>, Neighborhood> out;
  for (int v = 0; v < instance.num_vars; ++v) {
    for (const auto& [a, neg_a] : occ[static_cast<size_t>(v)]) {
      Neighborhood nb;
      for (const auto& [b, neg_b] : occ[static_cast<size_t>(v)]) {
        if (b == a) continue;
        (neg_b == neg_a ? nb.same_sign : nb.opposite_sign).push_back(b);
      }
      out.emplace(std::make_pair(v, a), std::move(nb));
    }
  }
  return out;
}

namespace {

// 0-based slots of the 5-dimensional SP bond basis
// (Qhat, 1-Qhat, Q_U, Q_S, Q_*).
constexpr std::int64_t kSlotQhat = 0;
constexpr std::int64_t kSlotOneMinusQhat = 1;
constexpr std::int64_t kSlotU = 2;
constexpr std::int64_t kSlotS = 3;
constexpr std::int64_t kSlotStar = 4;

// Adds `value` at the multi index given as (position -> slot) over `rank`
// legs, row-major extent 5.
void add_entry(std::map<FlatIndex, double>& entries, const std::vector<std::int64_t>& slots) {
  FlatIndex flat = 0;
  for (std::int64_t s : slots) flat = flat * 5 + static_cast<FlatIndex>(s);
  entries[flat] += 1.0;
}

// Directional clause->variable tensor over the clause's legs. The out leg
// carries the (Qhat, 1-Qhat) pair: the Qhat component reads Q_U off every
// other leg, the complement component spans the rest of the triple
// subspace.
Tensor sp_clause_tensor(const std::vector<Label>& labels, int out_pos) {
  const int rank = static_cast<int>(labels.size());
  std::map<FlatIndex, double> entries;
  std::vector<std::int64_t> slots(static_cast<size_t>(rank));

  // e1 (x) A^C: every in leg at the Q_U slot.
  for (int i = 0; i < rank; ++i)
    slots[static_cast<size_t>(i)] = (i == out_pos) ? kSlotQhat : kSlotU;
  add_entry(entries, slots);

  // e2 (x) (1^C - A^C): in legs over {Q_U, Q_S, Q_*} except the all-Q_U
  // combination. A unit clause has no in legs and the term vanishes.
  const int in_count = rank - 1;
  if (in_count > 0) {
    std::vector<std::int64_t> combo(static_cast<size_t>(in_count), 0);
    for (;;) {
      if (std::any_of(combo.begin(), combo.end(), [](std::int64_t c) { return c != 0; })) {
        int ci = 0;
        for (int i = 0; i < rank; ++i)
          slots[static_cast<size_t>(i)] =
              (i == out_pos) ? kSlotOneMinusQhat
                             : kSlotU + combo[static_cast<size_t>(ci++)];
        add_entry(entries, slots);
      }
      int d = in_count - 1;
      while (d >= 0 && ++combo[static_cast<size_t>(d)] == 3) combo[static_cast<size_t>(d--)] = 0;
      if (d < 0) break;
    }
  }
  return Tensor::sparse(labels, std::vector<std::int64_t>(static_cast<size_t>(rank), 5),
                        std::move(entries));
}

// Directional variable->clause tensor over the variable's legs. The out leg
// carries the (Q_U, Q_S, Q_*) triple; in legs are split between the
// same-sign and opposite-sign clause sets.
Tensor sp_variable_tensor(const std::vector<Label>& labels, int out_pos,
                          const std::vector<int>& same_pos,
                          const std::vector<int>& opp_pos) {
  const int rank = static_cast<int>(labels.size());
  std::map<FlatIndex, double> entries;
  std::vector<std::int64_t> slots(static_cast<size_t>(rank));

  // out_slot (x) A^pinned (x) (1^free - A^free): pinned legs sit at the
  // 1-Qhat slot; free legs run over {Qhat, 1-Qhat} minus the all-(1-Qhat)
  // combination. An empty free set makes the whole term vanish.
  auto emit = [&](std::int64_t out_slot, const std::vector<int>& pinned_pos,
                  const std::vector<int>& free_pos) {
    if (free_pos.empty()) return;
    std::vector<std::int64_t> combo(free_pos.size(), 0);  // 0 -> Qhat, 1 -> 1-Qhat
    for (;;) {
      if (std::any_of(combo.begin(), combo.end(), [](std::int64_t c) { return c != 1; })) {
        slots[static_cast<size_t>(out_pos)] = out_slot;
        for (int p : pinned_pos) slots[static_cast<size_t>(p)] = kSlotOneMinusQhat;
        for (size_t i = 0; i < free_pos.size(); ++i)
          slots[static_cast<size_t>(free_pos[i])] =
              combo[i] == 0 ? kSlotQhat : kSlotOneMinusQhat;
        add_entry(entries, slots);
      }
      int d = static_cast<int>(free_pos.size()) - 1;
      while (d >= 0 && ++combo[static_cast<size_t>(d)] == 2) combo[static_cast<size_t>(d--)] = 0;
      if (d < 0) break;
    }
  };

  emit(kSlotU, same_pos, opp_pos);  // e3 (x) A^S (x) (1^U - A^U)
  emit(kSlotS, opp_pos, same_pos);  // e4 (x) A^U (x) (1^S - A^S)

  // e5 (x) A^S (x) A^U: every in leg at 1-Qhat.
  slots[static_cast<size_t>(out_pos)] = kSlotStar;
  for (int p : same_pos) slots[static_cast<size_t>(p)] = kSlotOneMinusQhat;
  for (int p : opp_pos) slots[static_cast<size_t>(p)] = kSlotOneMinusQhat;
  add_entry(entries, slots);

  return Tensor::sparse(labels, std::vector<std::int64_t>(static_cast<size_t>(rank), 5),
                        std::move(entries));
}

Tensor sum_sparse_tensors(const std::vector<Tensor>& ts) {
  std::map<FlatIndex, double> entries;
  for (const Tensor& t : ts)
    t.for_each_nonzero([&](FlatIndex k, double v) { entries[k] += v; });
  return Tensor::sparse(ts.front().labels(), ts.front().extents(), std::move(entries));
}

}  // namespace

TensorFactorGraph build_sp_tfg(const CnfInstance& instance) {
  TensorFactorGraph g;
  const int n = instance.num_vars;
  for (int v = 0; v < n; ++v)
    g.add_node(TfgNode{NodeKind::kVariable, Tensor{}, {}, false, false, 5});
  for (int a = 0; a < instance.num_clauses(); ++a)
    g.add_node(TfgNode{NodeKind::kFactor, Tensor{}, {}, false, false, 5});
  for (int a = 0; a < instance.num_clauses(); ++a)
    for (const Literal& l : instance.clauses[static_cast<size_t>(a)])
      g.add_edge(l.var, n + a, 5);

  auto neighborhoods = classify_neighborhoods(instance);

  // Clause nodes.
  for (int a = 0; a < instance.num_clauses(); ++a) {
    const int node_id = n + a;
    const auto& edges = g.node(node_id).edges;
    std::vector<Label> labels(edges.begin(), edges.end());
    std::vector<Tensor> dirs;
    for (size_t pos = 0; pos < edges.size(); ++pos) {
      Tensor t = sp_clause_tensor(labels, static_cast<int>(pos));
      g.set_directional(node_id, edges[pos], t);
      dirs.push_back(std::move(t));
    }
    g.set_tensor(node_id, sum_sparse_tensors(dirs), false, false);
  }

  // Variable nodes. A variable's legs are its clause occurrences in edge-id
  // order; per out leg the remaining legs split into same/opposite sign.
  for (int v = 0; v < n; ++v) {
    const auto& edges = g.node(v).edges;
    if (edges.empty()) {
      // Unconstrained variable; keep a trivial scalar-like open tensor so
      // the graph stays well formed.
      g.set_tensor(v, Tensor::dense({physical_label(v)}, {1}, Eigen::VectorXd::Ones(1)),
                   false, true);
      continue;
    }
    std::vector<Label> labels(edges.begin(), edges.end());
    // Clause index and sign per leg.
    std::vector<std::pair<int, bool>> leg_clause(edges.size());
    for (size_t i = 0; i < edges.size(); ++i) {
      int clause_node = g.neighbor(edges[i], v);
      int a = clause_node - n;
      bool negated = false;
      for (const Literal& l : instance.clauses[static_cast<size_t>(a)])
        if (l.var == v) negated = l.negated;
      leg_clause[i] = {a, negated};
    }
    std::vector<Tensor> dirs;
    for (size_t pos = 0; pos < edges.size(); ++pos) {
      std::vector<int> same_pos, opp_pos;
      for (size_t i = 0; i < edges.size(); ++i) {
        if (i == pos) continue;
        (leg_clause[i].second == leg_clause[pos].second ? same_pos : opp_pos)
            .push_back(static_cast<int>(i));
      }
      Tensor t = sp_variable_tensor(labels, static_cast<int>(pos), same_pos, opp_pos);
      g.set_directional(v, edges[pos], t);
      dirs.push_back(std::move(t));
    }
    g.set_tensor(v, sum_sparse_tensors(dirs), false, false);
  }
  return g;
}

TensorFactorGraph build_cubic_lattice_tfg(int side, std::int64_t bond_extent,
                                          std::uint64_t seed) {
  if (side < 2) throw std::invalid_argument("lattice side must be at least 2");
  TensorFactorGraph g;
  auto id_of = [side](int x, int y, int z) { return (x * side + y) * side + z; };
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y)
      for (int z = 0; z < side; ++z) {
        TfgNode node;
        node.kind = ((x + y + z) % 2 == 0) ? NodeKind::kVariable : NodeKind::kFactor;
        node.alphabet = bond_extent;
        g.add_node(std::move(node));
      }
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y)
      for (int z = 0; z < side; ++z) {
        if (x + 1 < side) g.add_edge(id_of(x, y, z), id_of(x + 1, y, z), bond_extent);
        if (y + 1 < side) g.add_edge(id_of(x, y, z), id_of(x, y + 1, z), bond_extent);
        if (z + 1 < side) g.add_edge(id_of(x, y, z), id_of(x, y, z + 1), bond_extent);
      }
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  for (int i = 0; i < g.num_nodes(); ++i) {
    const auto& edges = g.node(i).edges;
    std::vector<Label> labels(edges.begin(), edges.end());
    std::vector<std::int64_t> extents(edges.size(), bond_extent);
    std::int64_t size = 1;
    for (std::int64_t e : extents) size *= e;
    Eigen::VectorXd vals(size);
    for (std::int64_t j = 0; j < size; ++j) vals(j) = dist(rng);
    g.set_tensor(i, Tensor::dense(std::move(labels), std::move(extents), std::move(vals)),
                 false, false);
  }
  return g;
}

}  // namespace cavitytn
