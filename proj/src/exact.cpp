#include "cavitytn/exact.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cavitytn {

ExactSummary enumerate_all(const CnfInstance& instance, int limit) {
  const int n = instance.num_vars;
  if (n > limit)
    throw std::invalid_argument("enumeration refused: " + std::to_string(n) +
                                " variables exceeds limit " + std::to_string(limit));
  // Clause as (mask, violating pattern): violated iff (x & mask) == pattern.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> tests;
  tests.reserve(instance.clauses.size());
  for (const Clause& c : instance.clauses) {
    std::uint32_t mask = 0, pattern = 0;
    for (const Literal& l : c) {
      mask |= 1u << l.var;
      if (l.violating_value()) pattern |= 1u << l.var;
    }
    tests.emplace_back(mask, pattern);
  }

  std::int64_t count = 0;
  std::vector<std::int64_t> ones(static_cast<size_t>(n), 0);
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t x = 0; x < total; ++x) {
    bool sat = true;
    for (const auto& [mask, pattern] : tests)
      if ((static_cast<std::uint32_t>(x) & mask) == pattern) {
        sat = false;
        break;
      }
    if (!sat) continue;
    ++count;
    std::uint32_t bits = static_cast<std::uint32_t>(x);
    while (bits) {
      ones[static_cast<size_t>(std::countr_zero(bits))] += 1;
      bits &= bits - 1;
    }
  }

  ExactSummary s;
  s.count = count;
  if (count == 0) {
    s.entropy = -std::numeric_limits<double>::infinity();
    s.per_variable_entropy = -std::numeric_limits<double>::infinity();
    return s;
  }
  s.marginals.resize(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    const double p1 = static_cast<double>(ones[static_cast<size_t>(v)]) /
                      static_cast<double>(count);
    s.marginals[static_cast<size_t>(v)] = {1.0 - p1, p1};
  }
  s.entropy = std::log(static_cast<double>(count));
  s.per_variable_entropy = n ? s.entropy / n : 0.0;
  return s;
}

double exact_contract(const TensorFactorGraph& graph, std::int64_t config_limit) {
  // Copy tensors pin all their incident bonds to one shared value, so the
  // independent index groups are found by union-find over bond labels.
  const int ne = graph.num_edges();
  std::vector<int> parent(static_cast<size_t>(ne));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

  for (int i = 0; i < graph.num_nodes(); ++i) {
    const TfgNode& n = graph.node(i);
    if (n.copy_tensor && n.edges.size() > 1)
      for (size_t q = 1; q < n.edges.size(); ++q) unite(n.edges[0], n.edges[q]);
  }

  std::vector<int> group_of(static_cast<size_t>(ne), -1);
  std::vector<std::int64_t> group_extent;
  for (int e = 0; e < ne; ++e) {
    const int root = find(e);
    if (group_of[static_cast<size_t>(root)] < 0) {
      group_of[static_cast<size_t>(root)] = static_cast<int>(group_extent.size());
      group_extent.push_back(graph.edge(root).extent);
    }
    group_of[static_cast<size_t>(e)] = group_of[static_cast<size_t>(root)];
    if (graph.edge(e).extent != group_extent[static_cast<size_t>(group_of[static_cast<size_t>(e)])])
      throw std::logic_error("copy tensor joins bonds of unequal extent");
  }

  double space = 1.0;
  for (std::int64_t g : group_extent) space *= static_cast<double>(g);
  if (space > static_cast<double>(config_limit))
    throw std::invalid_argument("exact contraction refused: configuration space too large");

  // Free (degree-0) nodes contribute the plain sum of their entries.
  double free_factor = 1.0;
  std::vector<int> active_nodes;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    if (graph.node(i).edges.empty())
      free_factor *= graph.node(i).tensor.sum();
    else
      active_nodes.push_back(i);
  }

  const auto num_groups = static_cast<int>(group_extent.size());
  std::vector<std::int64_t> values(static_cast<size_t>(num_groups), 0);
  std::vector<std::int64_t> scratch_idx;
  double total = 0.0;
  for (;;) {
    double prod = free_factor;
    for (int i : active_nodes) {
      const TfgNode& n = graph.node(i);
      if (n.copy_tensor) continue;  // contributes 1 at its pinned diagonal
      scratch_idx.clear();
      for (Label l : n.tensor.labels()) {
        if (l >= 0) {
          const int g = group_of[static_cast<size_t>(l)];
          scratch_idx.push_back(values[static_cast<size_t>(g)]);
        } else {
          // Physical label on an edge-bearing node: sum it out. Only copy
          // tensors carry one in our builders, handled below.
          throw std::logic_error("open physical label on a non-copy node");
        }
      }
      prod *= n.tensor.value_at(scratch_idx);
      if (prod == 0.0) break;
    }
    // Copy nodes with an open physical index sum the physical alphabet and
    // would multiply by 1 for each bond configuration on their diagonal; in
    // absorbed form the diagonal entry is already 1.
    total += prod;

    int g = num_groups - 1;
    while (g >= 0 && ++values[static_cast<size_t>(g)] == group_extent[static_cast<size_t>(g)])
      values[static_cast<size_t>(g--)] = 0;
    if (g < 0) break;
  }
  return total;
}

double marginal_distance(const ExactSummary& exact, const EstimatedMarginals& estimated) {
  if (exact.unsat()) return estimated.unsat_claimed
                                ? 0.0
                                : std::numeric_limits<double>::quiet_NaN();
  if (estimated.unsat_claimed) return 1.0;
  if (estimated.marginals.size() != exact.marginals.size())
    throw std::invalid_argument("marginal dimension mismatch");
  if (exact.marginals.empty()) return 0.0;
  double acc = 0.0;
  for (size_t v = 0; v < exact.marginals.size(); ++v) {
    acc += 0.5 * (std::abs(exact.marginals[v].first - estimated.marginals[v].first) +
                  std::abs(exact.marginals[v].second - estimated.marginals[v].second));
  }
  return acc / static_cast<double>(exact.marginals.size());
}

}  // namespace cavitytn
