#include "cavitytn/bp.hpp"

#include <algorithm>
#include <cmath>

#include "cavitytn/rng.hpp"

namespace cavitytn {

namespace {

// Node tensors decoded into per-entry integer multi-indices so that sweep
// kernels run without 128-bit arithmetic or allocation.
struct DecodedEntry {
  double value;
  std::vector<std::int32_t> idx;  // one per tensor label position
};

std::vector<DecodedEntry> decode_tensor(const Tensor& t) {
  std::vector<DecodedEntry> entries;
  const auto& ext = t.extents();
  t.for_each_nonzero([&](FlatIndex key, double v) {
    DecodedEntry e;
    e.value = v;
    e.idx.resize(ext.size());
    for (int i = static_cast<int>(ext.size()) - 1; i >= 0; --i) {
      auto x = static_cast<FlatIndex>(ext[static_cast<size_t>(i)]);
      e.idx[static_cast<size_t>(i)] = static_cast<std::int32_t>(key % x);
      key /= x;
    }
    entries.push_back(std::move(e));
  });
  return entries;
}

struct PreparedNode {
  bool copy = false;
  std::vector<DecodedEntry> entries;  // unused for copy nodes
  // Per tensor label position: incoming directed env index (-1 = physical).
  std::vector<int> env_in;
  // Per adjacency position: outgoing directed env index and the tensor
  // label position of that edge.
  std::vector<int> env_out;
  std::vector<int> out_label_pos;
  // Directional tensors (survey propagation graphs), per adjacency position.
  std::vector<std::vector<DecodedEntry>> directional;
};

struct PreparedGraph {
  const TensorFactorGraph* graph;
  std::vector<PreparedNode> nodes;

  explicit PreparedGraph(const TensorFactorGraph& g) : graph(&g) {
    nodes.reserve(static_cast<size_t>(g.num_nodes()));
    for (int i = 0; i < g.num_nodes(); ++i) {
      const TfgNode& n = g.node(i);
      PreparedNode p;
      p.copy = n.copy_tensor;
      const auto& labels = n.tensor.labels();
      p.env_in.assign(labels.size(), -1);
      for (size_t q = 0; q < labels.size(); ++q) {
        Label l = labels[q];
        if (l >= 0) {
          int e = static_cast<int>(l);
          p.env_in[q] = g.env_index(e, g.neighbor(e, i));
        }
      }
      for (int e : n.edges) {
        p.env_out.push_back(g.env_index(e, i));
        p.out_label_pos.push_back(n.tensor.label_position(e));
        if (const Tensor* dt = g.directional_tensor(i, e))
          p.directional.push_back(decode_tensor(*dt));
      }
      if (!p.copy && p.directional.empty()) p.entries = decode_tensor(n.tensor);
      nodes.push_back(std::move(p));
    }
  }

  // Raw (unnormalized) outgoing message from node i along adjacency slot a.
  void raw_message(const EnvironmentSet& envs, int i, int a, Eigen::VectorXd& out) const {
    const PreparedNode& p = nodes[static_cast<size_t>(i)];
    const int out_pos = p.out_label_pos[static_cast<size_t>(a)];
    if (p.copy) {
      out.setOnes();
      for (size_t q = 0; q < p.env_in.size(); ++q) {
        if (static_cast<int>(q) == out_pos || p.env_in[q] < 0) continue;
        out.array() *= envs.at(p.env_in[q]).array();
      }
      return;
    }
    const auto& entries =
        p.directional.empty() ? p.entries : p.directional[static_cast<size_t>(a)];
    out.setZero();
    for (const DecodedEntry& e : entries) {
      double w = e.value;
      for (size_t q = 0; q < e.idx.size(); ++q) {
        if (static_cast<int>(q) == out_pos || p.env_in[q] < 0) continue;
        w *= envs.at(p.env_in[q])(e.idx[q]);
      }
      out(e.idx[static_cast<size_t>(out_pos)]) += w;
    }
  }
};

bool normalize_l1(Eigen::VectorXd& v) {
  const double s = v.sum();
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  v /= s;
  return true;
}

}  // namespace

EnvironmentSet init_environments(const TensorFactorGraph& graph, const BpConfig& config) {
  EnvironmentSet envs;
  envs.env.resize(static_cast<size_t>(graph.num_directed_edges()));
  Rng rng(config.seed);
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto extent = static_cast<Eigen::Index>(graph.edge(e).extent);
    for (int dir = 0; dir < 2; ++dir) {
      Eigen::VectorXd v(extent);
      if (config.init == BpInit::kUniform) {
        v.setConstant(1.0 / static_cast<double>(extent));
      } else {
        for (Eigen::Index k = 0; k < extent; ++k) v(k) = uniform01(rng);
        if (!normalize_l1(v)) v.setConstant(1.0 / static_cast<double>(extent));
      }
      envs.env[static_cast<size_t>(2 * e + dir)] = std::move(v);
    }
  }
  return envs;
}

std::optional<Eigen::VectorXd> update_environment(const TensorFactorGraph& graph,
                                                  const EnvironmentSet& envs,
                                                  int from_node, int edge_id) {
  PreparedGraph prepared(graph);  // fine for one-off queries; sweeps prepare once
  const TfgNode& n = graph.node(from_node);
  auto it = std::find(n.edges.begin(), n.edges.end(), edge_id);
  if (it == n.edges.end()) throw std::invalid_argument("edge not incident to node");
  const int slot = static_cast<int>(it - n.edges.begin());
  Eigen::VectorXd out(static_cast<Eigen::Index>(graph.edge(edge_id).extent));
  prepared.raw_message(envs, from_node, slot, out);
  if (!normalize_l1(out)) return std::nullopt;
  return out;
}

namespace {

BpReport run_bp_impl(const TensorFactorGraph& graph, const BpConfig& config,
                     EnvironmentSet envs) {
  if (config.tolerance <= 0 || config.max_iterations < 1 ||
      config.damping < 0 || config.damping >= 1)
    throw std::invalid_argument("bad BP configuration");
  PreparedGraph prepared(graph);

  BpReport report;
  const double lambda = config.damping;
  Eigen::VectorXd fresh;
  EnvironmentSet staging;
  if (config.schedule == BpSchedule::kTwoPhase) staging = envs;

  for (int t = 1; t <= config.max_iterations; ++t) {
    double d = 0.0;
    EnvironmentSet& write_to = config.schedule == BpSchedule::kTwoPhase ? staging : envs;
    for (int i = 0; i < graph.num_nodes(); ++i) {
      const PreparedNode& p = prepared.nodes[static_cast<size_t>(i)];
      for (size_t a = 0; a < p.env_out.size(); ++a) {
        const int out_idx = p.env_out[a];
        Eigen::VectorXd& slot = write_to.at(out_idx);
        fresh.resize(slot.size());
        prepared.raw_message(envs, i, static_cast<int>(a), fresh);
        if (!normalize_l1(fresh)) {
          report.status = BpStatus::kFailure;
          report.iterations = t;
          report.final_delta = d;
          report.contradiction = true;
          report.environments = std::move(envs);
          return report;
        }
        const Eigen::VectorXd& old = envs.at(out_idx);
        if (lambda > 0.0) fresh = (1.0 - lambda) * fresh + lambda * old;
        d = std::max(d, (fresh - old).cwiseAbs().sum());
        slot = fresh;
      }
    }
    if (config.schedule == BpSchedule::kTwoPhase) std::swap(envs, staging);
    if (d < config.tolerance) {
      report.status = BpStatus::kSuccess;
      report.iterations = t;
      report.final_delta = d;
      report.environments = std::move(envs);
      return report;
    }
    report.final_delta = d;
  }
  report.status = BpStatus::kFailure;
  report.iterations = config.max_iterations;
  report.environments = std::move(envs);
  return report;
}

}  // namespace

BpReport run_bp(const TensorFactorGraph& graph, const BpConfig& config) {
  return run_bp_impl(graph, config, init_environments(graph, config));
}

BpReport run_bp(const TensorFactorGraph& graph, const BpConfig& config,
                const EnvironmentSet& initial) {
  return run_bp_impl(graph, config, initial);
}

Marginal variable_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                           int node_id) {
  const TfgNode& n = graph.node(node_id);
  if (n.kind != NodeKind::kVariable)
    throw std::invalid_argument("variable_marginal needs a variable node");
  Eigen::VectorXd m = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n.alphabet));
  if (n.edges.empty()) {
    // Free variable: the normalized node tensor itself.
    for (Eigen::Index x = 0; x < m.size(); ++x)
      m(x) = n.tensor.value_at_flat(static_cast<FlatIndex>(x));
  } else {
    for (int e : n.edges)
      m.array() *= envs.at(graph.env_index(e, graph.neighbor(e, node_id))).array();
  }
  Marginal out;
  out.local_z = m.sum();
  if (!(out.local_z > 0.0) || !std::isfinite(out.local_z))
    throw ContradictionError("zero normalizer in variable marginal");
  out.distribution = m / out.local_z;
  return out;
}

Marginal bond_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                       int edge_id) {
  if (edge_id < 0 || edge_id >= graph.num_edges())
    throw std::invalid_argument("edge id out of range");
  const Eigen::VectorXd& a = envs.at(2 * edge_id);
  const Eigen::VectorXd& b = envs.at(2 * edge_id + 1);
  Marginal out;
  Eigen::VectorXd m = a.cwiseProduct(b);
  out.local_z = m.sum();
  if (!(out.local_z > 0.0) || !std::isfinite(out.local_z))
    throw ContradictionError("zero normalizer in bond marginal");
  out.distribution = m / out.local_z;
  return out;
}

RegionMarginal region_marginal(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                               int node_id) {
  const TfgNode& n = graph.node(node_id);
  const auto& labels = n.tensor.labels();
  const auto& extents = n.tensor.extents();
  // Incoming env per label position (-1 for the physical label).
  std::vector<int> env_in(labels.size(), -1);
  for (size_t q = 0; q < labels.size(); ++q)
    if (labels[q] >= 0) {
      int e = static_cast<int>(labels[q]);
      env_in[q] = graph.env_index(e, graph.neighbor(e, node_id));
    }

  std::map<FlatIndex, double> entries;
  double z = 0.0;
  std::vector<std::int64_t> idx(labels.size());
  n.tensor.for_each_nonzero([&](FlatIndex key, double v) {
    FlatIndex k = key;
    for (int i = static_cast<int>(labels.size()) - 1; i >= 0; --i) {
      auto e = static_cast<FlatIndex>(extents[static_cast<size_t>(i)]);
      idx[static_cast<size_t>(i)] = static_cast<std::int64_t>(k % e);
      k /= e;
    }
    double w = v;
    for (size_t q = 0; q < labels.size(); ++q)
      if (env_in[q] >= 0) w *= envs.at(env_in[q])(idx[q]);
    if (w != 0.0) entries.emplace(key, w);
    z += w;
  });
  if (!(z > 0.0) || !std::isfinite(z))
    throw ContradictionError("zero normalizer in region marginal");
  for (auto& [k, v] : entries) v /= z;
  RegionMarginal out;
  out.distribution = Tensor::from_entries(labels, extents, entries);
  out.local_z = z;
  return out;
}

double bethe_free_entropy(const TensorFactorGraph& graph, const EnvironmentSet& envs) {
  double f = 0.0;
  for (int i = 0; i < graph.num_nodes(); ++i)
    f += std::log(region_marginal(graph, envs, i).local_z);
  for (int e = 0; e < graph.num_edges(); ++e)
    f -= std::log(bond_marginal(graph, envs, e).local_z);
  return f;
}

BetheMarginals collect_marginals(const TensorFactorGraph& graph,
                                 const EnvironmentSet& envs) {
  BetheMarginals m;
  m.regions.reserve(static_cast<size_t>(graph.num_nodes()));
  m.bonds.reserve(static_cast<size_t>(graph.num_edges()));
  for (int i = 0; i < graph.num_nodes(); ++i)
    m.regions.push_back(region_marginal(graph, envs, i));
  for (int e = 0; e < graph.num_edges(); ++e)
    m.bonds.push_back(bond_marginal(graph, envs, e));
  return m;
}

double bethe_free_entropy_from_marginals(const TensorFactorGraph& graph,
                                         const BetheMarginals& marginals) {
  double f = 0.0;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    const Tensor& m = marginals.regions[static_cast<size_t>(i)].distribution;
    const Tensor& t = graph.node(i).tensor;
    double term = 0.0;
    m.for_each_nonzero([&](FlatIndex key, double mv) {
      const double tv = t.value_at_flat(key);
      term -= mv * std::log(mv / tv);
    });
    f += term;
  }
  for (int e = 0; e < graph.num_edges(); ++e) {
    const Eigen::VectorXd& m = marginals.bonds[static_cast<size_t>(e)].distribution;
    for (Eigen::Index r = 0; r < m.size(); ++r)
      if (m(r) > 0.0) f += m(r) * std::log(m(r));
  }
  return f;
}

}  // namespace cavitytn
