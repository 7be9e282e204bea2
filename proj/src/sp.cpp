#include "cavitytn/sp.hpp"

#include <algorithm>
#include <cmath>

#include "cavitytn/rng.hpp"

namespace cavitytn {

SpGraph build_sp_graph(const CnfInstance& instance) {
  SpGraph g;
  g.num_vars = instance.num_vars;
  g.num_clauses = instance.num_clauses();
  g.var_edges.assign(static_cast<size_t>(g.num_vars), {});
  g.clause_edges.assign(static_cast<size_t>(g.num_clauses), {});
  for (int a = 0; a < g.num_clauses; ++a)
    for (const Literal& l : instance.clauses[static_cast<size_t>(a)]) {
      const int e = g.num_edges();
      g.edges.push_back(SpGraph::EdgeInfo{l.var, a, l.negated});
      g.var_edges[static_cast<size_t>(l.var)].push_back(e);
      g.clause_edges[static_cast<size_t>(a)].push_back(e);
    }
  g.same_sign.assign(static_cast<size_t>(g.num_edges()), {});
  g.opposite_sign.assign(static_cast<size_t>(g.num_edges()), {});
  for (int v = 0; v < g.num_vars; ++v) {
    const auto& edges = g.var_edges[static_cast<size_t>(v)];
    for (int e : edges)
      for (int b : edges) {
        if (b == e) continue;
        const bool same = g.edges[static_cast<size_t>(b)].negated ==
                          g.edges[static_cast<size_t>(e)].negated;
        (same ? g.same_sign : g.opposite_sign)[static_cast<size_t>(e)].push_back(b);
      }
  }
  return g;
}

SpState trivial_sp_state(const SpGraph& graph) {
  SpState s;
  s.q_hat.assign(static_cast<size_t>(graph.num_edges()), 0.0);
  s.q_triple.assign(static_cast<size_t>(graph.num_edges()),
                    Eigen::Vector3d(0.0, 0.0, 1.0));
  return s;
}

SpState init_sp_state(const SpGraph& graph, const BpConfig& config) {
  SpState s;
  const auto m = static_cast<size_t>(graph.num_edges());
  s.q_hat.resize(m);
  s.q_triple.resize(m);
  if (config.init == BpInit::kUniform) {
    std::fill(s.q_hat.begin(), s.q_hat.end(), 0.5);
    std::fill(s.q_triple.begin(), s.q_triple.end(),
              Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3));
    return s;
  }
  Rng rng(config.seed);
  for (size_t e = 0; e < m; ++e) {
    s.q_hat[e] = uniform01(rng);
    // Simplex-uniform triple: three exponentials, L1-normalized.
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) t(i) = -std::log(1.0 - uniform01(rng));
    s.q_triple[e] = t / t.sum();
  }
  return s;
}

double sp_update_clause_to_var(const SpGraph& graph, const SpState& state, int edge) {
  const int a = graph.edges[static_cast<size_t>(edge)].clause;
  double q = 1.0;
  for (int e : graph.clause_edges[static_cast<size_t>(a)]) {
    if (e == edge) continue;
    q *= state.q_triple[static_cast<size_t>(e)](0);
  }
  return q;
}

std::optional<Eigen::Vector3d> sp_update_var_to_clause(const SpGraph& graph,
                                                       const SpState& state, int edge) {
  double p_same = 1.0, p_opp = 1.0;
  for (int b : graph.same_sign[static_cast<size_t>(edge)])
    p_same *= 1.0 - state.q_hat[static_cast<size_t>(b)];
  for (int b : graph.opposite_sign[static_cast<size_t>(edge)])
    p_opp *= 1.0 - state.q_hat[static_cast<size_t>(b)];
  Eigen::Vector3d t(p_same * (1.0 - p_opp), p_opp * (1.0 - p_same), p_same * p_opp);
  const double s = t.sum();
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  return Eigen::Vector3d(t / s);
}

EnvironmentSet embed_sp_state(const TensorFactorGraph& sp_tfg, const SpState& state) {
  EnvironmentSet envs;
  envs.env.resize(static_cast<size_t>(sp_tfg.num_directed_edges()));
  for (int e = 0; e < sp_tfg.num_edges(); ++e) {
    // Slot 2e is variable -> clause (node_a is the variable side).
    Eigen::VectorXd var_to_clause = Eigen::VectorXd::Zero(5);
    var_to_clause.segment<3>(2) = state.q_triple[static_cast<size_t>(e)];
    Eigen::VectorXd clause_to_var = Eigen::VectorXd::Zero(5);
    clause_to_var(0) = state.q_hat[static_cast<size_t>(e)];
    clause_to_var(1) = 1.0 - state.q_hat[static_cast<size_t>(e)];
    envs.env[static_cast<size_t>(2 * e)] = std::move(var_to_clause);
    envs.env[static_cast<size_t>(2 * e + 1)] = std::move(clause_to_var);
  }
  return envs;
}

SpState project_environments(const TensorFactorGraph& sp_tfg, const EnvironmentSet& envs) {
  SpState s;
  const auto m = static_cast<size_t>(sp_tfg.num_edges());
  s.q_hat.resize(m);
  s.q_triple.resize(m);
  for (size_t e = 0; e < m; ++e) {
    const Eigen::VectorXd& vc = envs.env[2 * e];
    const Eigen::VectorXd& cv = envs.env[2 * e + 1];
    s.q_triple[e] = vc.segment<3>(2);
    s.q_hat[e] = cv(0);
  }
  return s;
}

Eigen::VectorXd sp_update_tensor(const TensorFactorGraph& sp_tfg,
                                 const EnvironmentSet& envs, int from_node, int edge_id) {
  const Tensor* dir = sp_tfg.directional_tensor(from_node, edge_id);
  if (dir == nullptr) throw std::invalid_argument("no directional tensor on edge");
  std::vector<Tensor> inputs{*dir};
  for (int e : sp_tfg.node(from_node).edges) {
    if (e == edge_id) continue;
    const Eigen::VectorXd& env = envs.at(sp_tfg.env_index(e, sp_tfg.neighbor(e, from_node)));
    inputs.push_back(Tensor::dense({static_cast<Label>(e)}, {env.size()}, env));
  }
  const std::vector<Label> keep{static_cast<Label>(edge_id)};
  Tensor out = contract(inputs, keep);
  Eigen::VectorXd v(5);
  for (Eigen::Index r = 0; r < 5; ++r)
    v(r) = out.value_at_flat(static_cast<FlatIndex>(r));
  return v;
}

namespace {

struct SweepOutcome {
  double delta = 0.0;
  bool contradiction = false;
};

// One in-place sweep in the run_bp order: variable nodes by id then clause
// nodes by id, incident edges ascending. Distances are L1 on the embedded
// 5-vectors.
SweepOutcome sp_sweep_direct(const SpGraph& graph, SpState& state) {
  SweepOutcome out;
  for (int v = 0; v < graph.num_vars; ++v) {
    for (int e : graph.var_edges[static_cast<size_t>(v)]) {
      auto t = sp_update_var_to_clause(graph, state, e);
      if (!t) {
        out.contradiction = true;
        return out;
      }
      out.delta = std::max(
          out.delta, (*t - state.q_triple[static_cast<size_t>(e)]).cwiseAbs().sum());
      state.q_triple[static_cast<size_t>(e)] = *t;
    }
  }
  for (int a = 0; a < graph.num_clauses; ++a) {
    for (int e : graph.clause_edges[static_cast<size_t>(a)]) {
      const double q = sp_update_clause_to_var(graph, state, e);
      out.delta = std::max(out.delta, 2.0 * std::abs(q - state.q_hat[static_cast<size_t>(e)]));
      state.q_hat[static_cast<size_t>(e)] = q;
    }
  }
  return out;
}

}  // namespace

SpReport run_sp(const SpGraph& graph, const CnfInstance& instance, const BpConfig& config,
                SpMode mode, const SpState* warm_start) {
  if (config.tolerance <= 0 || config.max_iterations < 1)
    throw std::invalid_argument("bad SP configuration");
  SpReport report;
  if (mode == SpMode::kTensor) {
    TensorFactorGraph sp_tfg = build_sp_tfg(instance);
    EnvironmentSet init = embed_sp_state(
        sp_tfg, warm_start ? *warm_start : init_sp_state(graph, config));
    BpReport bp = run_bp(sp_tfg, config, init);
    report.status = bp.status;
    report.iterations = bp.iterations;
    report.final_delta = bp.final_delta;
    report.contradiction = bp.contradiction;
    report.state = project_environments(sp_tfg, bp.environments);
    return report;
  }
  SpState state = warm_start ? *warm_start : init_sp_state(graph, config);
  for (int t = 1; t <= config.max_iterations; ++t) {
    const SweepOutcome sw = sp_sweep_direct(graph, state);
    report.iterations = t;
    report.final_delta = sw.delta;
    if (sw.contradiction) {
      report.status = BpStatus::kFailure;
      report.contradiction = true;
      report.state = std::move(state);
      return report;
    }
    if (sw.delta < config.tolerance) {
      report.status = BpStatus::kSuccess;
      report.state = std::move(state);
      return report;
    }
  }
  report.status = BpStatus::kFailure;
  report.state = std::move(state);
  return report;
}

SpReport run_sp(const CnfInstance& instance, const BpConfig& config, SpMode mode) {
  return run_sp(build_sp_graph(instance), instance, config, mode, nullptr);
}

BiasVector sp_biases(const SpGraph& graph, const SpState& state, bool normalized) {
  BiasVector out;
  const auto n = static_cast<size_t>(graph.num_vars);
  out.p0.assign(n, 0.0);
  out.p1.assign(n, 0.0);
  out.bias.assign(n, 0.0);
  for (int v = 0; v < graph.num_vars; ++v) {
    // Product of (1 - Qhat) over clauses with the variable negated
    // (forcing toward 0) and not negated (forcing toward 1).
    double free0 = 1.0, free1 = 1.0;
    for (int e : graph.var_edges[static_cast<size_t>(v)]) {
      const double f = 1.0 - state.q_hat[static_cast<size_t>(e)];
      if (graph.edges[static_cast<size_t>(e)].negated)
        free0 *= f;
      else
        free1 *= f;
    }
    double p0 = free1 * (1.0 - free0);
    double p1 = free0 * (1.0 - free1);
    if (normalized) {
      const double denom = p0 + p1 + free0 * free1;
      if (denom > 0.0) {
        p0 /= denom;
        p1 /= denom;
      } else {
        p0 = p1 = 0.0;
      }
    }
    out.p0[static_cast<size_t>(v)] = p0;
    out.p1[static_cast<size_t>(v)] = p1;
    out.bias[static_cast<size_t>(v)] = p0 - p1;
  }
  return out;
}

BiasVector bp_biases(const TensorFactorGraph& graph, const EnvironmentSet& envs,
                     int num_vars) {
  BiasVector out;
  const auto n = static_cast<size_t>(num_vars);
  out.p0.assign(n, 0.0);
  out.p1.assign(n, 0.0);
  out.bias.assign(n, 0.0);
  for (int v = 0; v < num_vars; ++v) {
    const Marginal m = variable_marginal(graph, envs, v);
    out.p0[static_cast<size_t>(v)] = m.distribution(0);
    out.p1[static_cast<size_t>(v)] = m.distribution(1);
    out.bias[static_cast<size_t>(v)] = m.distribution(0) - m.distribution(1);
  }
  return out;
}

}  // namespace cavitytn
