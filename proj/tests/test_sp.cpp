#include <doctest.h>

#include <cmath>

#include "cavitytn/rng.hpp"
#include "cavitytn/sp.hpp"
#include "cavitytn/tfg.hpp"

using namespace cavitytn;

namespace {

SpState random_state(const SpGraph& g, std::uint64_t seed) {
  BpConfig cfg;
  cfg.seed = seed;
  cfg.init = BpInit::kRandom;
  return init_sp_state(g, cfg);
}

}  // namespace

TEST_CASE("direct variable update formulas") {
  // x1 in clauses: 0 (+), 1 (+), 2 (-); edge of interest is (x1, clause 0).
  CnfInstance inst = parse_dimacs("p cnf 2 3\n1 2 0\n1 -2 0\n-1 2 0");
  SpGraph g = build_sp_graph(inst);
  SpState s = trivial_sp_state(g);

  SUBCASE("all warnings zero gives the free triple") {
    auto t = sp_update_var_to_clause(g, s, 0);
    REQUIRE(t.has_value());
    CHECK((*t)(0) == doctest::Approx(0.0));
    CHECK((*t)(1) == doctest::Approx(0.0));
    CHECK((*t)(2) == doctest::Approx(1.0));
  }

  SUBCASE("half warnings give the uniform triple") {
    // S = {clause 1 edge}, U = {clause 2 edge} for edge 0.
    s.q_hat[2] = 0.5;  // clause 1's edge to x1
    s.q_hat[4] = 0.5;  // clause 2's edge to x1
    auto t = sp_update_var_to_clause(g, s, 0);
    REQUIRE(t.has_value());
    for (int i = 0; i < 3; ++i) CHECK((*t)(i) == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("contradictory warnings signal") {
    s.q_hat[2] = 1.0;
    s.q_hat[4] = 1.0;
    CHECK(!sp_update_var_to_clause(g, s, 0).has_value());
  }
}

TEST_CASE("direct clause update is a product of unsat probabilities") {
  CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
  SpGraph g = build_sp_graph(inst);
  SpState s = trivial_sp_state(g);
  s.q_triple[1] = Eigen::Vector3d(0.25, 0.5, 0.25);
  s.q_triple[2] = Eigen::Vector3d(0.2, 0.4, 0.4);
  CHECK(sp_update_clause_to_var(g, s, 0) == doctest::Approx(0.05));
}

TEST_CASE("embedding round trip is lossless") {
  CnfInstance inst = random_ksat(10, 25, 3, 3);
  SpGraph g = build_sp_graph(inst);
  TensorFactorGraph sp_tfg = build_sp_tfg(inst);
  SpState s = random_state(g, 17);
  EnvironmentSet envs = embed_sp_state(sp_tfg, s);
  for (int e = 0; e < sp_tfg.num_edges(); ++e) {
    CHECK(envs.at(2 * e).head<2>().cwiseAbs().sum() == 0.0);
    CHECK(envs.at(2 * e + 1).tail<3>().cwiseAbs().sum() == 0.0);
  }
  SpState back = project_environments(sp_tfg, envs);
  for (size_t e = 0; e < s.q_hat.size(); ++e) {
    CHECK(back.q_hat[e] == s.q_hat[e]);
    CHECK((back.q_triple[e] - s.q_triple[e]).cwiseAbs().sum() == 0.0);
  }
}

TEST_CASE("tensor update equals the direct update") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    CnfInstance inst = random_ksat(20, static_cast<int>(20 * 3.4), 3, seed);
    SpGraph g = build_sp_graph(inst);
    TensorFactorGraph sp_tfg = build_sp_tfg(inst);
    SpState s = random_state(g, 100 + seed);
    EnvironmentSet envs = embed_sp_state(sp_tfg, s);

    for (int e = 0; e < g.num_edges(); ++e) {
      const auto& info = g.edges[static_cast<size_t>(e)];
      const int var_node = info.var;
      const int clause_node = inst.num_vars + info.clause;

      // Variable -> clause direction.
      Eigen::VectorXd raw = sp_update_tensor(sp_tfg, envs, var_node, e);
      auto direct = sp_update_var_to_clause(g, s, e);
      REQUIRE(direct.has_value());
      CHECK(raw(0) == doctest::Approx(0.0));
      CHECK(raw(1) == doctest::Approx(0.0));
      const double z = raw.tail<3>().sum();
      for (int i = 0; i < 3; ++i)
        CHECK(raw(2 + i) / z == doctest::Approx((*direct)(i)).epsilon(1e-12));

      // Clause -> variable direction: raw embedding is already normalized.
      Eigen::VectorXd raw_cv = sp_update_tensor(sp_tfg, envs, clause_node, e);
      const double qhat = sp_update_clause_to_var(g, s, e);
      CHECK(raw_cv(0) == doctest::Approx(qhat).epsilon(1e-12));
      CHECK(raw_cv(1) == doctest::Approx(1.0 - qhat).epsilon(1e-12));
      CHECK(raw_cv.tail<3>().cwiseAbs().sum() == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("trivial state reproduces the lone-variable constant") {
  CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
  SpGraph g = build_sp_graph(inst);
  TensorFactorGraph sp_tfg = build_sp_tfg(inst);
  SpState s = trivial_sp_state(g);
  EnvironmentSet envs = embed_sp_state(sp_tfg, s);
  Eigen::VectorXd out = sp_update_tensor(sp_tfg, envs, 0, 0);
  CHECK(out(4) == doctest::Approx(1.0));
  CHECK(out.head<4>().cwiseAbs().sum() == doctest::Approx(0.0));
}

TEST_CASE("trivial fixed point is invariant under both update paths") {
  CnfInstance inst = random_ksat(12, 30, 3, 5);
  SpGraph g = build_sp_graph(inst);
  SpState s = trivial_sp_state(g);
  for (int e = 0; e < g.num_edges(); ++e) {
    auto t = sp_update_var_to_clause(g, s, e);
    REQUIRE(t.has_value());
    CHECK(((*t) - Eigen::Vector3d(0, 0, 1)).cwiseAbs().sum() == 0.0);
    CHECK(sp_update_clause_to_var(g, s, e) == 0.0);
  }
  TensorFactorGraph sp_tfg = build_sp_tfg(inst);
  EnvironmentSet envs = embed_sp_state(sp_tfg, s);
  for (int e = 0; e < g.num_edges(); ++e) {
    Eigen::VectorXd vc = sp_update_tensor(sp_tfg, envs, g.edges[static_cast<size_t>(e)].var, e);
    CHECK(vc(4) == doctest::Approx(1.0));
  }
}

TEST_CASE("degree-one instance converges to the trivial fixed point quickly") {
  // Nine variables, three clauses, no variable repeats.
  CnfInstance inst = parse_dimacs("p cnf 9 3\n1 2 3 0\n4 5 6 0\n7 8 9 0");
  BpConfig cfg;
  cfg.tolerance = 1e-3;
  cfg.max_iterations = 10;
  cfg.seed = 8;
  SpReport r = run_sp(inst, cfg, SpMode::kDirect);
  CHECK(r.converged());
  CHECK(r.iterations <= 2);
  for (double q : r.state.q_hat) CHECK(q == 0.0);
}

TEST_CASE("direct and tensor runs produce identical trajectories") {
  CnfInstance inst = random_ksat(15, 45, 3, 11);
  BpConfig cfg;
  cfg.tolerance = 1e-300;  // force a fixed number of sweeps
  cfg.max_iterations = 7;
  cfg.seed = 21;
  SpReport direct = run_sp(inst, cfg, SpMode::kDirect);
  SpReport tensor = run_sp(inst, cfg, SpMode::kTensor);
  REQUIRE(direct.iterations == tensor.iterations);
  for (size_t e = 0; e < direct.state.q_hat.size(); ++e) {
    CHECK(direct.state.q_hat[e] == doctest::Approx(tensor.state.q_hat[e]).epsilon(1e-10));
    CHECK((direct.state.q_triple[e] - tensor.state.q_triple[e]).cwiseAbs().maxCoeff() <=
          1e-10);
  }
  CHECK(direct.final_delta == doctest::Approx(tensor.final_delta).epsilon(1e-9));
}

TEST_CASE("updated triples stay on the simplex") {
  CnfInstance inst = random_ksat(25, 100, 3, 13);
  SpGraph g = build_sp_graph(inst);
  SpState s = random_state(g, 31);
  for (int e = 0; e < g.num_edges(); ++e) {
    auto t = sp_update_var_to_clause(g, s, e);
    if (!t) continue;
    CHECK((*t).minCoeff() >= 0.0);
    CHECK((*t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("raising warnings cannot raise the free products") {
  CnfInstance inst = random_ksat(12, 40, 3, 17);
  SpGraph g = build_sp_graph(inst);
  SpState lo = random_state(g, 41);
  SpState hi = lo;
  Rng rng(43);
  for (double& q : hi.q_hat) q = q + (1.0 - q) * uniform01(rng);

  auto products = [&](const SpState& s, int e) {
    double ps = 1.0, pu = 1.0;
    for (int b : g.same_sign[static_cast<size_t>(e)]) ps *= 1.0 - s.q_hat[static_cast<size_t>(b)];
    for (int b : g.opposite_sign[static_cast<size_t>(e)]) pu *= 1.0 - s.q_hat[static_cast<size_t>(b)];
    return std::make_pair(ps, pu);
  };
  for (int e = 0; e < g.num_edges(); ++e) {
    auto [ps_lo, pu_lo] = products(lo, e);
    auto [ps_hi, pu_hi] = products(hi, e);
    CHECK(ps_hi <= ps_lo + 1e-15);
    CHECK(pu_hi <= pu_lo + 1e-15);
  }
}

TEST_CASE("sp biases") {
  SUBCASE("forced variable") {
    CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
    SpGraph g = build_sp_graph(inst);
    SpState s = trivial_sp_state(g);
    s.q_hat[0] = 1.0;  // clause forces x1 (appears non-negated)
    BiasVector b = sp_biases(g, s);
    CHECK(b.p0[0] == doctest::Approx(0.0));
    CHECK(b.p1[0] == doctest::Approx(1.0));
    CHECK(b.bias[0] == doctest::Approx(-1.0));
  }
  SUBCASE("trivial state has zero bias everywhere") {
    CnfInstance inst = random_ksat(10, 30, 3, 7);
    SpGraph g = build_sp_graph(inst);
    BiasVector b = sp_biases(g, trivial_sp_state(g));
    for (double x : b.bias) CHECK(x == 0.0);
  }
  SUBCASE("symmetric forcing cancels") {
    CnfInstance inst = parse_dimacs("p cnf 3 2\n1 2 0\n-1 3 0");
    SpGraph g = build_sp_graph(inst);
    SpState s = trivial_sp_state(g);
    s.q_hat[0] = 0.7;  // positive occurrence warning
    s.q_hat[2] = 0.7;  // negative occurrence warning
    BiasVector b = sp_biases(g, s);
    CHECK(b.bias[0] == doctest::Approx(0.0));
    CHECK(b.p0[0] == doctest::Approx(b.p1[0]));
  }
  SUBCASE("normalized variant rescales") {
    CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
    SpGraph g = build_sp_graph(inst);
    SpState s = trivial_sp_state(g);
    s.q_hat[0] = 0.5;
    BiasVector raw = sp_biases(g, s, false);
    BiasVector norm = sp_biases(g, s, true);
    const double denom = raw.p0[0] + raw.p1[0] + 0.5;  // pfree = 1 - qhat
    CHECK(norm.bias[0] == doctest::Approx(raw.bias[0] / denom));
  }
}

TEST_CASE("bp biases from a path instance") {
  CnfInstance inst = parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0");
  TensorFactorGraph g = build_tfg(inst);
  BpConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = 500;
  cfg.seed = 3;
  BpReport r = run_bp(g, cfg);
  REQUIRE(r.converged());
  BiasVector b = bp_biases(g, r.environments, 3);
  CHECK(b.bias[0] == doctest::Approx(-0.5).epsilon(1e-9));

  CnfInstance unit = parse_dimacs("p cnf 1 1\n1 0");
  TensorFactorGraph gu = build_tfg(unit);
  BpReport ru = run_bp(gu, cfg);
  BiasVector bu = bp_biases(gu, ru.environments, 1);
  CHECK(bu.bias[0] == doctest::Approx(-1.0));

  CnfInstance free_var;
  free_var.num_vars = 1;
  TensorFactorGraph gf = build_tfg(free_var);
  BpReport rf = run_bp(gf, cfg);
  BiasVector bf = bp_biases(gf, rf.environments, 1);
  CHECK(bf.bias[0] == doctest::Approx(0.0));
}
