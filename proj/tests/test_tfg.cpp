#include <doctest.h>

#include "cavitytn/exact.hpp"
#include "cavitytn/rng.hpp"
#include "cavitytn/sp.hpp"
#include "cavitytn/tfg.hpp"

using namespace cavitytn;

TEST_CASE("sat_factor_tensor has a single zero at the violating configuration") {
  Clause c{{0, false}, {1, false}, {2, false}};  // x1 v x2 v x3
  Tensor t = sat_factor_tensor(c);
  CHECK(t.value_at(std::vector<std::int64_t>{0, 0, 0}) == 0.0);
  CHECK(t.sum() == doctest::Approx(7.0));

  Clause neg{{0, true}};  // -x1
  Tensor tn = sat_factor_tensor(neg);
  CHECK(tn.value_at_flat(0) == 1.0);
  CHECK(tn.value_at_flat(1) == 0.0);

  Clause k4{{0, true}, {1, false}, {2, true}, {3, false}};
  CHECK(sat_factor_tensor(k4).sum() == doctest::Approx(15.0));
}

TEST_CASE("build_tfg structure for a path instance") {
  CnfInstance inst = parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0");
  TensorFactorGraph g = build_tfg(inst);
  g.validate();
  CHECK(g.num_nodes() == 5);
  CHECK(g.num_edges() == 4);
  CHECK(g.node(0).kind == NodeKind::kVariable);
  CHECK(g.node(3).kind == NodeKind::kFactor);
  CHECK(g.node(1).edges.size() == 2);  // x2 touches both clauses
  CHECK(g.node(0).copy_tensor);
}

TEST_CASE("full contraction equals the SAT count") {
  CnfInstance one = parse_dimacs("p cnf 3 1\n1 2 3 0");
  CHECK(exact_contract(build_tfg(one)) == doctest::Approx(7.0));

  CnfInstance path = parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0");
  CHECK(exact_contract(build_tfg(path)) == doctest::Approx(4.0));
  CHECK(enumerate_all(path).count == 4);
}

TEST_CASE("free variables double the contraction") {
  CnfInstance inst;
  inst.num_vars = 1;
  TensorFactorGraph g = build_tfg(inst);
  CHECK(exact_contract(g) == doctest::Approx(2.0));
}

TEST_CASE("contraction vs enumeration on random instances") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    CnfInstance inst = random_ksat(10, 25, 3, seed);
    const double z = exact_contract(build_tfg(inst));
    CHECK(z == doctest::Approx(static_cast<double>(enumerate_all(inst).count)));
  }
}

TEST_CASE("open physical form contracts to the same value") {
  CnfInstance inst = random_ksat(8, 16, 3, 3);
  const double a = exact_contract(build_tfg(inst, PhysicalIndices::kAbsorbed));
  // Open form keeps x_i legs on the copy tensors; the contraction sums them.
  TensorFactorGraph open = build_tfg(inst, PhysicalIndices::kOpen);
  const double b = exact_contract(open);
  CHECK(a == doctest::Approx(b));
}

TEST_CASE("classify_neighborhoods splits by literal sign") {
  // x1 appears: clause 0 (+), clause 1 (+), clause 2 (-).
  CnfInstance inst = parse_dimacs("p cnf 2 3\n1 2 0\n1 -2 0\n-1 2 0");
  auto nb = classify_neighborhoods(inst);
  const Neighborhood& edge_a = nb.at({0, 0});
  CHECK(edge_a.same_sign == std::vector<int>{1});
  CHECK(edge_a.opposite_sign == std::vector<int>{2});
  const Neighborhood& edge_c = nb.at({0, 2});
  CHECK(edge_c.same_sign.empty());
  CHECK(edge_c.opposite_sign == std::vector<int>{0, 1});
}

TEST_CASE("classify_neighborhoods singleton variable") {
  CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
  auto nb = classify_neighborhoods(inst);
  CHECK(nb.at({0, 0}).same_sign.empty());
  CHECK(nb.at({0, 0}).opposite_sign.empty());
}

TEST_CASE("build_sp_tfg topology matches build_tfg") {
  CnfInstance inst = random_ksat(12, 30, 3, 5);
  TensorFactorGraph bp = build_tfg(inst);
  TensorFactorGraph sp = build_sp_tfg(inst);
  REQUIRE(sp.num_nodes() == bp.num_nodes());
  REQUIRE(sp.num_edges() == bp.num_edges());
  for (int e = 0; e < sp.num_edges(); ++e) {
    CHECK(sp.edge(e).node_a == bp.edge(e).node_a);
    CHECK(sp.edge(e).node_b == bp.edge(e).node_b);
    CHECK(sp.edge(e).extent == 5);
  }
  sp.validate();
}

TEST_CASE("survey tensors are 0/1 valued") {
  CnfInstance inst = random_ksat(10, 26, 3, 9);
  TensorFactorGraph sp = build_sp_tfg(inst);
  for (int i = 0; i < sp.num_nodes(); ++i)
    for (int e : sp.node(i).edges) {
      const Tensor* dir = sp.directional_tensor(i, e);
      REQUIRE(dir != nullptr);
      dir->for_each_nonzero([](FlatIndex, double v) { CHECK(v == 1.0); });
    }
}

TEST_CASE("clause warning block has exactly one entry") {
  CnfInstance inst = parse_dimacs("p cnf 3 1\n1 -2 3 0");
  TensorFactorGraph sp = build_sp_tfg(inst);
  const int clause_node = 3;
  for (int e : sp.node(clause_node).edges) {
    const Tensor* dir = sp.directional_tensor(clause_node, e);
    REQUIRE(dir != nullptr);
    // Entries whose out-leg slot is the Qhat component.
    const int out_pos = dir->label_position(static_cast<Label>(e));
    auto strides = dir->strides();
    int count = 0;
    dir->for_each_nonzero([&](FlatIndex key, double) {
      FlatIndex rest = key;
      std::int64_t slot = 0;
      for (int i = dir->rank() - 1; i >= 0; --i) {
        const auto ext = static_cast<FlatIndex>(dir->extents()[static_cast<size_t>(i)]);
        if (i == out_pos) slot = static_cast<std::int64_t>(rest % ext);
        rest /= ext;
      }
      if (slot == 0) ++count;
    });
    CHECK(count == 1);
  }
}

TEST_CASE("lone variable reduces to the free-survey basis vector") {
  CnfInstance inst = parse_dimacs("p cnf 3 1\n1 2 3 0");
  TensorFactorGraph sp = build_sp_tfg(inst);
  const Tensor* dir = sp.directional_tensor(0, sp.node(0).edges[0]);
  REQUIRE(dir != nullptr);
  CHECK(dir->rank() == 1);
  CHECK(dir->nonzero_count() == 1);
  CHECK(dir->value_at_flat(4) == 1.0);  // the Q_* slot
}

TEST_CASE("cubic lattice graph is bipartite with the right edge count") {
  TensorFactorGraph g = build_cubic_lattice_tfg(4, 2, 42);
  g.validate();
  CHECK(g.num_nodes() == 64);
  CHECK(g.num_edges() == 3 * 4 * 4 * 3);  // 3 directions x L^2 x (L-1)
}
