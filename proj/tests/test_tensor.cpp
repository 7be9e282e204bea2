#include <doctest.h>

#include <random>

#include "cavitytn/rng.hpp"
#include "cavitytn/tensor.hpp"
#include "oracle.hpp"

using namespace cavitytn;

namespace {

Tensor random_dense(Rng& rng, std::vector<Label> labels, std::vector<std::int64_t> extents) {
  std::int64_t size = 1;
  for (auto e : extents) size *= e;
  Eigen::VectorXd vals(size);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::int64_t i = 0; i < size; ++i) vals(i) = dist(rng);
  return Tensor::dense(std::move(labels), std::move(extents), std::move(vals));
}

}  // namespace

TEST_CASE("identity matrix contraction keeps the vector") {
  Tensor m = delta_tensor(2, 2, {0, 1});
  Eigen::VectorXd vv(2);
  vv << 3, 5;
  Tensor v = Tensor::dense({1}, {2}, vv);
  Tensor out = contract({std::cref(m), std::cref(v)}, {0});
  CHECK(out.value_at_flat(0) == doctest::Approx(3.0));
  CHECK(out.value_at_flat(1) == doctest::Approx(5.0));
}

TEST_CASE("copy tensor selects the matching entry") {
  Tensor d = delta_tensor(2, 3, {0, 1, 2});
  Eigen::VectorXd e0(2);
  e0 << 1, 0;
  Tensor a = Tensor::dense({0}, {2}, e0);
  Tensor b = Tensor::dense({1}, {2}, e0);
  Tensor out = contract({std::cref(d), std::cref(a), std::cref(b)}, {2});
  CHECK(out.value_at_flat(0) == doctest::Approx(1.0));
  CHECK(out.value_at_flat(1) == doctest::Approx(0.0));
}

TEST_CASE("contraction over one shared label matches the naive evaluator") {
  Rng rng(7);
  Tensor a = random_dense(rng, {0, 1, 2}, {2, 2, 2});
  Tensor b = random_dense(rng, {2, 3, 4}, {2, 2, 2});
  std::vector<Label> keep{0, 1, 3, 4};
  std::vector<Tensor> in{a, b};
  Tensor got = contract(in, keep);
  Tensor want = testing::naive_contract(in, keep);
  REQUIRE(got.labels() == want.labels());
  for (FlatIndex i = 0; i < got.size(); ++i)
    CHECK(got.value_at_flat(i) == doctest::Approx(want.value_at_flat(i)).epsilon(1e-12));
}

TEST_CASE("contraction against naive evaluator on random shapes") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    // Up to three tensors over labels 0..5, extent 2, arbitrary sharing.
    std::vector<Tensor> tensors;
    std::uniform_int_distribution<int> n_tensors(1, 3), rank_dist(1, 3), label_dist(0, 5);
    const int nt = n_tensors(rng);
    std::vector<Label> present;
    for (int t = 0; t < nt; ++t) {
      const int rank = rank_dist(rng);
      std::vector<Label> labels;
      while (static_cast<int>(labels.size()) < rank) {
        Label l = label_dist(rng);
        if (std::find(labels.begin(), labels.end(), l) == labels.end())
          labels.push_back(l);
      }
      for (Label l : labels)
        if (std::find(present.begin(), present.end(), l) == present.end())
          present.push_back(l);
      tensors.push_back(
          random_dense(rng, labels, std::vector<std::int64_t>(labels.size(), 2)));
    }
    std::vector<Label> keep;
    for (Label l : present)
      if (std::uniform_int_distribution<int>(0, 1)(rng)) keep.push_back(l);
    Tensor got = contract(tensors, keep);
    Tensor want = testing::naive_contract(tensors, keep);
    REQUIRE(got.labels() == want.labels());
    for (FlatIndex i = 0; i < got.size(); ++i)
      CHECK(got.value_at_flat(i) ==
            doctest::Approx(want.value_at_flat(i)).epsilon(1e-12));
  }
}

TEST_CASE("contraction is multilinear in one slot") {
  Rng rng(13);
  Tensor a1 = random_dense(rng, {0, 1}, {2, 2});
  Tensor a2 = random_dense(rng, {0, 1}, {2, 2});
  Tensor b = random_dense(rng, {1, 2}, {2, 2});
  const double alpha = 0.37, beta = -1.25;
  Eigen::VectorXd mix = alpha * a1.dense_values() + beta * a2.dense_values();
  Tensor amix = Tensor::dense({0, 1}, {2, 2}, mix);
  std::vector<Label> keep{0, 2};
  Tensor lhs = contract({std::cref(amix), std::cref(b)}, {0, 2});
  Tensor r1 = contract({std::cref(a1), std::cref(b)}, {0, 2});
  Tensor r2 = contract({std::cref(a2), std::cref(b)}, {0, 2});
  for (FlatIndex i = 0; i < lhs.size(); ++i)
    CHECK(lhs.value_at_flat(i) ==
          doctest::Approx(alpha * r1.value_at_flat(i) + beta * r2.value_at_flat(i))
              .epsilon(1e-12));
}

TEST_CASE("pairwise contraction order does not change the result") {
  Rng rng(17);
  Tensor a = random_dense(rng, {0, 1}, {2, 2});
  Tensor b = random_dense(rng, {1, 2}, {2, 2});
  Tensor c = random_dense(rng, {2, 3}, {2, 2});
  std::vector<Label> keep{0, 3};
  std::vector<Tensor> abc{a, b, c}, cba{c, b, a}, bca{b, c, a};
  Tensor r1 = contract(abc, keep);
  Tensor r2 = contract(cba, keep);
  Tensor r3 = contract(bca, keep);
  Tensor want = testing::naive_contract(abc, keep);
  for (FlatIndex i = 0; i < want.size(); ++i) {
    const double w = want.value_at_flat(i);
    CHECK(r1.value_at_flat(i) == doctest::Approx(w).epsilon(1e-12));
    CHECK(r2.value_at_flat(i) == doctest::Approx(w).epsilon(1e-12));
    CHECK(r3.value_at_flat(i) == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_CASE("empty contraction is the scalar one") {
  CHECK(contract({}, {}).scalar_value() == 1.0);
}

TEST_CASE("contraction errors") {
  Tensor a = delta_tensor(2, 2, {0, 1});
  Tensor b = delta_tensor(3, 2, {1, 2});
  std::vector<Tensor> in{a, b};
  std::vector<Label> keep{0, 2};
  CHECK_THROWS_AS(contract(in, keep), ContractionError);

  std::vector<Tensor> ok{a};
  std::vector<Label> unknown{9};
  CHECK_THROWS_AS(contract(ok, unknown), std::invalid_argument);
}

TEST_CASE("delta tensor definition") {
  Tensor d = delta_tensor(2, 3);
  CHECK(d.nonzero_count() == 2);
  CHECK(d.value_at(std::vector<std::int64_t>{0, 0, 0}) == 1.0);
  CHECK(d.value_at(std::vector<std::int64_t>{1, 1, 1}) == 1.0);
  CHECK(d.value_at(std::vector<std::int64_t>{0, 1, 0}) == 0.0);

  Tensor v = delta_tensor(2, 1);
  CHECK(v.value_at_flat(0) == 1.0);
  CHECK(v.value_at_flat(1) == 1.0);

  Tensor eye = delta_tensor(3, 2);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      CHECK(eye.value_at(std::vector<std::int64_t>{i, j}) == (i == j ? 1.0 : 0.0));

  CHECK(is_copy_tensor(d));
  CHECK(is_copy_tensor(eye));
  CHECK_THROWS_AS(delta_tensor(0, 2), std::invalid_argument);
}

TEST_CASE("tensors with duplicate labels are rejected") {
  CHECK_THROWS_AS(Tensor::dense({0, 0}, {2, 2}, Eigen::VectorXd::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("stack_by_degree partitions by signature and slices back") {
  Rng rng(23);
  std::vector<std::pair<int, Tensor>> members;
  members.emplace_back(10, random_dense(rng, {0, 1, 2}, {2, 2, 2}));
  members.emplace_back(11, random_dense(rng, {3, 4, 5}, {2, 2, 2}));
  members.emplace_back(12, random_dense(rng, {6, 7, 8}, {2, 2, 2}));
  auto batches = stack_by_degree(members);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].body.extents()[0] == 3);
  CHECK(batches[0].member_ids == std::vector<int>{10, 11, 12});

  SUBCASE("slice round-trips exactly") {
    for (int s = 0; s < 3; ++s)
      CHECK(batches[0].slice(s) == members[static_cast<size_t>(s)].second);
  }

  SUBCASE("mixed ranks split into two batches") {
    members.emplace_back(13, random_dense(rng, {0, 1, 2, 3}, {2, 2, 2, 2}));
    auto mixed = stack_by_degree(members);
    REQUIRE(mixed.size() == 2);
    CHECK(mixed[0].members() == 3);
    CHECK(mixed[1].members() == 1);
    CHECK(mixed[1].slice(0) == members[3].second);
  }
}

TEST_CASE("sparse round trip and density rule") {
  std::map<FlatIndex, double> entries{{0, 1.0}};
  Tensor t = Tensor::from_entries({0, 1, 2, 3}, {2, 2, 2, 2}, entries);
  CHECK(!t.is_dense());
  CHECK(t.nonzero_count() == 1);

  std::map<FlatIndex, double> many;
  for (FlatIndex i = 0; i < 4; ++i) many.emplace(i, 1.0);
  Tensor dense = Tensor::from_entries({0, 1}, {2, 2}, many);
  CHECK(dense.is_dense());
}

TEST_CASE("sparse-sparse contraction matches naive") {
  Tensor d1 = delta_tensor(2, 3, {0, 1, 2});
  Tensor d2 = delta_tensor(2, 3, {2, 3, 4});
  std::vector<Tensor> in{d1, d2};
  std::vector<Label> keep{0, 4};
  Tensor got = contract(in, keep);
  Tensor want = testing::naive_contract(in, keep);
  for (FlatIndex i = 0; i < want.size(); ++i)
    CHECK(got.value_at_flat(i) == doctest::Approx(want.value_at_flat(i)));
}
