#include "cavitytn/vectorized.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace cavitytn {

VectorizedBp::VectorizedBp(const TensorFactorGraph& graph) : graph_(&graph) {
  // Partition nodes: copy tensors by (degree, extent), dense tensors by
  // full extents signature via stack_by_degree.
  std::map<std::pair<int, std::int64_t>, std::vector<int>> copy_groups;
  std::vector<std::pair<int, Tensor>> dense_nodes;
  for (int i = 0; i < graph.num_nodes(); ++i) {
    const TfgNode& n = graph.node(i);
    if (n.edges.empty()) continue;  // no messages to exchange
    // Leg order must match adjacency order.
    for (size_t q = 0; q < n.edges.size(); ++q)
      if (n.tensor.labels()[q] != static_cast<Label>(n.edges[q]))
        throw std::invalid_argument(
            "vectorized sweep requires tensor labels in adjacency order");
    if (n.copy_tensor) {
      copy_groups[{static_cast<int>(n.edges.size()), n.alphabet}].push_back(i);
    } else if (n.tensor.is_dense()) {
      dense_nodes.emplace_back(i, n.tensor);
    } else {
      throw std::invalid_argument(
          "vectorized sweep supports copy or dense node tensors only");
    }
  }

  auto add_env_tables = [&](Batch& b) {
    const int legs = b.rank;
    b.in.resize(static_cast<size_t>(legs));
    b.in_next.resize(static_cast<size_t>(legs));
    b.in_env_index.assign(static_cast<size_t>(legs), {});
    b.out_env_index.assign(static_cast<size_t>(legs), {});
    const int members = static_cast<int>(b.member_nodes.size());
    for (int leg = 0; leg < legs; ++leg) {
      b.in[static_cast<size_t>(leg)].resize(members, static_cast<Eigen::Index>(b.extent));
      b.in_next[static_cast<size_t>(leg)].resize(members,
                                                 static_cast<Eigen::Index>(b.extent));
      b.in_env_index[static_cast<size_t>(leg)].resize(static_cast<size_t>(members));
      b.out_env_index[static_cast<size_t>(leg)].resize(static_cast<size_t>(members));
      for (int m = 0; m < members; ++m) {
        const int node = b.member_nodes[static_cast<size_t>(m)];
        const int e = graph.node(node).edges[static_cast<size_t>(leg)];
        b.in_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)] =
            graph.env_index(e, graph.neighbor(e, node));
        b.out_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)] =
            graph.env_index(e, node);
      }
    }
  };

  for (auto& [sig, members] : copy_groups) {
    Batch b;
    b.copy = true;
    b.rank = sig.first;
    b.extent = sig.second;
    b.member_nodes = members;
    add_env_tables(b);
    batches_.push_back(std::move(b));
  }

  if (!dense_nodes.empty()) {
    for (StackedTensorBatch& sb : stack_by_degree(dense_nodes)) {
      Batch b;
      b.copy = false;
      b.member_nodes = sb.member_ids;
      b.dims.assign(sb.body.extents().begin() + 1, sb.body.extents().end());
      b.rank = static_cast<int>(b.dims.size());
      b.extent = b.dims.empty() ? 1 : b.dims[0];
      for (std::int64_t d : b.dims)
        if (d != b.extent)
          throw std::invalid_argument("vectorized sweep requires uniform bond extent");
      const auto members = static_cast<Eigen::Index>(b.member_nodes.size());
      std::int64_t size = 1;
      for (std::int64_t d : b.dims) size *= d;
      b.body.setZero(members, static_cast<Eigen::Index>(size));
      sb.body.for_each_nonzero([&](FlatIndex k, double v) {
        const auto slot = static_cast<Eigen::Index>(k / static_cast<FlatIndex>(size));
        const auto inner = static_cast<Eigen::Index>(k % static_cast<FlatIndex>(size));
        b.body(slot, inner) = v;
      });
      add_env_tables(b);
      batches_.push_back(std::move(b));
    }
  }

  // Scatter tables: outgoing (batch, leg, member) -> the target node's
  // incoming slot for the same directed edge.
  std::map<int, Batch::Target> incoming_slot;
  for (int bi = 0; bi < static_cast<int>(batches_.size()); ++bi) {
    Batch& b = batches_[static_cast<size_t>(bi)];
    for (int leg = 0; leg < b.rank; ++leg)
      for (int m = 0; m < static_cast<int>(b.member_nodes.size()); ++m)
        incoming_slot[b.in_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)]] =
            Batch::Target{bi, leg, m};
  }
  for (Batch& b : batches_) {
    b.scatter.assign(static_cast<size_t>(b.rank), {});
    for (int leg = 0; leg < b.rank; ++leg) {
      b.scatter[static_cast<size_t>(leg)].resize(b.member_nodes.size());
      for (int m = 0; m < static_cast<int>(b.member_nodes.size()); ++m) {
        auto it = incoming_slot.find(
            b.out_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)]);
        if (it == incoming_slot.end())
          throw std::logic_error("dangling directed edge in vectorized layout");
        b.scatter[static_cast<size_t>(leg)][static_cast<size_t>(m)] = it->second;
      }
    }
  }
}

void VectorizedBp::load(const EnvironmentSet& envs) {
  for (Batch& b : batches_)
    for (int leg = 0; leg < b.rank; ++leg)
      for (int m = 0; m < static_cast<int>(b.member_nodes.size()); ++m)
        b.in[static_cast<size_t>(leg)].row(m) =
            envs.at(b.in_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)])
                .transpose();
}

void VectorizedBp::store(EnvironmentSet& envs) const {
  if (envs.env.size() != static_cast<size_t>(graph_->num_directed_edges()))
    envs.env.resize(static_cast<size_t>(graph_->num_directed_edges()));
  for (const Batch& b : batches_)
    for (int leg = 0; leg < b.rank; ++leg)
      for (int m = 0; m < static_cast<int>(b.member_nodes.size()); ++m) {
        const int idx = b.in_env_index[static_cast<size_t>(leg)][static_cast<size_t>(m)];
        envs.env[static_cast<size_t>(idx)] =
            b.in[static_cast<size_t>(leg)].row(m).transpose();
      }
}

void VectorizedBp::compute_out(const Batch& b, int leg, Eigen::MatrixXd& out) const {
  const auto members = static_cast<Eigen::Index>(b.member_nodes.size());
  if (b.copy) {
    out.setOnes(members, static_cast<Eigen::Index>(b.extent));
    for (int q = 0; q < b.rank; ++q) {
      if (q == leg) continue;
      out.array() *= b.in[static_cast<size_t>(q)].array();
    }
    return;
  }
  // Batched absorption: repeatedly contract the trailing leg (skipping the
  // out leg) in place; safe because every write reads columns at or beyond
  // the write position.
  Eigen::MatrixXd& buf = out;
  buf = b.body;
  std::vector<std::int64_t> dims = b.dims;
  std::vector<int> leg_of(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) leg_of[i] = static_cast<int>(i);
  while (dims.size() > 1) {
    int q = static_cast<int>(dims.size()) - 1;
    if (leg_of[static_cast<size_t>(q)] == leg) --q;
    const std::int64_t e = dims[static_cast<size_t>(q)];
    std::int64_t stride = 1;
    for (size_t i = static_cast<size_t>(q) + 1; i < dims.size(); ++i)
      stride *= dims[i];
    std::int64_t new_size = stride;
    for (int i = 0; i < q; ++i) new_size *= dims[static_cast<size_t>(i)];
    const Eigen::MatrixXd& env = b.in[static_cast<size_t>(leg_of[static_cast<size_t>(q)])];
    for (std::int64_t j = 0; j < new_size; ++j) {
      const std::int64_t hi = j / stride, lo = j % stride;
      const std::int64_t base = hi * e * stride + lo;
      auto dst = buf.col(j);
      dst = buf.col(base).cwiseProduct(env.col(0));
      for (std::int64_t v = 1; v < e; ++v)
        dst += buf.col(base + v * stride).cwiseProduct(env.col(v));
    }
    dims.erase(dims.begin() + q);
    leg_of.erase(leg_of.begin() + q);
  }
  // The logical result occupies the first `extent` columns of buf.
  (void)members;
}

double VectorizedBp::sweep() {
  double max_delta = 0.0;
  Eigen::MatrixXd out;
  for (Batch& b : batches_) {
    const int members = static_cast<int>(b.member_nodes.size());
    const auto extent = static_cast<Eigen::Index>(b.extent);
    for (int leg = 0; leg < b.rank; ++leg) {
      compute_out(b, leg, out);
      for (int m = 0; m < members; ++m) {
        double s = 0.0;
        for (Eigen::Index r = 0; r < extent; ++r) s += out(m, r);
        if (!(s > 0.0) || !std::isfinite(s)) {
          contradiction_ = true;
          return max_delta;
        }
        const auto& t = b.scatter[static_cast<size_t>(leg)][static_cast<size_t>(m)];
        auto& target_batch = batches_[static_cast<size_t>(t.batch)];
        const auto& target_in = target_batch.in[static_cast<size_t>(t.leg)];
        auto& target_next = target_batch.in_next[static_cast<size_t>(t.leg)];
        double delta = 0.0;
        for (Eigen::Index r = 0; r < extent; ++r) {
          const double nv = out(m, r) / s;
          delta += std::abs(nv - target_in(t.member, r));
          target_next(t.member, r) = nv;
        }
        max_delta = std::max(max_delta, delta);
      }
    }
  }
  for (Batch& b : batches_)
    for (int leg = 0; leg < b.rank; ++leg)
      std::swap(b.in[static_cast<size_t>(leg)], b.in_next[static_cast<size_t>(leg)]);
  return max_delta;
}

BpReport VectorizedBp::run(const BpConfig& config) {
  BpReport report;
  load(init_environments(*graph_, config));
  for (int t = 1; t <= config.max_iterations; ++t) {
    const double d = sweep();
    report.iterations = t;
    report.final_delta = d;
    if (contradiction_) {
      report.status = BpStatus::kFailure;
      report.contradiction = true;
      store(report.environments);
      return report;
    }
    if (d < config.tolerance) {
      report.status = BpStatus::kSuccess;
      store(report.environments);
      return report;
    }
  }
  report.status = BpStatus::kFailure;
  store(report.environments);
  return report;
}

}  // namespace cavitytn
