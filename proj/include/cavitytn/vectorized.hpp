#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cavitytn/bp.hpp"
#include "cavitytn/tfg.hpp"

namespace cavitytn {

/// Degree-stacked BP sweeper: nodes are grouped by tensor signature and a
/// whole group's outgoing messages are computed with a handful of batched
/// array operations (two-phase schedule). Copy-tensor nodes use running
/// prefix/suffix products; dense nodes use batched leg absorption.
///
/// One sweep reproduces the per-edge two-phase reference sweep to within
/// floating-point associativity.
class VectorizedBp {
 public:
  explicit VectorizedBp(const TensorFactorGraph& graph);

  /// Loads per-directed-edge environments into the batch layout.
  void load(const EnvironmentSet& envs);
  /// Writes the batch state back out.
  void store(EnvironmentSet& envs) const;

  /// One two-phase sweep over every directed edge. Returns the maximum L1
  /// change; contradiction() reports a zero message.
  double sweep();
  bool contradiction() const { return contradiction_; }

  /// Full BP run with the usual convergence contract.
  BpReport run(const BpConfig& config);

  int num_batches() const { return static_cast<int>(batches_.size()); }

 private:
  struct Batch {
    bool copy = false;
    std::int64_t extent = 2;          // bond extent (uniform within a batch)
    std::vector<std::int64_t> dims;   // tensor extents (dense batches)
    int rank = 0;
    std::vector<int> member_nodes;
    // Dense batches: body(members, prod(dims)), column = flat multi-index.
    Eigen::MatrixXd body;
    // Incoming environments per leg: in[leg](members, extent).
    std::vector<Eigen::MatrixXd> in;
    std::vector<Eigen::MatrixXd> in_next;
    // Scatter map: (leg, member) -> (batch, leg, member) of the target's
    // incoming slot.
    struct Target {
      int batch, leg, member;
    };
    std::vector<std::vector<Target>> scatter;
    // Directed env index per (leg, member), for load/store.
    std::vector<std::vector<int>> in_env_index;
    std::vector<std::vector<int>> out_env_index;
  };

  const TensorFactorGraph* graph_;
  std::vector<Batch> batches_;
  bool contradiction_ = false;

  void compute_out(const Batch& b, int leg, Eigen::MatrixXd& out) const;
};

}  // namespace cavitytn
