#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cavitytn {

// Index labels are plain integers. Edge ids of a graph are used directly as
// labels; negative values are reserved (batch index, physical indices).
using Label = std::int64_t;

// Flattened multi-index. 128 bits so that very sparse, high-rank tensors
// (copy tensors of degree ~100, survey tensors of extent 5) keep exact keys.
using FlatIndex = unsigned __int128;

inline constexpr Label kBatchLabel = -1;

/// Physical (open) index label of a graph node.
inline constexpr Label physical_label(int node_id) {
  return -static_cast<Label>(node_id) - 2;
}

class ContractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Labeled multilinear array with dense or sparse storage.
///
/// Dense storage is a flat row-major array (last index fastest). Sparse
/// storage is a sorted map from flattened multi-index to value. Values are
/// immutable after construction.
class Tensor {
 public:
  enum class Storage { kDense, kSparse };

  /// Rank-0 tensor holding 0.
  Tensor();

  static Tensor scalar(double value);
  static Tensor dense(std::vector<Label> labels, std::vector<std::int64_t> extents,
                      Eigen::VectorXd values);
  static Tensor sparse(std::vector<Label> labels, std::vector<std::int64_t> extents,
                       std::map<FlatIndex, double> entries);
  /// Builds from (flat index, value) pairs; storage is chosen by density
  /// (at most 1/8 of entries populated -> sparse).
  static Tensor from_entries(std::vector<Label> labels, std::vector<std::int64_t> extents,
                             const std::map<FlatIndex, double>& entries);

  int rank() const { return static_cast<int>(labels_.size()); }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<std::int64_t>& extents() const { return extents_; }
  Storage storage() const { return storage_; }
  bool is_dense() const { return storage_ == Storage::kDense; }

  /// Total number of addressable entries.
  FlatIndex size() const;
  /// Number of stored nonzero entries (dense storage counts exact nonzeros).
  std::int64_t nonzero_count() const;

  bool has_label(Label l) const;
  int label_position(Label l) const;  // -1 when absent
  std::int64_t extent_of(Label l) const;

  double value_at(std::span<const std::int64_t> multi_index) const;
  double value_at_flat(FlatIndex flat) const;
  double scalar_value() const;
  double sum() const;
  double max_abs() const;

  const Eigen::VectorXd& dense_values() const;
  const std::map<FlatIndex, double>& sparse_entries() const;

  /// Visits every structurally nonzero entry as (flat index, value).
  void for_each_nonzero(const std::function<void(FlatIndex, double)>& fn) const;

  /// Row-major strides matching extents().
  std::vector<FlatIndex> strides() const;

  Tensor relabeled(const std::vector<Label>& new_labels) const;

  /// Exact structural equality: same labels, extents and entry values
  /// regardless of storage kind.
  bool operator==(const Tensor& other) const;

 private:
  std::vector<Label> labels_;
  std::vector<std::int64_t> extents_;
  Storage storage_ = Storage::kDense;
  Eigen::VectorXd dense_;
  std::map<FlatIndex, double> sparse_;

  void validate() const;
};

/// Copy (delta) tensor: 1 where all indices coincide, 0 elsewhere. Stored
/// sparse with exactly `extent` nonzeros. Labels default to 0..rank-1.
Tensor delta_tensor(std::int64_t extent, int rank);
Tensor delta_tensor(std::int64_t extent, int rank, std::vector<Label> labels);

/// True when the tensor has the copy-tensor pattern (all entries 1 on the
/// diagonal, 0 elsewhere).
bool is_copy_tensor(const Tensor& t);

/// Contracts a list of tensors: multiplies all inputs over shared labels and
/// sums every label not listed in `keep`. Result labels are exactly `keep`,
/// in order. Contracting an empty list over an empty keep set yields the
/// scalar 1 (empty product).
Tensor contract(std::span<const Tensor> tensors, std::span<const Label> keep);
Tensor contract(std::initializer_list<std::reference_wrapper<const Tensor>> tensors,
                std::initializer_list<Label> keep);

/// Sums out the given labels.
Tensor sum_out(const Tensor& t, std::span<const Label> labels);

/// Reorders tensor indices to the given label order (a permutation of the
/// current labels).
Tensor transpose_to(const Tensor& t, std::span<const Label> new_order);

/// Batch of same-signature tensors stacked under one extra leading index.
struct StackedTensorBatch {
  Label batch_label = kBatchLabel;
  std::vector<int> member_ids;
  std::vector<std::vector<Label>> member_labels;
  Tensor body;  // extents: [members, signature extents...]

  int members() const { return static_cast<int>(member_ids.size()); }
  /// Reconstructs the member tensor at the given slot, original labels
  /// restored.
  Tensor slice(int slot) const;
};

/// Partitions (id, tensor) pairs by (rank, extents) signature and stacks each
/// group. Group order follows first appearance in the input.
std::vector<StackedTensorBatch> stack_by_degree(
    std::span<const std::pair<int, Tensor>> tensors);

}  // namespace cavitytn
