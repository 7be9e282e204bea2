#include "cavitytn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cavitytn {

namespace {

// Dense accumulation cap for contraction results; larger outputs fall back
// to map accumulation.
constexpr std::int64_t kDenseAccumCap = std::int64_t{1} << 22;

FlatIndex product_of_extents(const std::vector<std::int64_t>& extents) {
  FlatIndex p = 1;
  for (std::int64_t e : extents) p *= static_cast<FlatIndex>(e);
  return p;
}

void check_extent_product(const std::vector<std::int64_t>& extents) {
  // Guards the 128-bit flat index space.
  long double bits = 0;
  for (std::int64_t e : extents) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive");
    bits += std::log2l(static_cast<long double>(e));
  }
  if (bits > 126.0) throw std::invalid_argument("tensor index space exceeds 2^126");
}

std::vector<FlatIndex> strides_of(const std::vector<std::int64_t>& extents) {
  std::vector<FlatIndex> s(extents.size());
  FlatIndex acc = 1;
  for (int i = static_cast<int>(extents.size()) - 1; i >= 0; --i) {
    s[static_cast<size_t>(i)] = acc;
    acc *= static_cast<FlatIndex>(extents[static_cast<size_t>(i)]);
  }
  return s;
}

}  // namespace

Tensor::Tensor() : storage_(Storage::kDense), dense_(Eigen::VectorXd::Zero(1)) {}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.dense_(0) = value;
  return t;
}

Tensor Tensor::dense(std::vector<Label> labels, std::vector<std::int64_t> extents,
                     Eigen::VectorXd values) {
  Tensor t;
  t.labels_ = std::move(labels);
  t.extents_ = std::move(extents);
  t.storage_ = Storage::kDense;
  t.dense_ = std::move(values);
  t.validate();
  if (static_cast<FlatIndex>(t.dense_.size()) != t.size())
    throw std::invalid_argument("dense storage length does not match extents");
  return t;
}

Tensor Tensor::sparse(std::vector<Label> labels, std::vector<std::int64_t> extents,
                      std::map<FlatIndex, double> entries) {
  Tensor t;
  t.labels_ = std::move(labels);
  t.extents_ = std::move(extents);
  t.storage_ = Storage::kSparse;
  t.sparse_ = std::move(entries);
  t.dense_.resize(0);
  t.validate();
  const FlatIndex n = t.size();
  for (const auto& [k, v] : t.sparse_) {
    if (k >= n) throw std::invalid_argument("sparse key outside extents");
    if (!std::isfinite(v)) throw std::invalid_argument("tensor value not finite");
  }
  return t;
}

Tensor Tensor::from_entries(std::vector<Label> labels, std::vector<std::int64_t> extents,
                            const std::map<FlatIndex, double>& entries) {
  check_extent_product(extents);
  const FlatIndex n = product_of_extents(extents);
  const bool density_sparse =
      static_cast<FlatIndex>(entries.size()) * 8 <= n;
  if (density_sparse || n > static_cast<FlatIndex>(kDenseAccumCap)) {
    std::map<FlatIndex, double> nz;
    for (const auto& [k, v] : entries)
      if (v != 0.0) nz.emplace(k, v);
    return sparse(std::move(labels), std::move(extents), std::move(nz));
  }
  Eigen::VectorXd vals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& [k, v] : entries) {
    if (k >= n) throw std::invalid_argument("entry key outside extents");
    vals(static_cast<Eigen::Index>(k)) = v;
  }
  return dense(std::move(labels), std::move(extents), std::move(vals));
}

void Tensor::validate() const {
  if (labels_.size() != extents_.size())
    throw std::invalid_argument("labels and extents differ in length");
  check_extent_product(extents_);
  std::unordered_set<Label> seen;
  for (Label l : labels_)
    if (!seen.insert(l).second)
      throw std::invalid_argument("duplicate label within one tensor");
  if (storage_ == Storage::kDense) {
    for (Eigen::Index i = 0; i < dense_.size(); ++i)
      if (!std::isfinite(dense_(i)))
        throw std::invalid_argument("tensor value not finite");
  }
}

FlatIndex Tensor::size() const { return product_of_extents(extents_); }

std::int64_t Tensor::nonzero_count() const {
  if (storage_ == Storage::kSparse) {
    std::int64_t n = 0;
    for (const auto& [k, v] : sparse_)
      if (v != 0.0) ++n;
    return n;
  }
  return (dense_.array() != 0.0).count();
}

bool Tensor::has_label(Label l) const { return label_position(l) >= 0; }

int Tensor::label_position(Label l) const {
  auto it = std::find(labels_.begin(), labels_.end(), l);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

std::int64_t Tensor::extent_of(Label l) const {
  int p = label_position(l);
  if (p < 0) throw std::invalid_argument("label not present in tensor");
  return extents_[static_cast<size_t>(p)];
}

double Tensor::value_at(std::span<const std::int64_t> multi_index) const {
  if (multi_index.size() != labels_.size())
    throw std::invalid_argument("multi index rank mismatch");
  FlatIndex flat = 0;
  auto st = strides();
  for (size_t i = 0; i < multi_index.size(); ++i) {
    if (multi_index[i] < 0 || multi_index[i] >= extents_[i])
      throw std::out_of_range("multi index outside extents");
    flat += static_cast<FlatIndex>(multi_index[i]) * st[i];
  }
  return value_at_flat(flat);
}

double Tensor::value_at_flat(FlatIndex flat) const {
  if (storage_ == Storage::kDense) return dense_(static_cast<Eigen::Index>(flat));
  auto it = sparse_.find(flat);
  return it == sparse_.end() ? 0.0 : it->second;
}

double Tensor::scalar_value() const {
  if (!labels_.empty()) throw std::invalid_argument("tensor is not rank 0");
  return value_at_flat(0);
}

double Tensor::sum() const {
  if (storage_ == Storage::kDense) return dense_.sum();
  double s = 0;
  for (const auto& [k, v] : sparse_) s += v;
  return s;
}

double Tensor::max_abs() const {
  double m = 0;
  for_each_nonzero([&](FlatIndex, double v) { m = std::max(m, std::abs(v)); });
  return m;
}

const Eigen::VectorXd& Tensor::dense_values() const {
  if (storage_ != Storage::kDense) throw std::logic_error("tensor is sparse");
  return dense_;
}

const std::map<FlatIndex, double>& Tensor::sparse_entries() const {
  if (storage_ != Storage::kSparse) throw std::logic_error("tensor is dense");
  return sparse_;
}

void Tensor::for_each_nonzero(const std::function<void(FlatIndex, double)>& fn) const {
  if (storage_ == Storage::kDense) {
    for (Eigen::Index i = 0; i < dense_.size(); ++i)
      if (dense_(i) != 0.0) fn(static_cast<FlatIndex>(i), dense_(i));
  } else {
    for (const auto& [k, v] : sparse_)
      if (v != 0.0) fn(k, v);
  }
}

std::vector<FlatIndex> Tensor::strides() const { return strides_of(extents_); }

Tensor Tensor::relabeled(const std::vector<Label>& new_labels) const {
  Tensor t = *this;
  if (new_labels.size() != labels_.size())
    throw std::invalid_argument("relabel rank mismatch");
  t.labels_ = new_labels;
  t.validate();
  return t;
}

bool Tensor::operator==(const Tensor& other) const {
  if (labels_ != other.labels_ || extents_ != other.extents_) return false;
  std::map<FlatIndex, double> a, b;
  for_each_nonzero([&](FlatIndex k, double v) { a.emplace(k, v); });
  other.for_each_nonzero([&](FlatIndex k, double v) { b.emplace(k, v); });
  return a == b;
}

Tensor delta_tensor(std::int64_t extent, int rank) {
  std::vector<Label> labels(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) labels[static_cast<size_t>(i)] = i;
  return delta_tensor(extent, rank, std::move(labels));
}

Tensor delta_tensor(std::int64_t extent, int rank, std::vector<Label> labels) {
  if (extent < 1 || rank < 1)
    throw std::invalid_argument("delta tensor needs extent >= 1 and rank >= 1");
  std::vector<std::int64_t> extents(static_cast<size_t>(rank), extent);
  auto st = strides_of(extents);
  FlatIndex stride_sum = 0;
  for (FlatIndex s : st) stride_sum += s;
  std::map<FlatIndex, double> entries;
  for (std::int64_t i = 0; i < extent; ++i)
    entries.emplace(static_cast<FlatIndex>(i) * stride_sum, 1.0);
  return Tensor::sparse(std::move(labels), std::move(extents), std::move(entries));
}

bool is_copy_tensor(const Tensor& t) {
  if (t.rank() < 1) return false;
  const std::int64_t e = t.extents()[0];
  for (std::int64_t x : t.extents())
    if (x != e) return false;
  if (t.nonzero_count() != e) return false;
  auto st = t.strides();
  FlatIndex stride_sum = 0;
  for (FlatIndex s : st) stride_sum += s;
  for (std::int64_t i = 0; i < e; ++i)
    if (t.value_at_flat(static_cast<FlatIndex>(i) * stride_sum) != 1.0) return false;
  return true;
}

namespace {

// One dimension of a pairwise join: strides into A, B and the output (zero
// when the tensor does not carry the label or the label is summed).
struct JoinDim {
  Label label;
  std::int64_t extent;
  FlatIndex stride_a, stride_b, stride_out;
};

struct Accumulator {
  bool dense;
  Eigen::VectorXd vals;
  std::map<FlatIndex, double> entries;

  explicit Accumulator(FlatIndex out_size) {
    dense = out_size <= static_cast<FlatIndex>(kDenseAccumCap);
    if (dense) vals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_size));
  }
  void add(FlatIndex at, double v) {
    if (dense)
      vals(static_cast<Eigen::Index>(at)) += v;
    else
      entries[at] += v;
  }
  Tensor finish(std::vector<Label> labels, std::vector<std::int64_t> extents) && {
    if (dense) {
      // Keep dense results dense unless the density rule favors sparse.
      std::map<FlatIndex, double> nz;
      std::int64_t n = (vals.array() != 0.0).count();
      if (n * 8 <= vals.size()) {
        for (Eigen::Index i = 0; i < vals.size(); ++i)
          if (vals(i) != 0.0) nz.emplace(static_cast<FlatIndex>(i), vals(i));
        return Tensor::sparse(std::move(labels), std::move(extents), std::move(nz));
      }
      return Tensor::dense(std::move(labels), std::move(extents), std::move(vals));
    }
    std::map<FlatIndex, double> nz;
    for (auto& [k, v] : entries)
      if (v != 0.0) nz.emplace(k, v);
    return Tensor::from_entries(std::move(labels), std::move(extents), nz);
  }
};

// Odometer over a dimension list; calls fn(offset_a, offset_b, offset_out)
// for every configuration.
void iterate_dims(const std::vector<JoinDim>& dims,
                  const std::function<void(FlatIndex, FlatIndex, FlatIndex)>& fn) {
  std::vector<std::int64_t> idx(dims.size(), 0);
  FlatIndex a = 0, b = 0, o = 0;
  for (;;) {
    fn(a, b, o);
    int d = static_cast<int>(dims.size()) - 1;
    for (; d >= 0; --d) {
      auto& jd = dims[static_cast<size_t>(d)];
      if (++idx[static_cast<size_t>(d)] < jd.extent) {
        a += jd.stride_a;
        b += jd.stride_b;
        o += jd.stride_out;
        break;
      }
      idx[static_cast<size_t>(d)] = 0;
      a -= jd.stride_a * static_cast<FlatIndex>(jd.extent - 1);
      b -= jd.stride_b * static_cast<FlatIndex>(jd.extent - 1);
      o -= jd.stride_out * static_cast<FlatIndex>(jd.extent - 1);
    }
    if (d < 0) break;
  }
}

// Pairwise contraction of a and b keeping `needed` labels (shared labels not
// in `needed` are summed; exclusive labels are assumed pre-marginalized or
// needed).
Tensor pairwise_join(const Tensor& a, const Tensor& b,
                     const std::vector<Label>& needed) {
  auto in = [](const std::vector<Label>& v, Label l) {
    return std::find(v.begin(), v.end(), l) != v.end();
  };

  std::vector<Label> out_labels;
  std::vector<std::int64_t> out_extents;
  std::vector<Label> join_order;  // out labels first, then summed shared
  for (Label l : a.labels())
    if (in(needed, l) || (!b.has_label(l))) {
      out_labels.push_back(l);
      out_extents.push_back(a.extent_of(l));
    }
  for (Label l : b.labels())
    if (!a.has_label(l)) {
      out_labels.push_back(l);
      out_extents.push_back(b.extent_of(l));
    } else if (a.extent_of(l) != b.extent_of(l)) {
      throw ContractionError("extent mismatch on shared label " + std::to_string(l));
    }
  join_order = out_labels;
  for (Label l : a.labels())
    if (b.has_label(l) && !in(out_labels, l)) join_order.push_back(l);

  auto sa = a.strides();
  auto sb = b.strides();
  auto so = strides_of(out_extents);
  std::vector<JoinDim> dims;
  for (Label l : join_order) {
    JoinDim d{};
    d.label = l;
    int pa = a.label_position(l), pb = b.label_position(l);
    d.extent = pa >= 0 ? a.extents()[static_cast<size_t>(pa)]
                       : b.extents()[static_cast<size_t>(pb)];
    d.stride_a = pa >= 0 ? sa[static_cast<size_t>(pa)] : 0;
    d.stride_b = pb >= 0 ? sb[static_cast<size_t>(pb)] : 0;
    auto po = std::find(out_labels.begin(), out_labels.end(), l);
    d.stride_out =
        po == out_labels.end() ? 0 : so[static_cast<size_t>(po - out_labels.begin())];
    dims.push_back(d);
  }

  Accumulator acc(product_of_extents(out_extents));

  const bool a_sparse = !a.is_dense();
  const bool b_sparse = !b.is_dense();

  if (!a_sparse && !b_sparse) {
    const auto& av = a.dense_values();
    const auto& bv = b.dense_values();
    iterate_dims(dims, [&](FlatIndex ia, FlatIndex ib, FlatIndex io) {
      acc.add(io, av(static_cast<Eigen::Index>(ia)) * bv(static_cast<Eigen::Index>(ib)));
    });
    return std::move(acc).finish(std::move(out_labels), std::move(out_extents));
  }

  // Sparse driver path: iterate the sparse side's nonzeros, resolve the
  // other side either densely (odometer over its exclusive dims) or through
  // a shared-key index of its nonzeros.
  const Tensor& drv = a_sparse ? a : b;
  const Tensor& oth = a_sparse ? b : a;
  const bool drv_is_a = a_sparse;

  // Positions of each join dim in driver/other.
  struct DimRef {
    int pos_drv, pos_oth;
    FlatIndex stride_oth, stride_out;
    std::int64_t extent;
  };
  std::vector<DimRef> refs;
  auto so_drv = drv.strides();
  auto so_oth = oth.strides();
  for (size_t i = 0; i < join_order.size(); ++i) {
    DimRef r{};
    r.pos_drv = drv.label_position(join_order[i]);
    r.pos_oth = oth.label_position(join_order[i]);
    r.stride_oth = r.pos_oth >= 0 ? so_oth[static_cast<size_t>(r.pos_oth)] : 0;
    r.stride_out = dims[i].stride_out;
    r.extent = dims[i].extent;
    refs.push_back(r);
  }

  // Shared label list (present in both).
  std::vector<size_t> shared_dims, oth_only_dims;
  for (size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].pos_drv >= 0 && refs[i].pos_oth >= 0) shared_dims.push_back(i);
    if (refs[i].pos_drv < 0) oth_only_dims.push_back(i);
  }

  // Decompose a driver flat key into per-join-dim values.
  auto drv_strides = drv.strides();
  auto drv_extents = drv.extents();
  std::vector<std::int64_t> dv(drv.labels().size());
  auto decompose_drv = [&](FlatIndex key) {
    for (int i = drv.rank() - 1; i >= 0; --i) {
      auto e = static_cast<FlatIndex>(drv_extents[static_cast<size_t>(i)]);
      dv[static_cast<size_t>(i)] = static_cast<std::int64_t>(key % e);
      key /= e;
    }
  };

  if (oth.is_dense()) {
    const auto& ov = oth.dense_values();
    // Odometer dims over the other's exclusive labels.
    std::vector<JoinDim> tail;
    for (size_t i : oth_only_dims)
      tail.push_back(JoinDim{join_order[i], refs[i].extent, 0, refs[i].stride_oth,
                             refs[i].stride_out});
    drv.for_each_nonzero([&](FlatIndex key, double val) {
      decompose_drv(key);
      FlatIndex obase = 0, outbase = 0;
      for (size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].pos_drv < 0) continue;
        auto v = static_cast<FlatIndex>(dv[static_cast<size_t>(refs[i].pos_drv)]);
        obase += v * refs[i].stride_oth;
        outbase += v * refs[i].stride_out;
      }
      if (tail.empty()) {
        acc.add(outbase, val * ov(static_cast<Eigen::Index>(obase)));
      } else {
        iterate_dims(tail, [&](FlatIndex, FlatIndex ib, FlatIndex io) {
          acc.add(outbase + io, val * ov(static_cast<Eigen::Index>(obase + ib)));
        });
      }
    });
    (void)drv_is_a;
    return std::move(acc).finish(std::move(out_labels), std::move(out_extents));
  }

  // Both sparse: index the other's nonzeros by shared-key.
  std::vector<std::int64_t> ov_idx(oth.labels().size());
  auto oth_extents = oth.extents();
  auto decompose_oth = [&](FlatIndex key) {
    for (int i = oth.rank() - 1; i >= 0; --i) {
      auto e = static_cast<FlatIndex>(oth_extents[static_cast<size_t>(i)]);
      ov_idx[static_cast<size_t>(i)] = static_cast<std::int64_t>(key % e);
      key /= e;
    }
  };
  std::map<FlatIndex, std::vector<std::pair<FlatIndex, double>>> by_shared;
  std::vector<FlatIndex> shared_key_stride(shared_dims.size());
  {
    FlatIndex s = 1;
    for (int i = static_cast<int>(shared_dims.size()) - 1; i >= 0; --i) {
      shared_key_stride[static_cast<size_t>(i)] = s;
      s *= static_cast<FlatIndex>(refs[shared_dims[static_cast<size_t>(i)]].extent);
    }
  }
  oth.for_each_nonzero([&](FlatIndex key, double val) {
    decompose_oth(key);
    FlatIndex sk = 0, out_part = 0;
    for (size_t i = 0; i < shared_dims.size(); ++i) {
      auto& r = refs[shared_dims[i]];
      sk += static_cast<FlatIndex>(ov_idx[static_cast<size_t>(r.pos_oth)]) *
            shared_key_stride[i];
    }
    for (size_t i : oth_only_dims) {
      auto& r = refs[i];
      out_part += static_cast<FlatIndex>(ov_idx[static_cast<size_t>(r.pos_oth)]) *
                  r.stride_out;
    }
    by_shared[sk].emplace_back(out_part, val);
  });
  drv.for_each_nonzero([&](FlatIndex key, double val) {
    decompose_drv(key);
    FlatIndex sk = 0, outbase = 0;
    for (size_t i = 0; i < shared_dims.size(); ++i) {
      auto& r = refs[shared_dims[i]];
      sk += static_cast<FlatIndex>(dv[static_cast<size_t>(r.pos_drv)]) *
            shared_key_stride[i];
    }
    for (size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].pos_drv < 0) continue;
      outbase += static_cast<FlatIndex>(dv[static_cast<size_t>(refs[i].pos_drv)]) *
                 refs[i].stride_out;
    }
    auto it = by_shared.find(sk);
    if (it == by_shared.end()) return;
    for (const auto& [out_part, oval] : it->second) acc.add(outbase + out_part, val * oval);
  });
  return std::move(acc).finish(std::move(out_labels), std::move(out_extents));
}

}  // namespace

Tensor sum_out(const Tensor& t, std::span<const Label> labels) {
  std::vector<Label> keep;
  for (Label l : t.labels())
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) keep.push_back(l);
  if (keep.size() == t.labels().size()) return t;

  std::vector<std::int64_t> out_extents;
  for (Label l : keep) out_extents.push_back(t.extent_of(l));
  auto so = strides_of(out_extents);

  std::vector<FlatIndex> proj(t.labels().size(), 0);
  for (size_t i = 0; i < t.labels().size(); ++i) {
    auto it = std::find(keep.begin(), keep.end(), t.labels()[i]);
    if (it != keep.end()) proj[i] = so[static_cast<size_t>(it - keep.begin())];
  }

  Accumulator acc(product_of_extents(out_extents));
  auto ext = t.extents();
  t.for_each_nonzero([&](FlatIndex key, double val) {
    FlatIndex out = 0;
    for (int i = t.rank() - 1; i >= 0; --i) {
      auto e = static_cast<FlatIndex>(ext[static_cast<size_t>(i)]);
      out += (key % e) * proj[static_cast<size_t>(i)];
      key /= e;
    }
    acc.add(out, val);
  });
  return std::move(acc).finish(std::move(keep), std::move(out_extents));
}

Tensor transpose_to(const Tensor& t, std::span<const Label> new_order) {
  if (new_order.size() != t.labels().size())
    throw std::invalid_argument("transpose order must list all labels");
  if (std::equal(new_order.begin(), new_order.end(), t.labels().begin())) return t;
  std::vector<Label> out_labels(new_order.begin(), new_order.end());
  std::vector<std::int64_t> out_extents;
  for (Label l : out_labels) out_extents.push_back(t.extent_of(l));
  auto so = strides_of(out_extents);
  std::vector<FlatIndex> proj(t.labels().size());
  for (size_t i = 0; i < t.labels().size(); ++i) {
    auto it = std::find(out_labels.begin(), out_labels.end(), t.labels()[i]);
    if (it == out_labels.end())
      throw std::invalid_argument("transpose order must be a permutation of labels");
    proj[i] = so[static_cast<size_t>(it - out_labels.begin())];
  }
  Accumulator acc(t.size());
  auto ext = t.extents();
  t.for_each_nonzero([&](FlatIndex key, double val) {
    FlatIndex out = 0;
    for (int i = t.rank() - 1; i >= 0; --i) {
      auto e = static_cast<FlatIndex>(ext[static_cast<size_t>(i)]);
      out += (key % e) * proj[static_cast<size_t>(i)];
      key /= e;
    }
    acc.add(out, val);
  });
  return std::move(acc).finish(std::move(out_labels), std::move(out_extents));
}

Tensor contract(std::span<const Tensor> tensors, std::span<const Label> keep) {
  // Validate keep labels and shared extents.
  for (Label l : keep) {
    bool found = false;
    for (const Tensor& t : tensors)
      if (t.has_label(l)) {
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("keep label " + std::to_string(l) +
                                  " not present in any tensor");
  }
  std::map<Label, std::int64_t> extent_by_label;
  for (const Tensor& t : tensors)
    for (size_t i = 0; i < t.labels().size(); ++i) {
      auto [it, inserted] = extent_by_label.emplace(t.labels()[i], t.extents()[i]);
      if (!inserted && it->second != t.extents()[i])
        throw ContractionError("extent mismatch on shared label " +
                               std::to_string(t.labels()[i]));
    }

  if (tensors.empty()) return Tensor::scalar(1.0);

  Tensor acc = tensors[0];
  for (size_t i = 1; i < tensors.size(); ++i) {
    // Labels still required after this step: final keeps plus anything that
    // appears in a later tensor.
    std::vector<Label> needed(keep.begin(), keep.end());
    for (size_t j = i + 1; j < tensors.size(); ++j)
      for (Label l : tensors[j].labels())
        if (std::find(needed.begin(), needed.end(), l) == needed.end())
          needed.push_back(l);
    // Pre-marginalize exclusive unneeded labels on both sides.
    std::vector<Label> drop_a, drop_b;
    for (Label l : acc.labels())
      if (!tensors[i].has_label(l) &&
          std::find(needed.begin(), needed.end(), l) == needed.end())
        drop_a.push_back(l);
    for (Label l : tensors[i].labels())
      if (!acc.has_label(l) &&
          std::find(needed.begin(), needed.end(), l) == needed.end())
        drop_b.push_back(l);
    Tensor lhs = drop_a.empty() ? std::move(acc) : sum_out(acc, drop_a);
    Tensor rhs = drop_b.empty() ? tensors[i] : sum_out(tensors[i], drop_b);
    acc = pairwise_join(lhs, rhs, needed);
  }

  std::vector<Label> drop;
  for (Label l : acc.labels())
    if (std::find(keep.begin(), keep.end(), l) == keep.end()) drop.push_back(l);
  if (!drop.empty()) acc = sum_out(acc, drop);
  return transpose_to(acc, keep);
}

Tensor contract(std::initializer_list<std::reference_wrapper<const Tensor>> tensors,
                std::initializer_list<Label> keep) {
  std::vector<Tensor> ts;
  ts.reserve(tensors.size());
  for (const auto& t : tensors) ts.push_back(t.get());
  std::vector<Label> ks(keep.begin(), keep.end());
  return contract(std::span<const Tensor>(ts), std::span<const Label>(ks));
}

Tensor StackedTensorBatch::slice(int slot) const {
  if (slot < 0 || slot >= members()) throw std::out_of_range("batch slot");
  FlatIndex member_size = 1;
  for (size_t i = 1; i < body.extents().size(); ++i)
    member_size *= static_cast<FlatIndex>(body.extents()[i]);
  std::map<FlatIndex, double> entries;
  const FlatIndex lo = static_cast<FlatIndex>(slot) * member_size;
  body.for_each_nonzero([&](FlatIndex k, double v) {
    if (k >= lo && k < lo + member_size) entries.emplace(k - lo, v);
  });
  std::vector<std::int64_t> extents(body.extents().begin() + 1, body.extents().end());
  return Tensor::from_entries(member_labels[static_cast<size_t>(slot)], std::move(extents),
                              entries);
}

std::vector<StackedTensorBatch> stack_by_degree(
    std::span<const std::pair<int, Tensor>> tensors) {
  if (tensors.empty()) throw std::invalid_argument("stack_by_degree needs input");
  std::vector<std::vector<std::int64_t>> signatures;
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto& ext = tensors[i].second.extents();
    auto it = std::find(signatures.begin(), signatures.end(), ext);
    if (it == signatures.end()) {
      signatures.push_back(ext);
      groups.emplace_back();
      it = signatures.end() - 1;
    }
    groups[static_cast<size_t>(it - signatures.begin())].push_back(i);
  }

  std::vector<StackedTensorBatch> batches;
  for (size_t g = 0; g < groups.size(); ++g) {
    StackedTensorBatch batch;
    FlatIndex member_size = product_of_extents(signatures[g]);
    std::map<FlatIndex, double> entries;
    for (size_t slot = 0; slot < groups[g].size(); ++slot) {
      const auto& [id, t] = tensors[groups[g][slot]];
      batch.member_ids.push_back(id);
      batch.member_labels.push_back(t.labels());
      const FlatIndex base = static_cast<FlatIndex>(slot) * member_size;
      t.for_each_nonzero([&](FlatIndex k, double v) { entries.emplace(base + k, v); });
    }
    std::vector<Label> body_labels{kBatchLabel};
    for (size_t i = 0; i < signatures[g].size(); ++i)
      body_labels.push_back(static_cast<Label>(i));
    std::vector<std::int64_t> body_extents{
        static_cast<std::int64_t>(groups[g].size())};
    body_extents.insert(body_extents.end(), signatures[g].begin(), signatures[g].end());
    batch.body = Tensor::from_entries(std::move(body_labels), std::move(body_extents),
                                      entries);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace cavitytn
