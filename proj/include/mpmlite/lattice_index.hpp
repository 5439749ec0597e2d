#pragma once

#include "mpmlite/types.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace mpmlite {

enum class LatticeStorage { Sparse, Dense };

/// Maps integer lattice coordinates to compact slots. The sparse backend
/// hashes 4^d blocks by block coordinate; the dense backend is a flat
/// array over the whole extent.
template <int dim>
class LatticeIndex {
 public:
  static constexpr int kBlockWidth = 4;
  static constexpr int kBlockSize = dim == 2 ? 16 : 64;

  LatticeIndex() = default;
  LatticeIndex(const IVec<dim>& extent, LatticeStorage storage) { reset(extent, storage); }

  void reset(const IVec<dim>& extent, LatticeStorage storage) {
    extent_ = extent;
    storage_ = storage;
    for (int a = 0; a < dim; ++a) block_extent_[a] = (extent[a] + kBlockWidth - 1) / kBlockWidth;
    clear();
  }

  void clear() {
    blocks_.clear();
    block_lookup_.clear();
    dense_.clear();
    if (storage_ == LatticeStorage::Dense) {
      std::int64_t n = 1;
      for (int a = 0; a < dim; ++a) n *= extent_[a];
      dense_.assign(static_cast<std::size_t>(n), -1);
    }
    size_ = 0;
  }

  bool in_range(const IVec<dim>& c) const {
    for (int a = 0; a < dim; ++a)
      if (c[a] < 0 || c[a] >= extent_[a]) return false;
    return true;
  }

  /// Slot for c, or -1.
  int find(const IVec<dim>& c) const {
    if (!in_range(c)) return -1;
    if (storage_ == LatticeStorage::Dense) return dense_[static_cast<std::size_t>(linear(c))];
    const auto it = block_lookup_.find(block_key(c));
    if (it == block_lookup_.end()) return -1;
    return blocks_[it->second][local_offset(c)];
  }

  void insert(const IVec<dim>& c, int slot) {
    if (storage_ == LatticeStorage::Dense) {
      int& s = dense_[static_cast<std::size_t>(linear(c))];
      if (s < 0) ++size_;
      s = slot;
      return;
    }
    const std::int64_t key = block_key(c);
    auto it = block_lookup_.find(key);
    if (it == block_lookup_.end()) {
      it = block_lookup_.emplace(key, static_cast<int>(blocks_.size())).first;
      blocks_.emplace_back();
      blocks_.back().fill(-1);
    }
    int& s = blocks_[it->second][local_offset(c)];
    if (s < 0) ++size_;
    s = slot;
  }

  std::size_t size() const { return size_; }
  std::size_t block_count() const { return blocks_.size(); }
  LatticeStorage storage() const { return storage_; }

 private:
  std::int64_t linear(const IVec<dim>& c) const {
    std::int64_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * extent_[a] + c[a];
    return idx;
  }
  std::int64_t block_key(const IVec<dim>& c) const {
    std::int64_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * block_extent_[a] + c[a] / kBlockWidth;
    return idx;
  }
  static int local_offset(const IVec<dim>& c) {
    int idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * kBlockWidth + c[a] % kBlockWidth;
    return idx;
  }

  IVec<dim> extent_ = IVec<dim>::Zero();
  IVec<dim> block_extent_ = IVec<dim>::Zero();
  LatticeStorage storage_ = LatticeStorage::Sparse;
  std::vector<std::array<int, kBlockSize>> blocks_;
  std::unordered_map<std::int64_t, int> block_lookup_;
  std::vector<int> dense_;
  std::size_t size_ = 0;
};

}  // namespace mpmlite
