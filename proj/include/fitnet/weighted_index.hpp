#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fitnet/errors.hpp"
#include "fitnet/rng.hpp"

namespace fitnet {

/// Dynamic weighted sampler over integer slots.
///
/// Weights sit in the leaves of a complete binary tree whose internal nodes
/// hold partial sums, so insert/update/remove/sample all cost O(log capacity).
/// Removed slots get weight zero and are recycled through a free list.
/// Ancestors are recomputed from their children on every change, so partial
/// sums carry no accumulated drift; a periodic full rebuild is kept as a
/// safety net.
class WeightedIndex {
 public:
  using Slot = std::uint32_t;
  static constexpr std::uint64_t kRebuildPeriod = std::uint64_t{1} << 20;

  explicit WeightedIndex(std::size_t capacity = 16) { grow_to(capacity < 2 ? 2 : capacity); }

  Slot insert(double w) {
    check_weight(w);
    Slot slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      if (next_unused_ == leaves_) grow_to(leaves_ * 2);
      slot = next_unused_++;
    }
    live_[slot] = 1;
    ++live_count_;
    set_leaf(slot, w);
    return slot;
  }

  void update(Slot slot, double w) {
    check_live(slot);
    check_weight(w);
    set_leaf(slot, w);
  }

  void remove(Slot slot) {
    check_live(slot);
    set_leaf(slot, 0.0);
    live_[slot] = 0;
    --live_count_;
    free_.push_back(slot);
  }

  double weight(Slot slot) const {
    check_live(slot);
    return tree_[leaves_ + slot];
  }

  bool live(Slot slot) const { return slot < next_unused_ && live_[slot] != 0; }

  /// Draws a live slot with probability weight / total_weight.
  template <typename Random>
  Slot sample(Random& rng) {
    if (live_count_ == 0 || !(tree_[1] > 0.0)) throw EmptyError("sample from a weighted index with zero total weight");
    for (int attempt = 0;; ++attempt) {
      double r = rng.uniform() * tree_[1];
      std::size_t node = 1;
      while (node < leaves_) {
        const std::size_t left = 2 * node;
        const double lw = tree_[left];
        // never descend into an empty subtree, even when rounding says so
        if ((r < lw && lw > 0.0) || !(tree_[left + 1] > 0.0)) {
          node = left;
        } else {
          r -= lw;
          node = left + 1;
        }
      }
      const Slot slot = static_cast<Slot>(node - leaves_);
      if (tree_[node] > 0.0) return slot;
      // a stale positive partial sum led to an empty leaf: resync and retry
      rebuild();
      if (!(tree_[1] > 0.0) || attempt > 4) throw EmptyError("sample from a weighted index with zero total weight");
    }
  }

  double total_weight() const { return tree_[1]; }
  std::size_t size() const { return live_count_; }
  std::size_t capacity() const { return leaves_; }

  /// Recomputes every partial sum from the leaves.
  void rebuild() {
    for (std::size_t i = leaves_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
    mutations_ = 0;
  }

 private:
  void check_weight(double w) const {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("weights must be finite and >= 0");
  }

  void check_live(Slot slot) const {
    if (!live(slot)) throw SlotError("slot " + std::to_string(slot) + " is not live");
  }

  void set_leaf(Slot slot, double w) {
    std::size_t node = leaves_ + slot;
    tree_[node] = w;
    // recompute from children rather than adding a delta: an all-zero
    // subtree then sums to exactly zero
    for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
    if (++mutations_ >= kRebuildPeriod) rebuild();
  }

  void grow_to(std::size_t want) {
    std::size_t leaves = 1;
    while (leaves < want) leaves <<= 1;
    std::vector<double> tree(2 * leaves, 0.0);
    for (std::size_t i = 0; i < leaves_; ++i) tree[leaves + i] = tree_[leaves_ + i];
    tree_.swap(tree);
    live_.resize(leaves, 0);
    leaves_ = leaves;
    rebuild();
  }

  std::vector<double> tree_;      // 1-based heap layout, leaves at [leaves_, 2*leaves_)
  std::vector<std::uint8_t> live_;
  std::vector<Slot> free_;
  std::size_t leaves_ = 0;
  Slot next_unused_ = 0;
  std::size_t live_count_ = 0;
  std::uint64_t mutations_ = 0;
};

}  // namespace fitnet
