#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <vector>

#include "fitnet/rng.hpp"
#include "fitnet/stats.hpp"
#include "fitnet/weighted_index.hpp"

using namespace fitnet;
using Slot = WeightedIndex::Slot;

namespace {

// Random insert/update/remove sequence biased towards extreme weights.
// Returns the live slots with their current weights, tracked outside the index.
std::map<Slot, double> churn(WeightedIndex& index, Rng& rng, int ops) {
  std::map<Slot, double> live;
  std::vector<Slot> slots;
  auto random_weight = [&] {
    switch (rng.below(4)) {
      case 0: return 0.0;
      case 1: return rng.uniform() * 1e-6;
      case 2: return rng.uniform() * 1e6;
      default: return rng.uniform();
    }
  };
  for (int i = 0; i < ops; ++i) {
    const auto op = rng.below(10);
    if (op < 4 || slots.empty()) {
      const double w = random_weight();
      const Slot s = index.insert(w);
      live[s] = w;
      slots.push_back(s);
    } else if (op < 7) {
      const Slot s = slots[rng.below(slots.size())];
      const double w = random_weight();
      index.update(s, w);
      live[s] = w;
    } else {
      const auto pos = rng.below(slots.size());
      const Slot s = slots[pos];
      index.remove(s);
      live.erase(s);
      slots[pos] = slots.back();
      slots.pop_back();
    }
  }
  return live;
}

double resum(const std::map<Slot, double>& live) {
  // sorted ascending so the oracle sum is as accurate as plain doubles allow
  std::vector<double> w;
  for (const auto& [s, x] : live) w.push_back(x);
  std::sort(w.begin(), w.end());
  long double total = 0.0L;
  for (double x : w) total += x;
  return static_cast<double>(total);
}

}  // namespace

TEST(WeightedIndex, ZeroWeightNeverSampled) {
  WeightedIndex index;
  const Slot zero = index.insert(0.0);
  index.insert(1.0);
  Rng rng(1);
  for (int i = 0; i < 1000000; ++i) ASSERT_NE(index.sample(rng), zero);
}

TEST(WeightedIndex, FrequenciesProportionalToWeights) {
  WeightedIndex index;
  const Slot a = index.insert(1.0);
  const Slot b = index.insert(1.0);
  const Slot c = index.insert(2.0);
  Rng rng(2);
  const int n = 1000000;
  std::map<Slot, int> hits;
  for (int i = 0; i < n; ++i) ++hits[index.sample(rng)];
  const std::pair<Slot, double> expected[] = {{a, 0.25}, {b, 0.25}, {c, 0.5}};
  for (const auto& [slot, p] : expected) {
    const double sigma = std::sqrt(n * p * (1 - p));
    EXPECT_LT(std::abs(hits[slot] - n * p), 3 * sigma) << "slot " << slot;
  }
}

TEST(WeightedIndex, RemovedSlotIsNeverReturned) {
  WeightedIndex index;
  const Slot heavy = index.insert(3.0);
  const Slot light = index.insert(1.0);
  index.remove(heavy);
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(index.sample(rng), light);
}

TEST(WeightedIndex, UpdateToZeroStopsSampling) {
  WeightedIndex index;
  const Slot a = index.insert(1.0);
  const Slot b = index.insert(1.0);
  index.update(a, 0.0);
  Rng rng(4);
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(index.sample(rng), b);
  EXPECT_EQ(index.weight(a), 0.0);
}

TEST(WeightedIndex, TotalWeightMatchesResummationAfterChurn) {
  WeightedIndex index;
  Rng rng(5);
  const auto live = churn(index, rng, 100000);
  const double oracle = resum(live);
  EXPECT_EQ(index.size(), live.size());
  EXPECT_LE(std::abs(index.total_weight() - oracle), 1e-9 * oracle);
  for (const auto& [s, w] : live) ASSERT_EQ(index.weight(s), w);
}

TEST(WeightedIndex, ChiSquareAfterAdversarialChurn) {
  WeightedIndex index;
  Rng rng(6);
  auto live = churn(index, rng, 100000);
  // keep the cell count manageable: coarse weights on the surviving slots
  std::vector<Slot> slots;
  for (auto& [s, w] : live) {
    w = static_cast<double>(1 + rng.below(20));
    index.update(s, w);
    slots.push_back(s);
  }
  while (slots.size() > 200) {
    index.remove(slots.back());
    live.erase(slots.back());
    slots.pop_back();
  }
  const int n = 1000000;
  std::map<Slot, std::uint64_t> hits;
  for (int i = 0; i < n; ++i) ++hits[index.sample(rng)];
  std::vector<std::uint64_t> observed;
  std::vector<double> probs;
  const double total = resum(live);
  for (const auto& [s, w] : live) {
    observed.push_back(hits[s]);
    probs.push_back(w / total);
  }
  for (const auto& [s, h] : hits) ASSERT_TRUE(live.count(s)) << "sampled a dead slot " << s;
  const auto chi = stats::chi_square(observed, probs);
  EXPECT_GT(chi.p_value, 0.01) << "chi2 = " << chi.statistic << " dof = " << chi.dof;
}

TEST(WeightedIndex, SlotsAreRecycled) {
  WeightedIndex index(2);
  const Slot a = index.insert(1.0);
  index.insert(1.0);
  index.remove(a);
  EXPECT_EQ(index.insert(5.0), a);
  EXPECT_EQ(index.weight(a), 5.0);
  for (int i = 0; i < 100; ++i) index.insert(1.0);
  EXPECT_GE(index.capacity(), 102u);
  EXPECT_DOUBLE_EQ(index.total_weight(), 106.0);
}

TEST(WeightedIndex, Errors) {
  WeightedIndex index;
  Rng rng(7);
  EXPECT_THROW(index.sample(rng), EmptyError);
  const Slot a = index.insert(0.0);
  EXPECT_THROW(index.sample(rng), EmptyError);
  EXPECT_THROW(index.insert(-1.0), ParameterError);
  EXPECT_THROW(index.insert(std::nan("")), ParameterError);
  EXPECT_THROW(index.update(a, INFINITY), ParameterError);
  index.remove(a);
  EXPECT_THROW(index.remove(a), SlotError);
  EXPECT_THROW(index.update(a, 1.0), SlotError);
  EXPECT_THROW(index.weight(12345), SlotError);
}

TEST(WeightedIndex, ThroughputReported) {
  // soft performance criterion: recorded, never gated
  WeightedIndex index;
  Rng rng(8);
  std::vector<Slot> slots;
  for (int i = 0; i < 100000; ++i) slots.push_back(index.insert(1.0 + rng.uniform()));
  const int ops = 1000000;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < ops; ++i) {
    const Slot s = slots[rng.below(slots.size())];
    if (i % 2 == 0) index.update(s, rng.uniform() + 0.5);
    else (void)index.sample(rng);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RecordProperty("mixed_ops_per_second", std::to_string(static_cast<long long>(ops / secs)));
  std::printf("weighted index: %.3g mixed ops/s\n", ops / secs);
}
