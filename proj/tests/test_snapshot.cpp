#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <unistd.h>

#include "fitnet/simulator.hpp"
#include "fitnet/snapshot.hpp"

using namespace fitnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fitnet_snap_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

Snapshot snap_of(std::vector<Edge> edges, std::vector<NodeId> isolated = {}) {
  Snapshot s;
  s.edges = std::move(edges);
  s.isolated = std::move(isolated);
  return s;
}

// brute force k*: union of in-neighbour sets per node over ordinals <= t
std::map<NodeId, std::vector<std::uint32_t>> brute_accumulate(const SnapshotSeries& series) {
  std::map<NodeId, std::set<NodeId>> seen;
  std::map<NodeId, std::vector<std::uint32_t>> out;
  for (std::uint32_t t = 1; t <= series.size(); ++t) {
    const auto snap = series.load(t);
    for (const auto& e : snap->edges) seen[e.dst].insert(e.src);
    for (const auto& sp : series.spans())
      if (sp.first <= t && t <= sp.last) out[sp.id].push_back(static_cast<std::uint32_t>(seen[sp.id].size()));
  }
  return out;
}

void expect_matches_brute_force(const SnapshotSeries& series, const AccumulatedSeries& acc) {
  const auto oracle = brute_accumulate(series);
  ASSERT_EQ(acc.size(), oracle.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc.view(i);
    const auto& want = oracle.at(v.id);
    ASSERT_EQ(v.kstar.size(), want.size()) << "node " << v.id;
    for (std::size_t j = 0; j < want.size(); ++j) ASSERT_EQ(v.kstar[j], want[j]) << "node " << v.id;
  }
}

}  // namespace

TEST(SnapshotFiles, NamesAreZeroPadded) {
  EXPECT_EQ(snapshot_file_name(1), "snapshot_0001.tsv");
  EXPECT_EQ(snapshot_file_name(13), "snapshot_0013.tsv");
  EXPECT_EQ(snapshot_file_name(123456), "snapshot_123456.tsv");
}

TEST(SnapshotFiles, ThirteenWellFormedFiles) {
  const auto dir = fresh_dir("thirteen");
  for (int i = 1; i <= 13; ++i) write_lines(dir / snapshot_file_name(i), {"1\t2", "2\t3", std::to_string(i + 3) + "\t1"});
  write_lines(dir / "notes.txt", {"ignored"});
  const auto series = read_series(dir);
  EXPECT_EQ(series.size(), 13u);
  EXPECT_EQ(series.malformed_lines(), 0u);
  EXPECT_EQ(series.descriptor(5).timestamp, 5u);  // no manifest: file index
  fs::remove_all(dir);
}

TEST(SnapshotFiles, OneMalformedLineInAMillionIsAccepted) {
  const auto dir = fresh_dir("malformed_ok");
  {
    std::ofstream a(dir / snapshot_file_name(1));
    for (int i = 0; i < 500000; ++i) a << i << '\t' << i + 1 << '\n';
    std::ofstream b(dir / snapshot_file_name(2));
    for (int i = 0; i < 499999; ++i) b << i << '\t' << i + 2 << '\n';
    b << "this line\tis\tbroken\n";
  }
  const auto series = read_series(dir, {.id_mode = IdMode::Integer});
  EXPECT_EQ(series.total_lines(), 1000000u);
  EXPECT_EQ(series.malformed_lines(), 1u);
  fs::remove_all(dir);
}

TEST(SnapshotFiles, TooManyMalformedLinesRejected) {
  const auto dir = fresh_dir("malformed_bad");
  write_lines(dir / snapshot_file_name(1), {"1\t2", "2\t3"});
  write_lines(dir / snapshot_file_name(2), {"1\t2", "x\ty\tz"});
  EXPECT_THROW(read_series(dir, {.id_mode = IdMode::Integer}), FormatError);
  fs::remove_all(dir);
}

TEST(SnapshotFiles, TooFewSnapshots) {
  const auto dir = fresh_dir("empty");
  EXPECT_THROW(read_series(dir), SeriesError);
  write_lines(dir / snapshot_file_name(1), {"1\t2"});
  EXPECT_THROW(read_series(dir), SeriesError);
  EXPECT_THROW(read_series(dir / "missing"), SeriesError);
  fs::remove_all(dir);
}

TEST(SnapshotFiles, HashedStringIdsAndDuplicates) {
  const auto dir = fresh_dir("hashed");
  write_lines(dir / snapshot_file_name(1), {"http://a/\thttp://b/", "http://a/\thttp://b/", "http://c/"});
  write_lines(dir / snapshot_file_name(2), {"http://c/\thttp://b/", "http://a/\thttp://b/"});
  const auto series = read_series(dir);
  EXPECT_EQ(series.id_mode(), IdMode::Hashed);
  EXPECT_EQ(series.load(1)->edges.size(), 1u);  // duplicate collapsed
  EXPECT_EQ(series.load(1)->isolated.size(), 1u);
  const NodeId b = hash_id("http://b/");
  EXPECT_EQ(series.label(b), "http://b/");
  const auto acc = accumulate(series);
  const auto vb = acc.find(b);
  ASSERT_TRUE(vb.has_value());
  EXPECT_EQ(vb->at(1), 1u);
  EXPECT_EQ(vb->at(2), 2u);
  fs::remove_all(dir);
}

TEST(SnapshotFiles, ManifestSuppliesTimestampsAndIdMode) {
  const auto dir = fresh_dir("manifest");
  ModelParams p;
  p.m = 2;
  p.c = 0.3;
  p.total_steps = 600;
  p.snapshot_interval = 200;
  run_to_directory(p, dir);
  const auto series = read_series(dir);
  EXPECT_EQ(series.id_mode(), IdMode::Integer);
  ASSERT_EQ(series.size(), 3u);
  EXPECT_EQ(series.descriptor(2).timestamp, 400u);
  const auto mem = run_in_memory(p);
  for (std::uint32_t t = 1; t <= 3; ++t) {
    EXPECT_EQ(series.load(t)->edges, mem.series.load(t)->edges);
    EXPECT_EQ(series.load(t)->isolated, mem.series.load(t)->isolated);
  }
  fs::remove_all(dir);
}

TEST(Accumulate, SetUnionAcrossSnapshots) {
  // node 9 sees {1, 2} then {2, 3}
  auto series = SnapshotSeries::from_snapshots({snap_of({{1, 9}, {2, 9}}), snap_of({{2, 9}, {3, 9}})});
  const auto acc = accumulate(series);
  const auto v = acc.find(9);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->at(1), 2u);
  EXPECT_EQ(v->at(2), 3u);
}

TEST(Accumulate, LateNodeStartsAtFirstSighting) {
  auto series = SnapshotSeries::from_snapshots(
      {snap_of({{1, 2}}), snap_of({{1, 2}, {3, 2}}, {7}), snap_of({{7, 2}, {1, 7}})});
  const auto acc = accumulate(series);
  const auto v = acc.find(7);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->first, 2u);
  EXPECT_EQ(v->last(), 3u);
  EXPECT_EQ(v->kstar.size(), 2u);
  EXPECT_EQ(v->at(2), 0u);
  EXPECT_EQ(v->at(3), 1u);
  EXPECT_EQ(acc.find(2)->final_value(), 3u);
}

TEST(Accumulate, MatchesSimulatorWithoutDeletion) {
  ModelParams p;
  p.m = 3;
  p.c = 0.0;
  p.fitness_dist = fitness::TruncatedExponential{3.316, 2.0};
  p.total_steps = 13 * 400;
  p.snapshot_interval = 400;
  auto run = run_in_memory(p);
  const auto acc = accumulate(run.series);
  ASSERT_EQ(acc.size(), run.ground_truth.size());
  for (const auto& n : run.ground_truth) ASSERT_EQ(acc.find(n.id)->final_value(), n.accumulated_in_degree);
}

TEST(Accumulate, MatchesBruteForceWithDeletion) {
  ModelParams p;
  p.m = 3;
  p.c = 0.6;
  p.fitness_dist = fitness::Uniform{2.0};
  p.total_steps = 13 * 150;
  p.snapshot_interval = 150;
  p.seed = 4;
  auto run = run_in_memory(p);
  const auto acc = accumulate(run.series);
  expect_matches_brute_force(run.series, acc);
  // observed k* never exceeds the simulator's count of links ever received
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc.view(i);
    ASSERT_LE(v.final_value(), run.ground_truth[v.id].accumulated_in_degree);
  }
}

TEST(Accumulate, SpillPathGivesSameResult) {
  ModelParams p;
  p.m = 4;
  p.c = 0.5;
  p.total_steps = 13 * 300;
  p.snapshot_interval = 300;
  auto run = run_in_memory(p);
  bool spilled = true;
  const auto plain = accumulate(run.series, {}, &spilled);
  EXPECT_FALSE(spilled);
  const auto dir = fresh_dir("spill");
  const auto split = accumulate(run.series, {.memory_budget_bytes = 4096, .spill_dir = dir}, &spilled);
  EXPECT_TRUE(spilled);
  ASSERT_EQ(plain.size(), split.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const auto a = plain.view(i);
    const auto b = split.view(i);
    ASSERT_EQ(a.id, b.id);
    ASSERT_TRUE(std::equal(a.kstar.begin(), a.kstar.end(), b.kstar.begin(), b.kstar.end()));
  }
  fs::remove_all(dir);
}

TEST(Accumulate, IdempotentAndOrderInsensitive) {
  ModelParams p;
  p.m = 3;
  p.c = 0.4;
  p.total_steps = 13 * 200;
  p.snapshot_interval = 200;
  auto run = run_in_memory(p);
  std::vector<Snapshot> shuffled;
  Rng rng(3);
  for (std::uint32_t t = 1; t <= run.series.size(); ++t) {
    Snapshot s = *run.series.load(t);
    std::shuffle(s.edges.begin(), s.edges.end(), rng);
    shuffled.push_back(std::move(s));
  }
  const auto other = SnapshotSeries::from_snapshots(std::move(shuffled));
  const auto a = accumulate(run.series);
  const auto b = accumulate(other);
  const auto c = accumulate(run.series);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(std::ranges::equal(a.view(i).kstar, b.view(i).kstar));
    ASSERT_TRUE(std::ranges::equal(a.view(i).kstar, c.view(i).kstar));
  }
}

TEST(Accumulate, LiveInDegreeNeverExceedsKstar) {
  ModelParams p;
  p.m = 3;
  p.c = 0.7;
  p.total_steps = 13 * 300;
  p.snapshot_interval = 300;
  auto run = run_in_memory(p);
  const auto acc = accumulate(run.series);
  for (std::uint32_t t = 1; t <= run.series.size(); ++t)
    for (const auto& [id, k] : in_degrees(*run.series.load(t))) ASSERT_LE(k, acc.find(id)->at(t));
}

TEST(Turnover, SyntheticTenInNineOut) {
  // each transition: 10 new nodes appear, 9 old ones vanish for good
  std::vector<Snapshot> snaps;
  std::vector<NodeId> live;
  NodeId next = 0;
  for (int i = 0; i < 20; ++i) live.push_back(next++);
  for (int t = 0; t < 6; ++t) {
    if (t > 0) {
      live.erase(live.begin(), live.begin() + 9);
      for (int i = 0; i < 10; ++i) live.push_back(next++);
    }
    snaps.push_back(snap_of({}, live));
  }
  const auto stats = turnover(SnapshotSeries::from_snapshots(std::move(snaps)));
  ASSERT_EQ(stats.transitions.size(), 5u);
  for (const auto& tr : stats.transitions) {
    EXPECT_EQ(tr.inserted, 10u);
    EXPECT_EQ(tr.removed, 9u);
  }
  EXPECT_EQ(stats.c_estimate, 0.9);
}

TEST(Turnover, GrowingSeriesHasNoRemovals) {
  auto series = SnapshotSeries::from_snapshots({snap_of({{1, 2}}), snap_of({{1, 2}, {3, 1}}), snap_of({{1, 2}, {3, 1}, {4, 3}})});
  const auto stats = turnover(series);
  EXPECT_EQ(stats.total_removed, 0u);
  EXPECT_EQ(stats.total_inserted, 2u);
  EXPECT_EQ(stats.c_estimate, 0.0);
}

TEST(Turnover, MatchesSimulatorEventLog) {
  ModelParams p;
  p.m = 3;
  p.c = 0.5;
  p.total_steps = 13 * 2000;
  p.snapshot_interval = 2000;
  p.seed = 19;
  auto run = run_in_memory(p);
  const auto stats = turnover(run.series);
  ASSERT_EQ(stats.transitions.size(), 12u);
  std::uint64_t ins = 0;
  std::uint64_t del = 0;
  for (const auto& tr : stats.transitions) {
    // nodes born and killed inside one interval are never observed
    const auto& iv = run.intervals[tr.ordinal - 1];
    EXPECT_EQ(tr.inserted, iv.inserted - iv.ephemeral);
    EXPECT_EQ(tr.removed, iv.deleted - iv.ephemeral);
    ins += iv.inserted - iv.ephemeral;
    del += iv.deleted - iv.ephemeral;
  }
  EXPECT_EQ(stats.c_estimate, static_cast<double>(del) / static_cast<double>(ins));
}

TEST(Turnover, FrequentSnapshotsRecoverC) {
  // with intervals short against the network size few nodes live and die
  // unseen, so the observable ratio approaches c
  ModelParams p;
  p.m = 3;
  p.c = 0.5;
  p.seed = 23;
  Simulator sim(p);
  sim.run_steps(100000);
  std::vector<Snapshot> snaps;
  for (int i = 0; i < 13; ++i) {
    sim.run_steps(1000);
    snaps.push_back(sim.snapshot());
  }
  const auto stats = turnover(SnapshotSeries::from_snapshots(std::move(snaps)));
  EXPECT_NEAR(stats.c_estimate, 0.5, 0.02);
}

TEST(Cohort, NewestNodesAndEmptyCases) {
  auto series = SnapshotSeries::from_snapshots(
      {snap_of({{1, 2}}), snap_of({{1, 2}, {3, 2}}, {4, 5}), snap_of({{1, 3}, {3, 2}, {6, 3}}, {4, 5})});
  // first seen at 2: nodes 3, 4, 5; at 3 their in-degrees are 2, 0, 0
  auto members = cohort_members(series, 2, 3);
  ASSERT_EQ(members.size(), 3u);
  EXPECT_EQ(members[0], (std::pair<NodeId, std::uint32_t>{3, 2}));
  const auto never_linked = cohort(series, 2, 3);
  EXPECT_EQ(std::count(never_linked.begin(), never_linked.end(), 0u), 2);
  // b = t - 1
  EXPECT_EQ(cohort(series, 2, 3).size(), 3u);
  auto lonely = SnapshotSeries::from_snapshots({snap_of({}, {1, 2}), snap_of({}, {1, 2, 3, 4})});
  EXPECT_EQ(cohort(lonely, 1, 2), (std::vector<std::uint32_t>{0, 0}));
  auto static_series = SnapshotSeries::from_snapshots({snap_of({{1, 2}}), snap_of({{1, 2}})});
  EXPECT_TRUE(cohort(static_series, 1, 2).size() == 2);
  EXPECT_THROW(cohort(series, 3, 3), SeriesError);
  EXPECT_THROW(cohort(series, 0, 2), SeriesError);
  EXPECT_THROW(cohort(series, 1, 4), SeriesError);
}

TEST(Cohort, EmptyCohortIsNotAnError) {
  auto series = SnapshotSeries::from_snapshots({snap_of({{1, 2}}), snap_of({{1, 2}}), snap_of({{1, 2}, {3, 1}})});
  EXPECT_TRUE(cohort(series, 2, 3).empty());
}
