#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitnet/errors.hpp"
#include "fitnet/fitness.hpp"
#include "fitnet/params.hpp"
#include "fitnet/rng.hpp"
#include "fitnet/snapshot.hpp"
#include "fitnet/weighted_index.hpp"

namespace fitnet {

struct NodeRecord {
  NodeId id = 0;
  std::uint64_t birth_step = 0;
  double fitness = 0.0;
  bool alive = false;
  std::uint32_t in_degree = 0;              // live in-degree (value at death for deleted nodes)
  std::uint32_t accumulated_in_degree = 0;  // distinct in-neighbours ever
};

/// Event counters for the steps since the previous snapshot.
struct IntervalCounts {
  std::uint64_t step = 0;  // step at which the interval closed
  std::uint64_t inserted = 0;
  std::uint64_t deleted = 0;
  std::uint64_t ephemeral = 0;  // inserted and deleted inside the same interval
  std::uint64_t truncated_links = 0;  // fewer live candidates than m
  std::uint64_t dropped_links = 0;    // 50 collided resamples in a row
  std::uint64_t uniform_fallbacks = 0;  // kernel mass was zero; target drawn uniformly
};

struct DeletionRecord {
  NodeId victim = 0;
  std::uint64_t step = 0;
  std::uint64_t birth_step = 0;
  std::uint32_t in_degree = 0;
  std::uint32_t out_degree = 0;
};

/// Fitness-with-deletion growth process on a directed graph.
///
/// Each step inserts one node that links to up to m distinct live nodes
/// drawn from the fitness-degree kernel, then deletes one uniformly chosen
/// live node (possibly the newcomer) with probability c. The network starts
/// from m+1 nodes in a directed ring.
///
/// Edges are only ever created by a newborn and its targets are distinct, so
/// a (source, target) pair occurs at most once over the whole run and the
/// accumulated in-degree is a plain counter of in-links ever received.
class Simulator {
 public:
  static constexpr int kMaxResamples = 50;

  explicit Simulator(ModelParams params) : Simulator(params, Rng(params.seed)) {}

  Simulator(ModelParams params, Rng rng) : params_(std::move(params)), rng_(rng) {
    validate(params_);
    const std::uint32_t seed_nodes = params_.m + 1;
    for (std::uint32_t i = 0; i < seed_nodes; ++i) add_node(sample_fitness(params_.fitness_dist, rng_));
    for (std::uint32_t i = 0; i < seed_nodes; ++i) link(i, (i + 1) % seed_nodes);
    for (std::uint32_t i = 0; i < seed_nodes; ++i) activate(i);
  }

  const ModelParams& params() const { return params_; }
  std::uint64_t time() const { return t_; }
  std::size_t live_count() const { return live_.size(); }
  std::size_t total_nodes() const { return fitness_.size(); }

  void step() {
    insert_node();
    if (rng_.bernoulli(params_.c)) delete_uniform();
  }

  void run_steps(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) step();
  }

  /// Advances the clock and adds one node with its out-links.
  NodeId insert_node() {
    ++t_;
    const double eta = sample_fitness(params_.fitness_dist, rng_);
    std::uint32_t want = params_.m;
    if (live_.size() < want) {
      current_.truncated_links += want - live_.size();
      want = static_cast<std::uint32_t>(live_.size());
    }
    chosen_.clear();
    for (std::uint32_t j = 0; j < want; ++j) {
      const bool kernel = sampler_.total_weight() > 0.0;
      if (!kernel) ++current_.uniform_fallbacks;
      bool placed = false;
      for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        const std::uint32_t cand = kernel ? node_of_slot_[sampler_.sample(rng_)] : live_[rng_.below(live_.size())];
        if (std::find(chosen_.begin(), chosen_.end(), cand) == chosen_.end()) {
          chosen_.push_back(cand);
          placed = true;
          break;
        }
      }
      if (!placed) ++current_.dropped_links;
    }

    const std::uint32_t id = add_node(eta);
    for (std::uint32_t target : chosen_) {
      link(id, target);
      refresh(target);
    }
    activate(id);
    ++current_.inserted;
    return id;
  }

  /// Removes a uniformly chosen live node together with all of its edges.
  NodeId delete_uniform() {
    if (live_.empty()) throw EmptyError("delete from an empty network");
    const std::uint32_t victim = live_[rng_.below(live_.size())];
    remove_node(victim);
    return victim;
  }

  /// Closes the current interval and returns the live graph.
  Snapshot snapshot() {
    Snapshot snap;
    snap.step = t_;
    for (std::uint32_t v = 0; v < fitness_.size(); ++v) {
      if (!alive_[v]) continue;
      const std::size_t base = out_base(v);
      for (std::uint32_t j = 0; j < out_count_[v]; ++j) {
        const std::uint32_t t = out_targets_[base + j];
        if (alive_[t]) snap.edges.push_back({v, t});
      }
      if (in_[v] == 0 && out_live_[v] == 0) snap.isolated.push_back(v);
    }
    std::sort(snap.edges.begin(), snap.edges.end());
    current_.step = t_;
    intervals_.push_back(current_);
    current_ = {};
    last_snapshot_step_ = t_;
    return snap;
  }

  const std::vector<IntervalCounts>& intervals() const { return intervals_; }
  const IntervalCounts& open_interval() const { return current_; }

  void record_deletions(bool on) { record_deletions_ = on; }
  const std::vector<DeletionRecord>& deletions() const { return deletions_; }

  NodeRecord node(NodeId id) const {
    if (id >= fitness_.size()) throw ParameterError("unknown node " + std::to_string(id));
    const auto v = static_cast<std::uint32_t>(id);
    return {id, birth_[v], fitness_[v], alive_[v] != 0, in_[v], kstar_[v]};
  }

  std::vector<NodeRecord> nodes() const {
    std::vector<NodeRecord> out;
    out.reserve(fitness_.size());
    for (std::uint32_t v = 0; v < fitness_.size(); ++v) out.push_back(node(v));
    return out;
  }

  const std::vector<std::uint32_t>& live_nodes() const { return live_; }
  std::uint32_t out_degree(NodeId id) const { return out_live_.at(id); }

  /// Attachment weight currently held by a live node.
  double kernel_weight(NodeId id) const { return sampler_.weight(slot_.at(id)); }
  double total_kernel_weight() const { return sampler_.total_weight(); }

  std::uint64_t live_edge_count() const {
    std::uint64_t e = 0;
    for (std::uint32_t v : live_) e += out_live_[v];
    return e;
  }

  /// Recomputes every bookkeeping quantity from scratch; returns a
  /// description of the first violation, or an empty string.
  std::string check_invariants() const {
    std::ostringstream err;
    std::uint64_t inserted = 0;
    std::uint64_t deleted = 0;
    for (const auto& iv : intervals_) {
      inserted += iv.inserted;
      deleted += iv.deleted;
    }
    inserted += current_.inserted + params_.m + 1;
    deleted += current_.deleted;
    if (live_.size() != inserted - deleted) err << "live count " << live_.size() << " != " << inserted - deleted << "; ";
    std::vector<std::uint32_t> in_count(fitness_.size(), 0);
    std::uint64_t edges = 0;
    std::uint64_t in_sum = 0;
    for (std::uint32_t v = 0; v < fitness_.size(); ++v) {
      if (!alive_[v]) continue;
      std::uint32_t out = 0;
      for (std::uint32_t j = 0; j < out_count_[v]; ++j) {
        const std::uint32_t t = out_targets_[out_base(v) + j];
        if (alive_[t]) {
          ++out;
          ++in_count[t];
        }
      }
      if (out != out_live_[v]) err << "node " << v << " out-degree mismatch; ";
      edges += out;
    }
    for (std::uint32_t v : live_) {
      in_sum += in_[v];
      if (in_count[v] != in_[v]) err << "node " << v << " in-degree mismatch; ";
      if (kstar_[v] < in_[v]) err << "node " << v << " k* < k; ";
      const double w = weight_of(v);
      const double got = sampler_.weight(slot_[v]);
      if (std::abs(got - w) > 1e-12 * std::max(1.0, w)) err << "node " << v << " kernel weight mismatch; ";
    }
    if (in_sum != edges) err << "sum of in-degrees " << in_sum << " != edges " << edges << "; ";
    return err.str();
  }

 private:
  std::size_t out_base(std::uint32_t v) const { return static_cast<std::size_t>(v) * params_.m; }

  double weight_of(std::uint32_t v) const {
    const double degree = params_.kernel == KernelMode::Degree ? static_cast<double>(in_[v]) + out_live_[v]
                                                               : static_cast<double>(in_[v]) + params_.offset();
    return fitness_[v] * degree;
  }

  std::uint32_t add_node(double eta) {
    if (fitness_.size() >= std::numeric_limits<std::uint32_t>::max()) throw ParameterError("node id space exhausted");
    const auto v = static_cast<std::uint32_t>(fitness_.size());
    fitness_.push_back(eta);
    birth_.push_back(t_);
    in_.push_back(0);
    out_live_.push_back(0);
    out_count_.push_back(0);
    kstar_.push_back(0);
    alive_.push_back(0);
    slot_.push_back(0);
    live_pos_.push_back(0);
    in_lists_.emplace_back();
    out_targets_.resize(out_targets_.size() + params_.m);
    return v;
  }

  void link(std::uint32_t src, std::uint32_t dst) {
    out_targets_[out_base(src) + out_count_[src]++] = dst;
    ++out_live_[src];
    ++in_[dst];
    ++kstar_[dst];
    in_lists_[dst].push_back(src);
  }

  void activate(std::uint32_t v) {
    alive_[v] = 1;
    live_pos_[v] = static_cast<std::uint32_t>(live_.size());
    live_.push_back(v);
    slot_[v] = sampler_.insert(weight_of(v));
    if (slot_[v] >= node_of_slot_.size()) node_of_slot_.resize(slot_[v] + 1);
    node_of_slot_[slot_[v]] = v;
  }

  void refresh(std::uint32_t v) { sampler_.update(slot_[v], weight_of(v)); }

  void remove_node(std::uint32_t victim) {
    alive_[victim] = 0;
    const std::size_t base = out_base(victim);
    for (std::uint32_t j = 0; j < out_count_[victim]; ++j) {
      const std::uint32_t t = out_targets_[base + j];
      if (alive_[t]) {
        --in_[t];
        refresh(t);
      }
    }
    // a source that is still alive still holds its edge to the victim
    for (std::uint32_t s : in_lists_[victim]) {
      if (alive_[s]) {
        --out_live_[s];
        if (params_.kernel == KernelMode::Degree) refresh(s);
      }
    }
    std::vector<std::uint32_t>().swap(in_lists_[victim]);
    sampler_.remove(slot_[victim]);

    const std::uint32_t pos = live_pos_[victim];
    live_[pos] = live_.back();
    live_pos_[live_[pos]] = pos;
    live_.pop_back();

    ++current_.deleted;
    if (birth_[victim] > last_snapshot_step_) ++current_.ephemeral;
    if (record_deletions_) deletions_.push_back({victim, t_, birth_[victim], in_[victim], out_live_[victim]});
  }

  ModelParams params_;
  Rng rng_;
  std::uint64_t t_ = 0;
  std::uint64_t last_snapshot_step_ = 0;

  std::vector<double> fitness_;
  std::vector<std::uint64_t> birth_;
  std::vector<std::uint32_t> in_;
  std::vector<std::uint32_t> out_live_;
  std::vector<std::uint32_t> out_count_;
  std::vector<std::uint32_t> kstar_;
  std::vector<std::uint8_t> alive_;
  std::vector<std::uint32_t> slot_;
  std::vector<std::uint32_t> live_pos_;
  std::vector<std::uint32_t> out_targets_;  // m entries per node
  std::vector<std::vector<std::uint32_t>> in_lists_;  // sources ever; dead ones skipped lazily
  std::vector<std::uint32_t> live_;
  std::vector<std::uint32_t> node_of_slot_;
  WeightedIndex sampler_;
  std::vector<std::uint32_t> chosen_;

  IntervalCounts current_;
  std::vector<IntervalCounts> intervals_;
  bool record_deletions_ = false;
  std::vector<DeletionRecord> deletions_;
};

struct RunResult {
  SnapshotSeries series;
  std::vector<NodeRecord> ground_truth;
  std::vector<IntervalCounts> intervals;
};

/// Runs the process and keeps every snapshot in memory.
inline RunResult run_in_memory(const ModelParams& params) {
  validate(params);
  Simulator sim(params);
  std::vector<Snapshot> snaps;
  const std::uint64_t emissions = params.total_steps / params.snapshot_interval;
  for (std::uint64_t e = 0; e < emissions; ++e) {
    sim.run_steps(params.snapshot_interval);
    snaps.push_back(sim.snapshot());
  }
  sim.run_steps(params.total_steps - emissions * params.snapshot_interval);
  RunResult out;
  out.series = SnapshotSeries::from_snapshots(std::move(snaps));
  out.ground_truth = sim.nodes();
  out.intervals = sim.intervals();
  return out;
}

inline nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["m"] = p.m;
  j["c"] = p.c;
  j["fitness"] = fitness_name(p.fitness_dist);
  if (const auto* te = std::get_if<fitness::TruncatedExponential>(&p.fitness_dist)) j["lambda"] = te->lambda;
  j["eta_max"] = max_fitness(p.fitness_dist);
  if (!p.fitness_file.empty()) j["fitness_file"] = p.fitness_file;
  j["steps"] = p.total_steps;
  j["snapshot_interval"] = p.snapshot_interval;
  j["seed"] = p.seed;
  j["kernel"] = p.kernel == KernelMode::Degree ? "degree" : "offset";
  j["kernel_offset"] = p.offset();
  return j;
}

inline void write_ground_truth(const std::filesystem::path& path, const std::vector<NodeRecord>& nodes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "id\tbirth_step\tfitness\n";
  out.precision(17);
  for (const auto& n : nodes) out << n.id << '\t' << n.birth_step << '\t' << n.fitness << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

/// Reads a `id, birth_step, fitness` table written by write_ground_truth.
/// Only id, birth_step and fitness are filled in.
inline std::vector<NodeRecord> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("id\tbirth_step\tfitness", 0) != 0)
    throw FormatError(path.string() + ": expected header id<TAB>birth_step<TAB>fitness");
  std::vector<NodeRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    NodeRecord r;
    if (!(row >> r.id >> r.birth_step >> r.fitness))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    out.push_back(r);
  }
  return out;
}

struct DiskRunSummary {
  std::size_t snapshots = 0;
  std::vector<IntervalCounts> intervals;
};

/// Runs the process, writing `snapshot_<index>.tsv`, `manifest.json` and
/// `ground_truth.tsv` into `out_dir`. On an I/O failure a `PARTIAL` marker
/// is left in the directory and the error is rethrown.
inline DiskRunSummary run_to_directory(const ModelParams& params, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  validate(params);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  fs::remove(out_dir / "PARTIAL", ec);

  Simulator sim(params);
  nlohmann::json manifest;
  manifest["format"] = "fitnet-snapshots/1";
  manifest["id_mode"] = "integer";
  manifest["seed"] = params.seed;
  manifest["params"] = params_to_json(params);
  manifest["snapshots"] = nlohmann::json::array();

  DiskRunSummary summary;
  try {
    const std::uint64_t emissions = params.total_steps / params.snapshot_interval;
    for (std::uint64_t e = 1; e <= emissions; ++e) {
      sim.run_steps(params.snapshot_interval);
      const Snapshot snap = sim.snapshot();
      const auto& iv = sim.intervals().back();
      const std::string file = snapshot_file_name(e);
      write_snapshot(out_dir / file, snap);
      manifest["snapshots"].push_back({{"index", e},
                                       {"file", file},
                                       {"step", snap.step},
                                       {"edges", snap.edges.size()},
                                       {"isolated", snap.isolated.size()},
                                       {"live_nodes", sim.live_count()},
                                       {"inserted", iv.inserted},
                                       {"deleted", iv.deleted},
                                       {"ephemeral", iv.ephemeral},
                                       {"truncated_links", iv.truncated_links},
                                       {"dropped_links", iv.dropped_links},
                                       {"uniform_fallbacks", iv.uniform_fallbacks}});
    }
    sim.run_steps(params.total_steps - emissions * params.snapshot_interval);
    write_ground_truth(out_dir / "ground_truth.tsv", sim.nodes());
    manifest["final_step"] = sim.time();
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << '\n';
    if (!mf) throw IoError("cannot write manifest.json");
    summary.snapshots = emissions;
    summary.intervals = sim.intervals();
  } catch (const Error& e) {
    std::ofstream marker(out_dir / "PARTIAL");
    marker << e.what() << '\n';
    throw;
  }
  return summary;
}

}  // namespace fitnet
