#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fitnet/errors.hpp"
#include "fitnet/parallel.hpp"

namespace fitnet {

using NodeId = std::uint64_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One observation of the graph. Edges are directed src -> dst and unique;
/// `isolated` lists nodes that are present but have no edges.
struct Snapshot {
  std::uint64_t step = 0;
  std::vector<Edge> edges;
  std::vector<NodeId> isolated;

  void normalize() {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::sort(isolated.begin(), isolated.end());
    isolated.erase(std::unique(isolated.begin(), isolated.end()), isolated.end());
  }

  /// Sorted ids of every node present in the snapshot.
  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out;
    out.reserve(2 * edges.size() + isolated.size());
    for (const auto& e : edges) {
      out.push_back(e.src);
      out.push_back(e.dst);
    }
    out.insert(out.end(), isolated.begin(), isolated.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

enum class IdMode {
  Integer,  // tokens are decimal 64-bit ids
  Hashed,   // tokens are opaque strings hashed to 64 bits
};

inline std::string snapshot_file_name(std::uint64_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "snapshot_" + digits + ".tsv";
}

/// Writes `src<TAB>dst` lines followed by one line per isolated node.
inline void write_snapshot(const std::filesystem::path& path, const Snapshot& snap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::string buf;
  buf.reserve(1 << 16);
  char num[24];
  auto put = [&](NodeId v) {
    const auto res = std::to_chars(num, num + sizeof num, v);
    buf.append(num, res.ptr);
  };
  for (const auto& e : snap.edges) {
    put(e.src);
    buf.push_back('\t');
    put(e.dst);
    buf.push_back('\n');
    if (buf.size() > (1 << 16) - 64) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  for (NodeId v : snap.isolated) {
    put(v);
    buf.push_back('\n');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// 64-bit FNV-1a.
inline NodeId hash_id(std::string_view token) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : token) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ParsedSnapshot {
  Snapshot snapshot;
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::unordered_map<NodeId, std::string> names;  // Hashed mode only
};

namespace detail {

inline void split_tabs(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
}

}  // namespace detail

inline ParsedSnapshot parse_snapshot(const std::filesystem::path& path, IdMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ParsedSnapshot out;
  std::string line;
  std::vector<std::string_view> fields;

  auto to_id = [&](std::string_view token, NodeId& id) -> bool {
    if (token.empty()) return false;
    if (mode == IdMode::Integer) {
      const auto res = std::from_chars(token.data(), token.data() + token.size(), id);
      return res.ec == std::errc() && res.ptr == token.data() + token.size();
    }
    id = hash_id(token);
    auto [it, inserted] = out.names.try_emplace(id, token);
    if (!inserted && it->second != token)
      throw FormatError("id hash collision between '" + it->second + "' and '" + std::string(token) + "'");
    return true;
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++out.lines;
    detail::split_tabs(line, fields);
    NodeId a = 0;
    NodeId b = 0;
    if (fields.size() == 1 && to_id(fields[0], a)) {
      out.snapshot.isolated.push_back(a);
    } else if (fields.size() == 2 && to_id(fields[0], a) && to_id(fields[1], b)) {
      out.snapshot.edges.push_back({a, b});
    } else {
      ++out.malformed;
    }
  }
  out.snapshot.normalize();
  // isolated declarations for nodes that do have edges are redundant
  if (!out.snapshot.isolated.empty()) {
    std::vector<NodeId> touched;
    for (const auto& e : out.snapshot.edges) {
      touched.push_back(e.src);
      touched.push_back(e.dst);
    }
    std::sort(touched.begin(), touched.end());
    std::erase_if(out.snapshot.isolated,
                  [&](NodeId v) { return std::binary_search(touched.begin(), touched.end(), v); });
  }
  return out;
}

struct SnapshotDescriptor {
  std::uint64_t index = 0;      // file index or emission number
  std::uint64_t timestamp = 0;  // simulation step, or index for external data
  std::size_t edge_count = 0;
  std::size_t node_count = 0;
  std::string path;  // empty for in-memory snapshots
};

/// Presence window of a node, as 1-based snapshot ordinals.
struct NodeSpan {
  NodeId id = 0;
  std::uint32_t first = 0;
  std::uint32_t last = 0;
};

struct ReadOptions {
  std::optional<IdMode> id_mode;  // default: manifest's id_mode, else Hashed
  double malformed_threshold = 1e-3;
  bool keep_in_memory = true;
};

/// Ordered snapshots plus first/last-seen bookkeeping. Positions in the
/// series are exposed as 1-based ordinals, which double as the time axis for
/// growth fits.
class SnapshotSeries {
 public:
  SnapshotSeries() = default;

  static SnapshotSeries from_snapshots(std::vector<Snapshot> snaps) {
    SnapshotSeries s;
    s.id_mode_ = IdMode::Integer;
    std::uint64_t index = 0;
    for (auto& snap : snaps) {
      snap.normalize();
      SnapshotDescriptor d;
      d.index = ++index;
      d.timestamp = snap.step;
      d.edge_count = snap.edges.size();
      s.descriptors_.push_back(d);
      s.memory_.push_back(std::make_shared<const Snapshot>(std::move(snap)));
    }
    s.finish_index();
    return s;
  }

  std::size_t size() const { return descriptors_.size(); }
  const SnapshotDescriptor& descriptor(std::uint32_t ordinal) const { return descriptors_.at(ordinal - 1); }
  const std::vector<SnapshotDescriptor>& descriptors() const { return descriptors_; }
  IdMode id_mode() const { return id_mode_; }

  std::shared_ptr<const Snapshot> load(std::uint32_t ordinal) const {
    if (ordinal == 0 || ordinal > size()) throw SeriesError("snapshot ordinal out of range");
    if (!memory_.empty()) return memory_[ordinal - 1];
    auto parsed = parse_snapshot(descriptors_[ordinal - 1].path, id_mode_);
    parsed.snapshot.step = descriptors_[ordinal - 1].timestamp;
    return std::make_shared<const Snapshot>(std::move(parsed.snapshot));
  }

  /// Sorted by id.
  const std::vector<NodeSpan>& spans() const { return spans_; }

  const NodeSpan* find(NodeId id) const {
    auto it = std::lower_bound(spans_.begin(), spans_.end(), id, [](const NodeSpan& s, NodeId v) { return s.id < v; });
    return it != spans_.end() && it->id == id ? &*it : nullptr;
  }

  std::size_t total_lines() const { return total_lines_; }
  std::size_t malformed_lines() const { return malformed_lines_; }

  /// Original string for a hashed id, if known.
  std::optional<std::string> name_of(NodeId id) const {
    auto it = names_.find(id);
    if (it == names_.end()) return std::nullopt;
    return it->second;
  }

  std::string label(NodeId id) const {
    if (auto n = name_of(id)) return *n;
    return std::to_string(id);
  }

 private:
  friend SnapshotSeries read_series(const std::filesystem::path&, const ReadOptions&);

  void finish_index() {
    std::unordered_map<NodeId, std::pair<std::uint32_t, std::uint32_t>> seen;
    for (std::uint32_t ord = 1; ord <= size(); ++ord) {
      const auto snap = load(ord);
      const auto nodes = snap->nodes();
      descriptors_[ord - 1].node_count = nodes.size();
      for (NodeId v : nodes) {
        auto [it, inserted] = seen.try_emplace(v, ord, ord);
        if (!inserted) it->second.second = ord;
      }
    }
    spans_.clear();
    spans_.reserve(seen.size());
    for (const auto& [id, fl] : seen) spans_.push_back({id, fl.first, fl.second});
    std::sort(spans_.begin(), spans_.end(), [](const NodeSpan& a, const NodeSpan& b) { return a.id < b.id; });
  }

  std::vector<SnapshotDescriptor> descriptors_;
  std::vector<std::shared_ptr<const Snapshot>> memory_;
  std::vector<NodeSpan> spans_;
  std::unordered_map<NodeId, std::string> names_;
  IdMode id_mode_ = IdMode::Hashed;
  std::size_t total_lines_ = 0;
  std::size_t malformed_lines_ = 0;
};

/// Loads every `snapshot_<index>.tsv` in `dir`. A `manifest.json` next to
/// them, when present, supplies the id mode and per-snapshot timestamps.
inline SnapshotSeries read_series(const std::filesystem::path& dir, const ReadOptions& options = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw SeriesError("not a directory: " + dir.string());

  static const std::regex pattern(R"(snapshot_(\d+)\.tsv)");
  std::vector<std::pair<std::uint64_t, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, match, pattern)) files.emplace_back(std::stoull(match[1].str()), entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw SeriesError("need at least 2 snapshot files in " + dir.string());
  for (std::size_t i = 1; i < files.size(); ++i)
    if (files[i].first == files[i - 1].first) throw SeriesError("duplicate snapshot index " + std::to_string(files[i].first));

  IdMode mode = IdMode::Hashed;
  std::unordered_map<std::uint64_t, std::uint64_t> timestamps;
  if (const auto manifest = dir / "manifest.json"; fs::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad manifest.json: " + std::string(e.what()));
    }
    if (j.value("id_mode", std::string("hashed")) == "integer") mode = IdMode::Integer;
    if (j.contains("snapshots"))
      for (const auto& s : j["snapshots"]) timestamps[s.at("index").get<std::uint64_t>()] = s.at("step").get<std::uint64_t>();
  }
  if (options.id_mode) mode = *options.id_mode;

  std::vector<ParsedSnapshot> parsed(files.size());
  parallel_for(files.size(), [&](std::size_t i) { parsed[i] = parse_snapshot(files[i].second, mode); });

  SnapshotSeries s;
  s.id_mode_ = mode;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& p = parsed[i];
    s.total_lines_ += p.lines;
    s.malformed_lines_ += p.malformed;
    for (auto& [id, name] : p.names) {
      auto it = s.names_.find(id);
      if (it == s.names_.end())
        s.names_.emplace(id, std::move(name));
      else if (it->second != name)
        throw FormatError("id hash collision between '" + it->second + "' and '" + name + "'");
    }
    p.names.clear();
    SnapshotDescriptor d;
    d.index = files[i].first;
    auto ts = timestamps.find(d.index);
    d.timestamp = ts != timestamps.end() ? ts->second : d.index;
    d.edge_count = p.snapshot.edges.size();
    d.path = files[i].second.string();
    p.snapshot.step = d.timestamp;
    s.descriptors_.push_back(std::move(d));
  }
  if (s.total_lines_ > 0 &&
      static_cast<double>(s.malformed_lines_) > options.malformed_threshold * static_cast<double>(s.total_lines_))
    throw FormatError(std::to_string(s.malformed_lines_) + " malformed lines out of " + std::to_string(s.total_lines_));

  for (auto& p : parsed) s.memory_.push_back(std::make_shared<const Snapshot>(std::move(p.snapshot)));
  s.finish_index();
  if (!options.keep_in_memory) s.memory_.clear();
  return s;
}

/// Per-node accumulated in-degree k*: the number of distinct in-neighbours
/// observed in any snapshot up to and including each ordinal. Each node's
/// values run from its first-seen to its last-seen ordinal.
class AccumulatedSeries {
 public:
  struct View {
    NodeId id = 0;
    std::uint32_t first = 0;
    std::span<const std::uint32_t> kstar;

    std::uint32_t last() const { return first + static_cast<std::uint32_t>(kstar.size()) - 1; }
    std::uint32_t at(std::uint32_t ordinal) const { return kstar[ordinal - first]; }
    std::uint32_t final_value() const { return kstar.back(); }
  };

  std::size_t size() const { return ids_.size(); }

  View view(std::size_t i) const {
    return {ids_[i], first_[i],
            std::span<const std::uint32_t>(values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i])};
  }

  std::optional<View> find(NodeId id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return std::nullopt;
    return view(static_cast<std::size_t>(it - ids_.begin()));
  }

  const std::vector<NodeId>& ids() const { return ids_; }

 private:
  friend struct AccumulateBuilder;
  std::vector<NodeId> ids_;
  std::vector<std::uint32_t> first_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> values_;
};

struct AccumulateOptions {
  // Working-set cap for the distinct (dst, src) pair table. Above it the
  // edges are partitioned by destination into spill files and processed one
  // partition at a time.
  std::size_t memory_budget_bytes = std::size_t{1} << 31;
  std::filesystem::path spill_dir;  // default: system temp directory
};

struct AccumulateBuilder {
  using Pair = std::pair<NodeId, NodeId>;  // (dst, src)

  const SnapshotSeries& series;
  AccumulatedSeries out;
  bool spilled = false;

  explicit AccumulateBuilder(const SnapshotSeries& s) : series(s) {
    const auto& spans = series.spans();
    out.ids_.reserve(spans.size());
    out.first_.reserve(spans.size());
    out.offsets_.reserve(spans.size() + 1);
    out.offsets_.push_back(0);
    for (const auto& sp : spans) {
      out.ids_.push_back(sp.id);
      out.first_.push_back(sp.first);
      out.offsets_.push_back(out.offsets_.back() + (sp.last - sp.first + 1));
    }
    out.values_.assign(out.offsets_.back(), 0);
  }

  std::size_t index_of(NodeId id) const {
    auto it = std::lower_bound(out.ids_.begin(), out.ids_.end(), id);
    return static_cast<std::size_t>(it - out.ids_.begin());
  }

  // Merges the sorted unique pairs of one snapshot into `seen`, crediting
  // each never-before-seen pair to its destination at `ordinal`.
  void absorb(std::vector<Pair>& cur, std::vector<Pair>& seen, std::uint32_t ordinal) {
    std::sort(cur.begin(), cur.end());
    cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
    std::vector<Pair> merged;
    merged.reserve(seen.size() + cur.size());
    auto a = seen.begin();
    auto b = cur.begin();
    while (a != seen.end() || b != cur.end()) {
      if (b == cur.end() || (a != seen.end() && *a < *b)) {
        merged.push_back(*a++);
      } else {
        if (a != seen.end() && *a == *b) {
          ++a;
        } else {
          const std::size_t i = index_of(b->first);
          ++out.values_[out.offsets_[i] + (ordinal - out.first_[i])];
        }
        merged.push_back(*b++);
      }
    }
    seen.swap(merged);
  }

  void prefix_sums() {
    for (std::size_t i = 0; i < out.ids_.size(); ++i)
      for (std::size_t j = out.offsets_[i] + 1; j < out.offsets_[i + 1]; ++j) out.values_[j] += out.values_[j - 1];
  }

  void run_in_memory() {
    std::vector<Pair> seen;
    for (std::uint32_t ord = 1; ord <= series.size(); ++ord) {
      const auto snap = series.load(ord);
      std::vector<Pair> cur;
      cur.reserve(snap->edges.size());
      for (const auto& e : snap->edges) cur.emplace_back(e.dst, e.src);
      absorb(cur, seen, ord);
    }
    prefix_sums();
  }

  void run_spilled(std::size_t buckets, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    spilled = true;
    fs::create_directories(dir);
    auto bucket_path = [&](std::size_t b, std::uint32_t ord) {
      return dir / ("bucket_" + std::to_string(b) + "_" + std::to_string(ord) + ".bin");
    };
    for (std::uint32_t ord = 1; ord <= series.size(); ++ord) {
      const auto snap = series.load(ord);
      std::vector<std::ofstream> files;
      for (std::size_t b = 0; b < buckets; ++b) {
        files.emplace_back(bucket_path(b, ord), std::ios::binary);
        if (!files.back()) throw IoError("cannot create spill file in " + dir.string());
      }
      for (const auto& e : snap->edges) {
        const Pair p{e.dst, e.src};
        files[hash_bucket(e.dst, buckets)].write(reinterpret_cast<const char*>(&p), sizeof p);
      }
      for (auto& f : files)
        if (!f.flush()) throw IoError("spill write failed in " + dir.string());
    }
    for (std::size_t b = 0; b < buckets; ++b) {
      std::vector<Pair> seen;
      for (std::uint32_t ord = 1; ord <= series.size(); ++ord) {
        const auto path = bucket_path(b, ord);
        std::vector<Pair> cur(fs::file_size(path) / sizeof(Pair));
        std::ifstream in(path, std::ios::binary);
        in.read(reinterpret_cast<char*>(cur.data()), static_cast<std::streamsize>(cur.size() * sizeof(Pair)));
        absorb(cur, seen, ord);
        in.close();
        fs::remove(path);
      }
    }
    std::error_code ec;
    fs::remove(dir, ec);
    prefix_sums();
  }

  static std::size_t hash_bucket(NodeId id, std::size_t buckets) {
    std::uint64_t z = id + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return static_cast<std::size_t>((z ^ (z >> 31)) % buckets);
  }
};

inline AccumulatedSeries accumulate(const SnapshotSeries& series, const AccumulateOptions& options = {},
                                    bool* spilled = nullptr) {
  AccumulateBuilder builder(series);
  std::size_t total_edges = 0;
  for (const auto& d : series.descriptors()) total_edges += d.edge_count;
  // seen-table plus one snapshot's worth of working pairs
  const std::size_t estimate = 2 * total_edges * sizeof(AccumulateBuilder::Pair);
  if (estimate <= options.memory_budget_bytes) {
    builder.run_in_memory();
  } else {
    const std::size_t buckets = std::max<std::size_t>(2, (estimate + options.memory_budget_bytes - 1) /
                                                             std::max<std::size_t>(options.memory_budget_bytes, 1));
    auto dir = options.spill_dir.empty() ? std::filesystem::temp_directory_path() : options.spill_dir;
    dir /= "fitnet_spill_" + std::to_string(reinterpret_cast<std::uintptr_t>(&builder));
    builder.run_spilled(buckets, dir);
  }
  if (spilled) *spilled = builder.spilled;
  return std::move(builder.out);
}

struct Transition {
  std::uint32_t ordinal = 0;  // the later snapshot of the pair
  std::uint64_t inserted = 0;
  std::uint64_t removed = 0;
};

struct TurnoverStats {
  std::vector<Transition> transitions;
  std::uint64_t total_inserted = 0;
  std::uint64_t total_removed = 0;
  double c_estimate = 0.0;  // removed per inserted; 0 when nothing was inserted
};

/// Inserted at t: first seen at t. Removed at t: last seen at t-1.
inline TurnoverStats turnover(const SnapshotSeries& series) {
  TurnoverStats out;
  const auto n = static_cast<std::uint32_t>(series.size());
  std::vector<std::uint64_t> first_count(n + 2, 0);
  std::vector<std::uint64_t> last_count(n + 2, 0);
  for (const auto& sp : series.spans()) {
    ++first_count[sp.first];
    ++last_count[sp.last];
  }
  for (std::uint32_t t = 2; t <= n; ++t) {
    Transition tr{t, first_count[t], last_count[t - 1]};
    out.total_inserted += tr.inserted;
    out.total_removed += tr.removed;
    out.transitions.push_back(tr);
  }
  if (out.total_inserted > 0)
    out.c_estimate = static_cast<double>(out.total_removed) / static_cast<double>(out.total_inserted);
  return out;
}

/// (id, in-degree) for every node present in the snapshot, sorted by id.
inline std::vector<std::pair<NodeId, std::uint32_t>> in_degrees(const Snapshot& snap) {
  std::vector<std::pair<NodeId, std::uint32_t>> out;
  for (NodeId v : snap.nodes()) out.emplace_back(v, 0);
  auto slot = [&](NodeId v) {
    return std::lower_bound(out.begin(), out.end(), v, [](const auto& p, NodeId x) { return p.first < x; });
  };
  for (const auto& e : snap.edges) ++slot(e.dst)->second;
  return out;
}

/// (id, in-degree at `measure`) for nodes first seen at `birth` and present
/// in snapshot `measure`.
inline std::vector<std::pair<NodeId, std::uint32_t>> cohort_members(const SnapshotSeries& series, std::uint32_t birth,
                                                                   std::uint32_t measure) {
  if (!(birth >= 1 && birth < measure && measure <= series.size()))
    throw SeriesError("cohort needs 1 <= birth < measure <= series length");
  std::vector<std::pair<NodeId, std::uint32_t>> out;
  for (const auto& [id, k] : in_degrees(*series.load(measure))) {
    const NodeSpan* sp = series.find(id);
    if (sp && sp->first == birth) out.emplace_back(id, k);
  }
  return out;
}

inline std::vector<std::uint32_t> cohort(const SnapshotSeries& series, std::uint32_t birth, std::uint32_t measure) {
  std::vector<std::uint32_t> out;
  for (const auto& [id, k] : cohort_members(series, birth, measure)) out.push_back(k);
  return out;
}

}  // namespace fitnet
