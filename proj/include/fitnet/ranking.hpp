#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fitnet/errors.hpp"
#include "fitnet/estimator.hpp"
#include "fitnet/parallel.hpp"
#include "fitnet/snapshot.hpp"

namespace fitnet {

struct PageRankOptions {
  double damping = 0.85;
  double tolerance = 1e-10;  // L1 change between iterations
  int max_iterations = 1000;
};

/// Damped link-analysis scores of every node in the snapshot, sorted by id.
/// Out-link-free nodes spread their mass uniformly. Scores sum to 1.
inline std::vector<std::pair<NodeId, double>> base_scores(const Snapshot& snap, const PageRankOptions& opt = {}) {
  std::vector<NodeId> nodes = snap.nodes();
  if (nodes.empty()) throw EmptyError("base_scores: empty snapshot");
  const std::size_t n = nodes.size();
  auto index = [&](NodeId v) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
  };
  // distinct edges grouped by source
  std::vector<Edge> edges = snap.edges;
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<std::uint32_t> out_degree(n, 0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> links;
  links.reserve(edges.size());
  for (const auto& e : edges) {
    const auto s = static_cast<std::uint32_t>(index(e.src));
    links.emplace_back(s, static_cast<std::uint32_t>(index(e.dst)));
    ++out_degree[s];
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n);
  std::vector<double> next(n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (out_degree[i] == 0) dangling += rank[i];
    const double base = (1.0 - opt.damping) * inv_n + opt.damping * dangling * inv_n;
    std::fill(next.begin(), next.end(), base);
    for (const auto& [s, d] : links) next[d] += opt.damping * rank[s] / out_degree[s];
    double total = 0.0;
    for (double x : next) total += x;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      change += std::abs(next[i] - rank[i]);
    }
    rank.swap(next);
    if (change < opt.tolerance) {
      std::vector<std::pair<NodeId, double>> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = {nodes[i], rank[i]};
      return out;
    }
  }
  throw SolverError("base_scores: no convergence within " + std::to_string(opt.max_iterations) + " iterations");
}

struct RankRow {
  NodeId id = 0;
  double base = 0.0;
  double fitness = 0.0;  // the value used, after flooring
  double boosted = 0.0;
  std::uint64_t rank_base = 0;  // 1 = best
  std::uint64_t rank_boosted = 0;
};

struct RankTable {
  std::vector<RankRow> rows;  // sorted by id
  double eta_floor = 0.0;
  std::size_t missing_fitness = 0;
};

namespace detail {

// 1-based ranks by descending score, ties by ascending id
inline std::vector<std::uint64_t> ranks_of(const std::vector<RankRow>& rows, double RankRow::*score) {
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].*score != rows[b].*score) return rows[a].*score > rows[b].*score;
    return rows[a].id < rows[b].id;
  });
  std::vector<std::uint64_t> rank(rows.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
  return rank;
}

}  // namespace detail

/// boosted = base * max(fitness, eta_floor)^alpha. The floor defaults to the
/// smallest positive estimate, or 1e-3 without one. Nodes lacking an
/// estimate get the floor and are counted.
inline RankTable boost(const std::vector<std::pair<NodeId, double>>& base,
                       const std::unordered_map<NodeId, double>& fitness, double alpha,
                       std::optional<double> eta_floor = std::nullopt) {
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be >= 0");
  RankTable table;
  if (eta_floor) {
    if (!(*eta_floor > 0.0)) throw ParameterError("eta_floor must be > 0");
    table.eta_floor = *eta_floor;
  } else {
    double smallest = 0.0;
    for (const auto& [id, f] : fitness)
      if (f > 0.0 && (smallest == 0.0 || f < smallest)) smallest = f;
    table.eta_floor = smallest > 0.0 ? smallest : 1e-3;
  }
  table.rows.resize(base.size());
  parallel_for(base.size(), [&](std::size_t i) {
    RankRow& row = table.rows[i];
    row.id = base[i].first;
    row.base = base[i].second;
    auto it = fitness.find(row.id);
    row.fitness = it == fitness.end() ? table.eta_floor : std::max(it->second, table.eta_floor);
    row.boosted = row.base * std::pow(row.fitness, alpha);
  });
  for (const auto& [id, s] : base) table.missing_fitness += fitness.count(id) ? 0 : 1;
  std::sort(table.rows.begin(), table.rows.end(), [](const RankRow& a, const RankRow& b) { return a.id < b.id; });
  const auto rb = detail::ranks_of(table.rows, &RankRow::base);
  const auto rs = detail::ranks_of(table.rows, &RankRow::boosted);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    table.rows[i].rank_base = rb[i];
    table.rows[i].rank_boosted = rs[i];
  }
  return table;
}

/// Fitness proxy per node: the fitted growth exponent, or eta = A (beta + c
/// / (1 - c)) when A and c are supplied.
inline std::unordered_map<NodeId, double> fitness_estimates(std::span<const GrowthFit> fits,
                                                           std::optional<std::pair<double, double>> A_and_c = {}) {
  std::unordered_map<NodeId, double> out;
  out.reserve(fits.size());
  for (const auto& f : fits) {
    double v = f.beta;
    if (A_and_c) v = A_and_c->first * (f.beta + A_and_c->second / (1.0 - A_and_c->second));
    out[f.id] = v;
  }
  return out;
}

}  // namespace fitnet
