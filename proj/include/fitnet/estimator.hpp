#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fitnet/errors.hpp"
#include "fitnet/parallel.hpp"
#include "fitnet/snapshot.hpp"
#include "fitnet/stats.hpp"

namespace fitnet {

enum class ZeroGrowthRule {
  // k* strictly increases on at most two snapshot-to-snapshot transitions
  IncreaseEvents,
  // final k* is at most twice the first positive k*
  GrowthFactor,
};

struct GrowthFitOptions {
  ZeroGrowthRule rule = ZeroGrowthRule::IncreaseEvents;
};

struct GrowthFit {
  NodeId id = 0;
  double beta = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
  std::uint32_t points_used = 0;
  bool zero_growth = false;
};

namespace detail {

inline bool is_zero_growth(std::span<const double> kstar, ZeroGrowthRule rule) {
  if (rule == ZeroGrowthRule::IncreaseEvents) {
    int increases = 0;
    for (std::size_t i = 1; i < kstar.size(); ++i)
      if (kstar[i] > kstar[i - 1]) ++increases;
    return increases <= 2;
  }
  auto first = std::find_if(kstar.begin(), kstar.end(), [](double v) { return v > 0.0; });
  if (first == kstar.end()) return true;
  return kstar.back() <= 2.0 * *first;
}

}  // namespace detail

/// Least-squares slope of log k* against log t over the points with k* >= 1.
/// The slope estimates the node's growth exponent; nodes caught by the
/// zero-growth rule report beta = 0.
inline GrowthFit fit_growth(std::span<const double> times, std::span<const double> kstar, NodeId id = 0,
                            const GrowthFitOptions& options = {}) {
  if (times.size() != kstar.size()) throw ParameterError("fit_growth: times and k* differ in length");
  if (times.size() < 2) throw SeriesError("fit_growth needs at least 2 snapshots");
  GrowthFit fit;
  fit.id = id;
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (kstar[i] >= 1.0) {
      if (!(times[i] > 0.0)) throw ParameterError("fit_growth: times must be positive");
      x.push_back(std::log(times[i]));
      y.push_back(std::log(kstar[i]));
    }
  }
  fit.points_used = static_cast<std::uint32_t>(x.size());
  if (x.size() < 2 || detail::is_zero_growth(kstar, options.rule)) {
    fit.zero_growth = true;
    return fit;
  }
  const auto lf = stats::linear_fit(x, y);
  fit.beta = lf.slope;
  fit.intercept = lf.intercept;
  fit.pearson_r = lf.r;
  return fit;
}

/// Fit of one node's accumulated series, with its snapshot ordinal as time
/// unless `times` (indexed by ordinal - 1) is given.
inline GrowthFit fit_growth(const AccumulatedSeries::View& node, const GrowthFitOptions& options = {},
                            std::span<const double> times = {}) {
  std::vector<double> t(node.kstar.size());
  std::vector<double> k(node.kstar.size());
  for (std::size_t i = 0; i < node.kstar.size(); ++i) {
    const std::size_t ordinal = node.first + i;
    t[i] = times.empty() ? static_cast<double>(ordinal) : times[ordinal - 1];
    k[i] = node.kstar[i];
  }
  return fit_growth(t, k, node.id, options);
}

/// Fits every node with at least two snapshots, in parallel; the result is
/// ordered by node id.
inline std::vector<GrowthFit> fit_all(const AccumulatedSeries& acc, const GrowthFitOptions& options = {},
                                      std::span<const double> times = {}) {
  std::vector<std::optional<GrowthFit>> slots(acc.size());
  parallel_for(acc.size(), [&](std::size_t i) {
    const auto view = acc.view(i);
    if (view.kstar.size() >= 2) slots[i] = fit_growth(view, options, times);
  });
  std::vector<GrowthFit> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  return out;
}

/// Fits against node-local age: time at ordinal t is timestamps[t - 1] -
/// birth + 1. Nodes without a known birth are left out.
inline std::vector<GrowthFit> fit_all_by_age(const AccumulatedSeries& acc, std::span<const double> timestamps,
                                             const std::unordered_map<NodeId, double>& birth,
                                             const GrowthFitOptions& options = {}) {
  std::vector<std::optional<GrowthFit>> slots(acc.size());
  parallel_for(acc.size(), [&](std::size_t i) {
    const auto view = acc.view(i);
    auto b = birth.find(view.id);
    if (view.kstar.size() < 2 || b == birth.end()) return;
    std::vector<double> t(view.kstar.size());
    std::vector<double> k(view.kstar.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = timestamps[view.first + j - 1] - b->second + 1.0;
      k[j] = view.kstar[j];
    }
    slots[i] = fit_growth(t, k, view.id, options);
  });
  std::vector<GrowthFit> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  return out;
}

/// Non-zero-growth fits whose correlation reaches the threshold.
inline std::vector<GrowthFit> measurable(std::span<const GrowthFit> fits, double r_threshold) {
  if (!(r_threshold >= 0.0 && r_threshold <= 1.0)) throw ParameterError("r threshold must lie in [0, 1]");
  std::vector<GrowthFit> out;
  for (const auto& f : fits)
    if (!f.zero_growth && f.pearson_r >= r_threshold) out.push_back(f);
  return out;
}

inline double nonzero_growth_fraction(std::span<const GrowthFit> fits) {
  if (fits.empty()) return 0.0;
  const auto n = std::count_if(fits.begin(), fits.end(), [](const GrowthFit& f) { return !f.zero_growth; });
  return static_cast<double>(n) / static_cast<double>(fits.size());
}

struct ExponentialFit {
  double lambda = 0.0;
  double beta_max = 0.0;
  double goodness = 0.0;  // R^2 of the log-density line
  std::size_t samples = 0;
  std::size_t bins_used = 0;
  double log10_slope = 0.0;  // slope on a log10-linear plot, -lambda * log10(e)
};

struct ExponentialFitOptions {
  std::size_t bins = 50;
  std::optional<double> beta_max;  // default: largest observed value
  std::size_t min_samples = 100;
};

/// Truncated-exponential fit: histogram on [0, beta_max], then OLS of the
/// log density against bin centre. Empty bins are left out.
inline ExponentialFit fit_exponential(std::span<const double> values, const ExponentialFitOptions& options = {}) {
  if (values.size() < options.min_samples)
    throw FitError("fit_exponential: need at least " + std::to_string(options.min_samples) + " samples, got " +
                   std::to_string(values.size()));
  if (options.bins < 2) throw ParameterError("fit_exponential: need at least 2 bins");
  const double top = options.beta_max.value_or(*std::max_element(values.begin(), values.end()));
  if (!(top > 0.0)) throw FitError("fit_exponential: no positive values");
  const double width = top / static_cast<double>(options.bins);
  std::vector<std::size_t> counts(options.bins, 0);
  std::size_t used = 0;
  for (double v : values) {
    if (v < 0.0 || v > top) continue;
    const auto b = std::min(options.bins - 1, static_cast<std::size_t>(v / width));
    ++counts[b];
    ++used;
  }
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t b = 0; b < options.bins; ++b) {
    if (counts[b] == 0) continue;
    x.push_back((static_cast<double>(b) + 0.5) * width);
    y.push_back(std::log(static_cast<double>(counts[b]) / (static_cast<double>(used) * width)));
  }
  if (x.size() < 2) throw FitError("fit_exponential: values are degenerate (fewer than 2 occupied bins)");
  const auto lf = stats::linear_fit(x, y);
  if (!(lf.slope < 0.0))
    throw FitError("fit_exponential: log-density slope " + std::to_string(lf.slope) + " is not negative over " +
                   std::to_string(x.size()) + " bins on [0, " + std::to_string(top) + "]");
  ExponentialFit out;
  out.lambda = -lf.slope;
  out.beta_max = top;
  out.goodness = lf.r_squared();
  out.samples = used;
  out.bins_used = x.size();
  out.log10_slope = lf.slope / std::log(10.0);
  return out;
}

enum class PowerLawMethod { DiscreteMle, CcdfOls };

struct PowerLawFit {
  double gamma = 0.0;  // value of the reported method
  double gamma_mle = 0.0;
  double gamma_ccdf = 0.0;
  double ccdf_r_squared = 0.0;
  double ks_distance = 0.0;  // tail sample against the fitted discrete law
  std::uint64_t k_min = 1;
  std::size_t tail_samples = 0;
  PowerLawMethod method = PowerLawMethod::DiscreteMle;
};

struct PowerLawFitOptions {
  std::uint64_t k_min = 10;
  std::size_t min_tail = 1000;
  PowerLawMethod report = PowerLawMethod::DiscreteMle;
  // choose k_min >= `k_min` minimising the KS distance of the MLE fit
  bool select_k_min = false;
};

namespace detail {

// Discrete power-law MLE: maximise -gamma * sum(ln k) - n ln zeta(gamma, k_min).
inline double power_law_mle(double mean_log, double k_min) {
  auto loglik = [&](double g) { return -g * mean_log - std::log(stats::hurwitz_zeta(g, k_min)); };
  double lo = 1.0 + 1e-6;
  double hi = 30.0;
  constexpr double phi = 0.6180339887498949;
  double a = hi - phi * (hi - lo);
  double b = lo + phi * (hi - lo);
  double fa = loglik(a);
  double fb = loglik(b);
  while (hi - lo > 1e-10) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = loglik(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = loglik(a);
    }
  }
  return 0.5 * (lo + hi);
}

// KS distance between a sorted tail and the discrete power law on k >= k_min
inline double power_law_ks(std::span<const std::uint64_t> tail, double gamma, std::uint64_t k_min) {
  const double z = stats::hurwitz_zeta(gamma, static_cast<double>(k_min));
  const auto n = static_cast<double>(tail.size());
  double upper = z;  // zeta(gamma, k), the unnormalised P(K >= k)
  double d = 0.0;
  std::size_t i = 0;
  for (std::uint64_t k = k_min; i < tail.size(); ++k) {
    upper -= std::pow(static_cast<double>(k), -gamma);
    while (i < tail.size() && tail[i] <= k) ++i;
    d = std::max(d, std::abs(static_cast<double>(i) / n - (1.0 - upper / z)));
    if (i < tail.size() && tail[i] > k + 1) {
      // jump over the gap; the empirical CDF is flat there, the model rises
      const std::uint64_t next = tail[i] - 1;
      d = std::max(d, std::abs(static_cast<double>(i) / n - (1.0 - upper / z)));
      upper = stats::hurwitz_zeta(gamma, static_cast<double>(next + 1));
      d = std::max(d, std::abs(static_cast<double>(i) / n - (1.0 - upper / z)));
      k = next;
    }
  }
  return d;
}

// Fit of an ascending tail whose elements are all >= k_min.
inline PowerLawFit fit_sorted_tail(std::span<const std::uint64_t> tail, std::uint64_t k_min, PowerLawMethod report) {
  PowerLawFit out;
  out.k_min = k_min;
  out.tail_samples = tail.size();
  out.method = report;

  double mean_log = 0.0;
  for (auto k : tail) mean_log += std::log(static_cast<double>(k));
  mean_log /= static_cast<double>(tail.size());
  out.gamma_mle = power_law_mle(mean_log, static_cast<double>(k_min));
  out.ks_distance = power_law_ks(tail, out.gamma_mle, k_min);

  // CCDF on a log-spaced grid of k, ignoring the sparse extreme tail
  const auto n = static_cast<double>(tail.size());
  std::vector<double> x;
  std::vector<double> y;
  std::uint64_t last_k = 0;
  for (int j = 0;; ++j) {
    const auto k = static_cast<std::uint64_t>(std::llround(static_cast<double>(k_min) * std::pow(10.0, j / 20.0)));
    if (k > tail.back()) break;
    if (k == last_k) continue;
    last_k = k;
    const auto above = static_cast<double>(tail.end() - std::lower_bound(tail.begin(), tail.end(), k));
    if (above < 10.0) break;
    x.push_back(std::log(static_cast<double>(k) - 0.5));
    y.push_back(std::log(above / n));
  }
  if (x.size() >= 2) {
    const auto lf = stats::linear_fit(x, y);
    out.gamma_ccdf = 1.0 - lf.slope;
    out.ccdf_r_squared = lf.r_squared();
  } else {
    out.gamma_ccdf = out.gamma_mle;
  }
  out.gamma = report == PowerLawMethod::DiscreteMle ? out.gamma_mle : out.gamma_ccdf;
  return out;
}

}  // namespace detail

/// Power-law tail fit of integer degrees over k >= k_min. Computes both
/// the discrete maximum-likelihood exponent and a least-squares fit of the
/// log complementary CDF. With `select_k_min`, every observed degree from
/// `k_min` up to the last one leaving `min_tail` samples is tried and the
/// fit with the smallest KS distance is kept.
template <typename Int>
PowerLawFit fit_power_law(std::span<const Int> degrees, const PowerLawFitOptions& options = {}) {
  if (options.k_min < 1) throw ParameterError("fit_power_law: k_min must be >= 1");
  std::vector<std::uint64_t> tail;
  for (Int d : degrees)
    if (d >= 0 && static_cast<std::uint64_t>(d) >= options.k_min) tail.push_back(static_cast<std::uint64_t>(d));
  if (tail.size() < options.min_tail || tail.empty())
    throw FitError("fit_power_law: only " + std::to_string(tail.size()) + " samples with k >= " +
                   std::to_string(options.k_min) + " (need " + std::to_string(options.min_tail) + ")");
  std::sort(tail.begin(), tail.end());
  if (tail.front() == tail.back()) throw FitError("fit_power_law: all tail samples are equal");
  const std::span<const std::uint64_t> all(tail);
  if (!options.select_k_min) return detail::fit_sorted_tail(all, options.k_min, options.report);

  std::optional<PowerLawFit> best;
  std::size_t i = 0;
  while (i < tail.size() && tail.size() - i >= std::max<std::size_t>(options.min_tail, 2)) {
    const auto sub = all.subspan(i);
    if (sub.front() == sub.back()) break;
    auto fit = detail::fit_sorted_tail(sub, sub.front(), options.report);
    if (!best || fit.ks_distance < best->ks_distance) best = fit;
    i = static_cast<std::size_t>(std::upper_bound(tail.begin(), tail.end(), sub.front()) - tail.begin());
  }
  if (!best) throw FitError("fit_power_law: no k_min candidate leaves a usable tail");
  return *best;
}

template <typename Int>
PowerLawFit fit_power_law(const std::vector<Int>& degrees, const PowerLawFitOptions& options = {}) {
  return fit_power_law(std::span<const Int>(degrees), options);
}

struct ExperienceBin {
  double k_lo = 0.0;  // inclusive
  double k_hi = 0.0;  // exclusive
  std::size_t count = 0;
  double mean_beta = 0.0;
  std::optional<ExponentialFit> distribution;  // when the bin has enough samples
};

struct ExperienceProfile {
  std::vector<ExperienceBin> bins;
  std::vector<std::pair<double, double>> skipped;  // empty bins [k_lo, k_hi)
  std::size_t zero_initial_degree = 0;             // fits without a log-binnable initial degree
};

/// Mean growth exponent per logarithmic bin of initial degree.
inline ExperienceProfile fitness_vs_experience(std::span<const GrowthFit> fits,
                                               std::span<const std::pair<NodeId, std::uint32_t>> initial_degrees,
                                               int bins_per_decade = 4, std::size_t min_fit_samples = 100) {
  if (bins_per_decade < 1) throw ParameterError("bins_per_decade must be >= 1");
  std::unordered_map<NodeId, std::uint32_t> k0;
  k0.reserve(initial_degrees.size());
  for (const auto& [id, k] : initial_degrees) k0[id] = k;

  ExperienceProfile out;
  std::vector<std::pair<double, double>> samples;  // (k0, beta)
  double k_top = 1.0;
  for (const auto& f : fits) {
    auto it = k0.find(f.id);
    if (it == k0.end() || it->second == 0) {
      ++out.zero_initial_degree;
      continue;
    }
    samples.emplace_back(it->second, f.beta);
    k_top = std::max(k_top, static_cast<double>(it->second));
  }
  const double step = std::pow(10.0, 1.0 / bins_per_decade);
  for (double lo = 1.0; lo <= k_top; lo *= step) {
    const double hi = lo * step;
    std::vector<double> betas;
    for (const auto& [k, b] : samples)
      if (k >= lo && k < hi) betas.push_back(b);
    if (betas.empty()) {
      out.skipped.emplace_back(lo, hi);
      continue;
    }
    ExperienceBin bin;
    bin.k_lo = lo;
    bin.k_hi = hi;
    bin.count = betas.size();
    double sum = 0.0;
    for (double b : betas) sum += b;
    bin.mean_beta = sum / static_cast<double>(betas.size());
    if (betas.size() >= min_fit_samples) {
      try {
        ExponentialFitOptions eo;
        eo.min_samples = min_fit_samples;
        bin.distribution = fit_exponential(betas, eo);
      } catch (const FitError&) {
      }
    }
    out.bins.push_back(std::move(bin));
  }
  return out;
}

/// Log-log slope of mean beta against bin centre over bins below k_limit.
inline std::optional<double> experience_decay_slope(const ExperienceProfile& profile, double k_limit = 100.0) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& b : profile.bins) {
    if (b.k_hi > k_limit * 1.0001 || !(b.mean_beta > 0.0)) continue;
    x.push_back(std::log(std::sqrt(b.k_lo * b.k_hi)));
    y.push_back(std::log(b.mean_beta));
  }
  if (x.size() < 2) return std::nullopt;
  return stats::linear_fit(x, y).slope;
}

}  // namespace fitnet
