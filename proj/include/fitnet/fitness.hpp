#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fitnet/errors.hpp"
#include "fitnet/rng.hpp"

namespace fitnet {

namespace fitness {

struct Delta {
  double eta0 = 1.0;
};

/// Exponential density restricted to [0, eta_max] and renormalised.
struct TruncatedExponential {
  double lambda = 1.0;
  double eta_max = 1.0;
};

struct Uniform {
  double eta_max = 1.0;
};

/// Resamples (with replacement) from a list of observed fitness values.
struct Empirical {
  std::vector<double> samples;
};

}  // namespace fitness

using FitnessDistribution =
    std::variant<fitness::Delta, fitness::TruncatedExponential, fitness::Uniform, fitness::Empirical>;

inline void validate(const FitnessDistribution& dist) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          if (!(d.eta0 >= 0.0) || !std::isfinite(d.eta0)) throw ParameterError("delta fitness must be >= 0");
        } else if constexpr (std::is_same_v<T, fitness::TruncatedExponential>) {
          if (!(d.lambda > 0.0) || !std::isfinite(d.lambda)) throw ParameterError("lambda must be > 0");
          if (!(d.eta_max > 0.0) || !std::isfinite(d.eta_max)) throw ParameterError("eta_max must be > 0");
        } else if constexpr (std::is_same_v<T, fitness::Uniform>) {
          if (!(d.eta_max > 0.0) || !std::isfinite(d.eta_max)) throw ParameterError("eta_max must be > 0");
        } else {
          if (d.samples.empty()) throw ParameterError("empirical fitness needs at least one sample");
          for (double x : d.samples)
            if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError("empirical fitness samples must be >= 0");
        }
      },
      dist);
}

inline bool is_discrete(const FitnessDistribution& dist) {
  return std::holds_alternative<fitness::Delta>(dist) || std::holds_alternative<fitness::Empirical>(dist);
}

/// Upper end of the support.
inline double max_fitness(const FitnessDistribution& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          return d.eta0;
        } else if constexpr (std::is_same_v<T, fitness::Empirical>) {
          return *std::max_element(d.samples.begin(), d.samples.end());
        } else {
          return d.eta_max;
        }
      },
      dist);
}

inline double sample_fitness(const FitnessDistribution& dist, Rng& rng) {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          return d.eta0;
        } else if constexpr (std::is_same_v<T, fitness::TruncatedExponential>) {
          // inverse CDF; -expm1 keeps precision when lambda*eta_max is small
          const double mass = -std::expm1(-d.lambda * d.eta_max);
          const double eta = -std::log1p(-rng.uniform() * mass) / d.lambda;
          return std::clamp(eta, 0.0, d.eta_max);
        } else if constexpr (std::is_same_v<T, fitness::Uniform>) {
          return rng.uniform() * d.eta_max;
        } else {
          return d.samples[rng.below(d.samples.size())];
        }
      },
      dist);
}

/// Density for the continuous variants. For Delta and Empirical this is the
/// probability mass at eta.
inline double fitness_density(const FitnessDistribution& dist, double eta) {
  return std::visit(
      [eta](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          return eta == d.eta0 ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, fitness::TruncatedExponential>) {
          if (eta < 0.0 || eta > d.eta_max) return 0.0;
          return d.lambda * std::exp(-d.lambda * eta) / -std::expm1(-d.lambda * d.eta_max);
        } else if constexpr (std::is_same_v<T, fitness::Uniform>) {
          if (eta < 0.0 || eta > d.eta_max) return 0.0;
          return 1.0 / d.eta_max;
        } else {
          const auto hits = std::count(d.samples.begin(), d.samples.end(), eta);
          return static_cast<double>(hits) / static_cast<double>(d.samples.size());
        }
      },
      dist);
}

inline double fitness_cdf(const FitnessDistribution& dist, double eta) {
  return std::visit(
      [eta](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          return eta >= d.eta0 ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, fitness::TruncatedExponential>) {
          if (eta <= 0.0) return 0.0;
          if (eta >= d.eta_max) return 1.0;
          return std::expm1(-d.lambda * eta) / std::expm1(-d.lambda * d.eta_max);
        } else if constexpr (std::is_same_v<T, fitness::Uniform>) {
          return std::clamp(eta / d.eta_max, 0.0, 1.0);
        } else {
          const auto hits = std::count_if(d.samples.begin(), d.samples.end(), [eta](double x) { return x <= eta; });
          return static_cast<double>(hits) / static_cast<double>(d.samples.size());
        }
      },
      dist);
}

inline double fitness_mean(const FitnessDistribution& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, fitness::Delta>) {
          return d.eta0;
        } else if constexpr (std::is_same_v<T, fitness::TruncatedExponential>) {
          const double tail = std::exp(-d.lambda * d.eta_max);
          return 1.0 / d.lambda - d.eta_max * tail / (1.0 - tail);
        } else if constexpr (std::is_same_v<T, fitness::Uniform>) {
          return 0.5 * d.eta_max;
        } else {
          double sum = 0.0;
          for (double x : d.samples) sum += x;
          return sum / static_cast<double>(d.samples.size());
        }
      },
      dist);
}

/// Point masses (value, probability) of a discrete distribution, merged by
/// value and sorted ascending. Empty for continuous variants.
inline std::vector<std::pair<double, double>> point_masses(const FitnessDistribution& dist) {
  std::vector<std::pair<double, double>> out;
  if (const auto* d = std::get_if<fitness::Delta>(&dist)) {
    out.emplace_back(d->eta0, 1.0);
  } else if (const auto* e = std::get_if<fitness::Empirical>(&dist)) {
    std::vector<double> sorted = e->samples;
    std::sort(sorted.begin(), sorted.end());
    const double w = 1.0 / static_cast<double>(sorted.size());
    for (double x : sorted) {
      if (!out.empty() && out.back().first == x)
        out.back().second += w;
      else
        out.emplace_back(x, w);
    }
  }
  return out;
}

inline std::string fitness_name(const FitnessDistribution& dist) {
  switch (dist.index()) {
    case 0: return "delta";
    case 1: return "trunc-exp";
    case 2: return "uniform";
    default: return "empirical";
  }
}

}  // namespace fitnet
