#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fitnet/errors.hpp"
#include "fitnet/fitness.hpp"
#include "fitnet/quadrature.hpp"
#include "fitnet/snapshot.hpp"

namespace fitnet {

/// Mean-field solution for one (c, fitness law) pair.
///
/// The normalisation integral has a pole at eta = A (1 + c) / (1 - c). Its
/// root sits just above eta_max, often closer than double precision can
/// resolve (relative gap around e^-89 for the default truncated exponential),
/// so the solver works with the relative gap delta, A (1 + c) / (1 - c) =
/// eta_max (1 + delta), and searches ln(delta).
struct TheoryParams {
  double c = 0.0;
  FitnessDistribution fitness_dist = fitness::Delta{1.0};
  double A = 0.0;
  double eta_max = 0.0;
  double pole_gap = 0.0;      // delta; may underflow to 0
  double log_pole_gap = 0.0;  // ln(delta), always finite
  double residual = 0.0;      // integral - 1 at the root
  double beta_max = 0.0;
  double gamma_pred = 0.0;
  // deviations from the leading-order approximations
  double eps1 = 0.0;  // A = (eta_max + eps1) (1 - c) / (1 + c)
  double eps2 = 0.0;  // beta_max = (1 - eps2) / (1 - c)
  double eps3 = 0.0;  // gamma = 2 + eps3

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    os << "c = " << c << "\nfitness = " << fitness_name(fitness_dist) << "\neta_max = " << eta_max << "\nA = " << A
       << "\nln_pole_gap = " << log_pole_gap << "\nresidual = " << residual << "\nbeta_max = " << beta_max
       << "\ngamma_pred = " << gamma_pred << "\neps1 = " << eps1 << "\neps2 = " << eps2 << "\neps3 = " << eps3
       << "\n";
    return os.str();
  }
};

namespace detail {

// Normalisation integral as a function of ln(delta).
class NormalisationIntegral {
 public:
  NormalisationIntegral(const FitnessDistribution& dist, double abs_tol)
      : dist_(dist), eta_max_(max_fitness(dist)), masses_(point_masses(dist)), tol_(abs_tol) {
    if (!is_discrete(dist)) g0_ = fitness_density(dist, eta_max_) * eta_max_;
  }

  double operator()(double log_gap) const {
    const double gap = std::exp(log_gap);  // 0 once ln(delta) < -745, which is the correct limit
    if (!masses_.empty()) {
      double sum = 0.0;
      for (const auto& [eta, w] : masses_) sum += w * eta / ((eta_max_ - eta) + eta_max_ * gap);
      return sum;
    }
    // singular part integrated in closed form, the remainder is bounded
    const double singular = g0_ * (std::log1p(gap) - log_gap);
    auto regular = [&](double eta) {
      const double den = (eta_max_ - eta) + eta_max_ * gap;
      if (den <= 0.0) {
        const double h = 1e-6 * eta_max_;
        return -(g(eta_max_) - g(eta_max_ - h)) / h;
      }
      return (g(eta) - g0_) / den;
    };
    return singular + quad::simpson(regular, 0.0, eta_max_, {tol_, 60});
  }

  double eta_max() const { return eta_max_; }
  double g0() const { return g0_; }

 private:
  double g(double eta) const { return fitness_density(dist_, eta) * eta; }

  const FitnessDistribution& dist_;
  double eta_max_;
  std::vector<std::pair<double, double>> masses_;
  double tol_;
  double g0_ = 0.0;
};

}  // namespace detail

/// Solves the normalisation condition for A and derives beta_max, the
/// predicted exponent and the leading-order deviations.
inline TheoryParams solve_theory(double c, const FitnessDistribution& dist, double abs_tol = 1e-10) {
  if (!(c >= 0.0 && c < 1.0)) throw ParameterError("c must lie in [0, 1)");
  validate(dist);
  const detail::NormalisationIntegral integral(dist, abs_tol);
  const double eta_max = integral.eta_max();
  if (!(eta_max > 0.0)) throw SolverError("solve_A: fitness law is concentrated at 0, no positive root exists");
  auto f = [&](double u) { return integral(u) - 1.0; };

  double hi = 0.0;
  while (f(hi) > 0.0) {
    hi += 4.0;
    if (hi > 200.0) throw SolverError("solve_A: integral stays above 1 for large A");
  }
  double lo = std::min(hi - 4.0, 0.0);
  while (f(lo) < 0.0) {
    lo *= 2.0;
    if (lo < -1e12) {
      std::ostringstream os;
      os << "solve_A: no sign change; the integral approaches " << integral(-1e12)
         << " < 1 as A approaches its pole bound eta_max (1 - c) / (1 + c) = " << eta_max * (1 - c) / (1 + c);
      throw SolverError(os.str());
    }
  }
  const double u = quad::bisect(f, lo, hi, 1e-15);

  TheoryParams t;
  t.c = c;
  t.fitness_dist = dist;
  t.eta_max = eta_max;
  t.log_pole_gap = u;
  t.pole_gap = std::exp(u);
  t.residual = f(u);
  if (!(std::abs(t.residual) < 1e-8)) {
    std::ostringstream os;
    os << "solve_A: residual " << t.residual << " exceeds 1e-8 at ln(delta) = " << u;
    throw SolverError(os.str());
  }
  const double d = t.pole_gap;
  t.A = eta_max * (1.0 + d) * (1.0 - c) / (1.0 + c);
  // (1 - c) beta_max = (1 + c) / (1 + delta) - c, rearranged to avoid cancellation
  const double scaled_beta_max = (1.0 - c * d) / (1.0 + d);
  t.beta_max = scaled_beta_max / (1.0 - c);
  if (!(t.beta_max > 0.0)) throw DomainError("beta_max <= 0, no power-law exponent");
  t.gamma_pred = 1.0 + 1.0 / scaled_beta_max;
  t.eps1 = eta_max * d;
  t.eps2 = d * (1.0 + c) / (1.0 + d);
  t.eps3 = t.gamma_pred - 2.0;
  return t;
}

inline double solve_A(double c, const FitnessDistribution& dist) { return solve_theory(c, dist).A; }

/// beta(eta) = eta / A - c / (1 - c).
inline double growth_exponent(double eta, double A, double c) {
  if (!(A > 0.0)) throw DomainError("A must be positive");
  return eta / A - c / (1.0 - c);
}

/// Inverse of growth_exponent.
inline double fitness_from_exponent(double beta, double A, double c) { return A * (beta + c / (1.0 - c)); }

inline double predicted_gamma(double c, const FitnessDistribution& dist) { return solve_theory(c, dist).gamma_pred; }

/// Scaling relation gamma(beta) = 1 + 1 / ((1 - c) beta).
inline double gamma_from_beta(double beta, double c) {
  if (!(beta > 0.0)) throw DomainError("growth exponent must be positive");
  return 1.0 + 1.0 / ((1.0 - c) * beta);
}

/// Degree exponent of a same-age cohort observed at age t.
inline double same_age_gamma(double lambda, double age) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!(age > 1.0)) throw DomainError("age must exceed 1");
  return 1.0 + lambda / std::log(age);
}

/// Prefactor of the accumulated degree k*(i, t) ~ prefactor (t / i)^beta.
inline double accumulated_prefactor(double eta, double A, double c, double m) {
  const double den = eta * (1.0 - c) - c * A;
  if (!(den > 0.0)) throw DomainError("accumulated prefactor has a pole or is negative at eta = " + std::to_string(eta));
  return m * eta * (1.0 - c) / den;
}

/// Mean-field accumulated degree at age ratio t / i: the node starts with m
/// and collects every link its live degree attracts.
inline double accumulated_degree(double eta, double A, double c, double m, double ratio) {
  const double beta = growth_exponent(eta, A, c);
  const double rate = eta / A;
  if (std::abs(beta) < 1e-12) return m + rate * m * std::log(ratio);
  return m + rate * m / beta * std::expm1(beta * std::log(ratio));
}

struct WinnersReport {
  double k_tg = 0.0;
  double T = 13.0;
  double k_cut = 0.0;
  double W = 0.0;   // fraction of nodes that are winners
  double TW = 0.0;  // fraction: winners starting below k_cut
  double EL = 0.0;  // fraction: non-winners starting above k_cut
  double r_tw = 0.0;
  // empirical only
  std::uint64_t population = 0;
  std::uint64_t winners = 0;
  std::uint64_t talented_winners = 0;
  std::uint64_t experienced_losers = 0;
};

/// Continuous winners analysis. A node with initial degree k wins when its
/// growth exponent exceeds beta_c(k) = ln(k_tg / k) / ln T.
class WinnersModel {
 public:
  /// `ccdf` is P(beta > b); `initial_density` need not be normalised on
  /// [1, k_tg]. `breakpoints` lists k values where either function has a
  /// kink or jump.
  WinnersModel(double k_tg, double T, std::function<double(double)> ccdf, std::function<double(double)> initial_density,
               std::vector<double> breakpoints = {}, double abs_tol = 1e-10)
      : k_tg_(k_tg), T_(T), ccdf_(std::move(ccdf)), density_(std::move(initial_density)), tol_(abs_tol) {
    if (!(k_tg > 1.0)) throw ParameterError("k_tg must exceed 1");
    if (!(T > 1.0)) throw ParameterError("T must exceed 1");
    for (double k : breakpoints)
      if (k > 1.0 && k < k_tg) breaks_.push_back(std::log(k));
    std::sort(breaks_.begin(), breaks_.end());
    norm_ = integrate([](double, double p) { return p; }, 1.0, k_tg_);
    if (!(norm_ > 0.0)) throw ParameterError("initial degree density has no mass on [1, k_tg]");
  }

  double critical_exponent(double k) const { return std::log(k_tg_ / k) / std::log(T_); }
  double win_probability(double k) const { return std::clamp(ccdf_(critical_exponent(k)), 0.0, 1.0); }

  double W() const {
    return integrate([](double c, double p) { return c * p; }, 1.0, k_tg_) / norm_;
  }
  double TW(double k_cut) const {
    return integrate([](double c, double p) { return c * p; }, 1.0, k_cut) / norm_;
  }
  double EL(double k_cut) const {
    return integrate([](double c, double p) { return (1.0 - c) * p; }, k_cut, k_tg_) / norm_;
  }

  WinnersReport solve() const {
    WinnersReport r;
    r.k_tg = k_tg_;
    r.T = T_;
    r.W = W();
    auto balance = [&](double log_k) {
      const double k = std::exp(log_k);
      return TW(k) - EL(k);
    };
    if (balance(0.0) >= 0.0) {
      r.k_cut = 1.0;
    } else {
      r.k_cut = std::exp(quad::bisect(balance, 0.0, std::log(k_tg_), 1e-13));
    }
    r.TW = TW(r.k_cut);
    r.EL = EL(r.k_cut);
    r.r_tw = r.W > 0.0 ? std::clamp(r.TW / r.W, 0.0, 1.0) : 0.0;
    return r;
  }

 private:
  // integral over k in [a, b] of h(C(beta_c(k)), P(k)), taken in ln k
  template <typename H>
  double integrate(H h, double a, double b) const {
    if (b <= a) return 0.0;
    const double la = std::log(a);
    const double lb = std::log(b);
    auto f = [&](double u) {
      const double k = std::exp(u);
      return h(win_probability(k), density_(k)) * k;
    };
    double sum = 0.0;
    double lo = la;
    for (double br : breaks_) {
      if (br <= lo || br >= lb) continue;
      sum += quad::simpson(f, lo, br, {tol_, 60});
      lo = br;
    }
    return sum + quad::simpson(f, lo, lb, {tol_, 60});
  }

  double k_tg_;
  double T_;
  std::function<double(double)> ccdf_;
  std::function<double(double)> density_;
  std::vector<double> breaks_;
  double tol_;
  double norm_ = 1.0;
};

/// CCDF of a truncated exponential on [0, beta_max].
inline std::function<double(double)> truncated_exponential_ccdf(double lambda, double beta_max) {
  if (!(lambda > 0.0) || !(beta_max > 0.0)) throw ParameterError("truncated exponential needs lambda, beta_max > 0");
  return [lambda, beta_max](double b) {
    if (b <= 0.0) return 1.0;
    if (b >= beta_max) return 0.0;
    return std::exp(-lambda * b) * std::expm1(-lambda * (beta_max - b)) / std::expm1(-lambda * beta_max);
  };
}

inline std::function<double(double)> power_law_density(double gamma) {
  return [gamma](double k) { return std::pow(k, -gamma); };
}

/// Winners analysis with the default ingredients: truncated-exponential
/// exponent law and a continuous power-law initial degree density.
inline WinnersReport winners(double k_tg, double T, double lambda, double beta_max, double gamma_init,
                             double abs_tol = 1e-10) {
  const double kink = k_tg / std::pow(T, beta_max);
  return WinnersModel(k_tg, T, truncated_exponential_ccdf(lambda, beta_max), power_law_density(gamma_init), {kink},
                      abs_tol)
      .solve();
}

struct EmpiricalWinnersCurve {
  std::vector<double> k_cut;
  std::vector<std::uint64_t> tw;
  std::vector<std::uint64_t> el;
};

/// Counts over nodes present in both the first and the last snapshot with
/// initial accumulated degree in [1, k_tg). The cutoff is scanned over
/// half-integers; k_cut is the first one where TW >= EL.
inline WinnersReport empirical_winners(const AccumulatedSeries& acc, std::uint32_t snapshots, double k_tg,
                                       EmpiricalWinnersCurve* curve = nullptr) {
  if (snapshots < 2) throw SeriesError("winners analysis needs at least 2 snapshots");
  if (!(k_tg > 1.0)) throw ParameterError("k_tg must exceed 1");
  WinnersReport r;
  r.k_tg = k_tg;
  r.T = snapshots;
  std::vector<std::pair<std::uint32_t, bool>> nodes;  // (initial degree, winner)
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc.view(i);
    if (v.first != 1 || v.last() != snapshots) continue;
    const auto k0 = v.kstar.front();
    if (k0 < 1 || static_cast<double>(k0) >= k_tg) continue;
    nodes.emplace_back(k0, static_cast<double>(v.final_value()) >= k_tg);
  }
  r.population = nodes.size();
  for (const auto& [k0, win] : nodes) r.winners += win ? 1 : 0;
  if (r.population == 0 || r.winners == 0) return r;

  const auto top = static_cast<std::uint32_t>(std::ceil(k_tg));
  std::vector<std::uint64_t> win_at(top + 1, 0);
  std::vector<std::uint64_t> lose_at(top + 1, 0);
  for (const auto& [k0, win] : nodes) (win ? win_at : lose_at)[k0] += 1;
  std::uint64_t tw = 0;
  std::uint64_t el = r.population - r.winners;
  bool found = el == 0;
  if (found) r.k_cut = 0.5;
  for (std::uint32_t k = 1; k <= top; ++k) {
    // cutoff k - 0.5 ... k + 0.5 moves node degree k from the EL side to the TW side
    const double cut = k + 0.5;
    tw += win_at[k];
    el -= lose_at[k];
    if (curve) {
      curve->k_cut.push_back(cut);
      curve->tw.push_back(tw);
      curve->el.push_back(el);
    }
    if (!found && tw >= el) {
      found = true;
      r.k_cut = cut;
      r.talented_winners = tw;
      r.experienced_losers = el;
    }
  }
  const auto n = static_cast<double>(r.population);
  r.W = static_cast<double>(r.winners) / n;
  r.TW = static_cast<double>(r.talented_winners) / n;
  r.EL = static_cast<double>(r.experienced_losers) / n;
  r.r_tw = static_cast<double>(r.talented_winners) / static_cast<double>(r.winners);
  return r;
}

}  // namespace fitnet
