#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fitnet/fitness.hpp"
#include "fitnet/params.hpp"
#include "fitnet/rng.hpp"
#include "fitnet/stats.hpp"

using namespace fitnet;

namespace {

// composite trapezoid, fine enough for the smooth densities used here
template <typename F>
double trapezoid(F f, double a, double b, int n = 200000) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

}  // namespace

TEST(Fitness, DeltaIsConstant) {
  Rng rng(7);
  const FitnessDistribution d = fitness::Delta{1.0};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_fitness(d, rng), 1.0);
}

TEST(Fitness, TruncatedExponentialMeanMatchesQuadrature) {
  const double lambda = 3.316;
  const double eta_max = 2.0;
  const FitnessDistribution d = fitness::TruncatedExponential{lambda, eta_max};
  // oracle: mean by direct quadrature of the density written out here
  const double z = 1.0 - std::exp(-lambda * eta_max);
  const double oracle = trapezoid([&](double x) { return x * lambda * std::exp(-lambda * x) / z; }, 0.0, eta_max);
  // closed form: 1 / lambda - eta_max e^(-lambda eta_max) / (1 - e^(-lambda eta_max))
  EXPECT_NEAR(oracle, 1.0 / lambda - eta_max * std::exp(-lambda * eta_max) / z, 1e-8);
  EXPECT_NEAR(fitness_mean(d), oracle, 1e-8);

  Rng rng(11);
  const int n = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_fitness(d, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, eta_max);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - oracle), 3.0 * se);
}

TEST(Fitness, UniformSupportAndMean) {
  Rng rng(3);
  const FitnessDistribution d = fitness::Uniform{2.0};
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = sample_fitness(d, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 2.0);
    sum += x;
  }
  EXPECT_NEAR(sum / 100000, 1.0, 0.01);
}

TEST(Fitness, DensityValues) {
  const FitnessDistribution te = fitness::TruncatedExponential{3.316, 2.0};
  EXPECT_EQ(fitness_density(te, 2.5), 0.0);
  EXPECT_EQ(fitness_density(te, -0.1), 0.0);
  EXPECT_NEAR(fitness_density(fitness::TruncatedExponential{1.0, 60.0}, 0.0), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(fitness_density(fitness::Uniform{2.0}, 1.0), 0.5);
  const double x = 0.7;
  EXPECT_NEAR(fitness_density(te, x), 3.316 * std::exp(-3.316 * x) / (1 - std::exp(-3.316 * 2.0)), 1e-12);
}

TEST(Fitness, DensityIntegratesToOne) {
  for (const FitnessDistribution& d :
       {FitnessDistribution{fitness::TruncatedExponential{3.316, 2.0}}, FitnessDistribution{fitness::TruncatedExponential{0.5, 3.0}},
        FitnessDistribution{fitness::TruncatedExponential{20.0, 1.0}}, FitnessDistribution{fitness::Uniform{2.0}}}) {
    EXPECT_NEAR(trapezoid([&](double x) { return fitness_density(d, x); }, 0.0, max_fitness(d)), 1.0, 1e-6)
        << fitness_name(d);
  }
  for (const FitnessDistribution& d : {FitnessDistribution{fitness::Delta{1.5}},
                                       FitnessDistribution{fitness::Empirical{{0.1, 0.2, 0.2, 0.9}}}}) {
    double total = 0.0;
    for (const auto& [v, p] : point_masses(d)) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Fitness, SamplesPassKolmogorovSmirnov) {
  const double critical = 1.628;  // 1% level, times 1/sqrt(n)
  const int n = 100000;
  for (const FitnessDistribution& d :
       {FitnessDistribution{fitness::TruncatedExponential{3.316, 2.0}}, FitnessDistribution{fitness::Uniform{2.0}},
        FitnessDistribution{fitness::TruncatedExponential{0.5, 2.687}}}) {
    Rng rng(99);
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample_fitness(d, rng);
    const auto ks = stats::ks_one_sample(xs, [&](double x) { return fitness_cdf(d, x); });
    EXPECT_LT(ks.statistic, critical / std::sqrt(n)) << fitness_name(d);
  }
}

TEST(Fitness, EmpiricalResamplesFromList) {
  const FitnessDistribution d = fitness::Empirical{{0.25, 0.5, 4.0}};
  Rng rng(5);
  int hits[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) {
    const double x = sample_fitness(d, rng);
    if (x == 0.25) ++hits[0];
    else if (x == 0.5) ++hits[1];
    else if (x == 4.0) ++hits[2];
    else FAIL() << "value outside the sample list: " << x;
  }
  for (int h : hits) EXPECT_NEAR(h / 30000.0, 1.0 / 3.0, 0.015);
  EXPECT_EQ(max_fitness(d), 4.0);
}

TEST(Fitness, InvalidParametersRejected) {
  EXPECT_THROW(validate(FitnessDistribution{fitness::TruncatedExponential{0.0, 2.0}}), ParameterError);
  EXPECT_THROW(validate(FitnessDistribution{fitness::TruncatedExponential{1.0, -1.0}}), ParameterError);
  EXPECT_THROW(validate(FitnessDistribution{fitness::Uniform{0.0}}), ParameterError);
  EXPECT_THROW(validate(FitnessDistribution{fitness::Empirical{}}), ParameterError);
  EXPECT_THROW(validate(FitnessDistribution{fitness::Empirical{{1.0, -2.0}}}), ParameterError);
  EXPECT_THROW(validate(FitnessDistribution{fitness::Delta{-1.0}}), ParameterError);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(1234);
  Rng b(1234);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(1235);
  Rng d(1234);
  int same = 0;
  for (int i = 0; i < 1000; ++i) same += c.next_u64() == d.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, SplitIsDeterministicAndDistinct) {
  Rng a(42);
  Rng b(42);
  Rng ca = a.split();
  Rng cb = b.split();
  for (int i = 0; i < 100; ++i) ASSERT_EQ(ca.next_u64(), cb.next_u64());
  Rng child = a.split();
  int same = 0;
  for (int i = 0; i < 1000; ++i) same += child.next_u64() == a.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, BoundedDrawsStayInRange) {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_GT(rng.uniform_pos(), 0.0);
  }
}

TEST(Params, ParsesConfigFile) {
  std::istringstream in(
      "# demo\n"
      "m = 3\n"
      "c=0.5\n"
      "fitness = trunc-exp\n"
      "lambda = 3.316   # rate\n"
      "eta_max = 2.0\n"
      "steps = 1300\n"
      "snapshot_interval = 100\n"
      "seed = 77\n");
  const ModelParams p = parse_params(in);
  EXPECT_EQ(p.m, 3u);
  EXPECT_EQ(p.c, 0.5);
  EXPECT_EQ(p.total_steps, 1300u);
  EXPECT_EQ(p.snapshot_interval, 100u);
  EXPECT_EQ(p.seed, 77u);
  const auto* te = std::get_if<fitness::TruncatedExponential>(&p.fitness_dist);
  ASSERT_NE(te, nullptr);
  EXPECT_EQ(te->lambda, 3.316);
  EXPECT_EQ(te->eta_max, 2.0);
}

TEST(Params, RoundTripThroughText) {
  ModelParams p;
  p.m = 4;
  p.c = 0.91;
  p.fitness_dist = fitness::TruncatedExponential{3.316, 2.0};
  p.total_steps = 5000;
  p.snapshot_interval = 250;
  p.seed = 0xFFFFFFFFFFFFFFFFULL;
  p.kernel = KernelMode::Offset;
  p.kernel_offset = 2.5;
  std::ostringstream out;
  write_params(out, p);
  std::istringstream in(out.str());
  const ModelParams q = parse_params(in);
  std::ostringstream again;
  write_params(again, q);
  EXPECT_EQ(out.str(), again.str());
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.c, p.c);
}

TEST(Params, RejectsBadInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_params(in);
  };
  EXPECT_THROW(parse("bogus = 1\n"), ParameterError);
  EXPECT_THROW(parse("m = -1\n"), ParameterError);
  EXPECT_THROW(parse("m = 0\n"), ParameterError);
  EXPECT_THROW(parse("c = 1.0\n"), ParameterError);
  EXPECT_THROW(parse("c = abc\n"), ParameterError);
  EXPECT_THROW(parse("steps = 10\nsnapshot_interval = 20\n"), ParameterError);
  EXPECT_THROW(parse("fitness = gaussian\n"), ParameterError);
  EXPECT_THROW(parse("just text\n"), ParameterError);
  EXPECT_THROW(parse("fitness = empirical\n"), ParameterError);
}
