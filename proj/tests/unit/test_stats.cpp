#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "convgame/stats.hpp"

using namespace convgame;
using namespace convgame::stats;

namespace {

// Two-tailed p at p0 = 1/2 from exact integer binomial coefficients.
double exact_half_binomial_p(unsigned k, unsigned n) {
  std::vector<unsigned long long> row{1};
  for (unsigned i = 0; i < n; ++i) {
    std::vector<unsigned long long> next(row.size() + 1, 0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      next[j] += row[j];
      next[j + 1] += row[j];
    }
    row = std::move(next);
  }
  unsigned long long tail = 0;
  for (unsigned long long c : row) {
    if (c <= row[k]) tail += c;
  }
  return static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n));
}

// Two-tailed p at p0 = 1/2 by walking the pmf outward from the centre with
// the ratio recurrence, in long double.
long double recurrence_half_binomial_p(std::uint64_t k, std::uint64_t n) {
  std::vector<long double> log_pmf(n + 1);
  log_pmf[0] = -static_cast<long double>(n) * std::log(2.0L);
  for (std::uint64_t i = 1; i <= n; ++i) {
    log_pmf[i] = log_pmf[i - 1] + std::log(static_cast<long double>(n - i + 1)) -
                 std::log(static_cast<long double>(i));
  }
  long double p = 0.0L;
  for (std::uint64_t i = 0; i <= n; ++i) {
    if (log_pmf[i] <= log_pmf[k] + 1e-12L) p += std::exp(log_pmf[i]);
  }
  return std::min(p, 1.0L);
}

// Upper regularized gamma for half-integer a = m + 1/2 in closed form.
double half_integer_gamma_q(int m, double x) {
  double sum = std::erfc(std::sqrt(x));
  double term = 2.0 * std::sqrt(x / M_PI) * std::exp(-x);  // x^{1/2} e^{-x} / Gamma(3/2)
  for (int j = 1; j <= m; ++j) {
    sum += term;
    term *= x / (j + 0.5);
  }
  return sum;
}

// Upper regularized gamma for integer a: e^{-x} sum_{j<a} x^j / j!.
double integer_gamma_q(int a, double x) {
  double term = std::exp(-x);
  double sum = 0.0;
  for (int j = 0; j < a; ++j) {
    sum += term;
    term *= x / (j + 1);
  }
  return sum;
}

}  // namespace

TEST(Binomial, SevenOfTenIsExact) {
  EXPECT_DOUBLE_EQ(exact_half_binomial_p(7, 10), 352.0 / 1024.0);
  EXPECT_NEAR(binom_exact_two_tailed(7, 10).p_value, 0.34375, 1e-12);
}

TEST(Binomial, ReportedValues) {
  // Frozen from 40-digit evaluations of the same definition.
  EXPECT_NEAR(binom_exact_two_tailed(5079, 10'000).p_value, 0.11641065246756002, 1e-9);
  EXPECT_NEAR(binom_exact_two_tailed(2435, 5'000).p_value, 0.068090670797438094, 1e-9);
  EXPECT_NEAR(binom_exact_two_tailed(5079, 10'000).p_value, 0.116, 0.002);
  EXPECT_NEAR(binom_exact_two_tailed(2435, 5'000).p_value, 0.068, 0.002);
}

TEST(Binomial, AgreesWithIndependentOracles) {
  for (unsigned n : {1u, 2u, 5u, 10u, 17u, 40u, 60u}) {
    for (unsigned k = 0; k <= n; ++k) {
      EXPECT_NEAR(binom_exact_two_tailed(k, n).p_value, exact_half_binomial_p(k, n), 1e-12)
          << k << "/" << n;
    }
  }
  for (std::uint64_t k : {4900u, 4950u, 4990u, 5000u, 5079u, 5200u}) {
    EXPECT_NEAR(binom_exact_two_tailed(k, 10'000).p_value,
                static_cast<double>(recurrence_half_binomial_p(k, 10'000)), 1e-9);
  }
}

TEST(Binomial, HalfIsOne) {
  EXPECT_DOUBLE_EQ(binom_exact_two_tailed(5, 10).p_value, 1.0);
  EXPECT_DOUBLE_EQ(binom_exact_two_tailed(5000, 10'000).p_value, 1.0);
}

TEST(Binomial, SymmetryAndMonotonicity) {
  const std::uint64_t n = 301;
  double previous = 2.0;
  for (std::uint64_t k = n / 2 + 1; k <= n; ++k) {
    const double p = binom_exact_two_tailed(k, n).p_value;
    EXPECT_DOUBLE_EQ(p, binom_exact_two_tailed(n - k, n).p_value);
    EXPECT_LE(p, previous + 1e-15);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    previous = p;
  }
}

TEST(Binomial, UnequalNull) {
  // Minimum-likelihood rule with p0 = 0.3, n = 10, k = 6, by brute force.
  const double p0 = 0.3;
  auto pmf = [&](int i) {
    double c = 1.0;
    for (int j = 1; j <= i; ++j) c = c * (10 - j + 1) / j;
    return c * std::pow(p0, i) * std::pow(1 - p0, 10 - i);
  };
  double expected = 0.0;
  for (int i = 0; i <= 10; ++i) {
    if (pmf(i) <= pmf(6) * (1 + 1e-7)) expected += pmf(i);
  }
  EXPECT_NEAR(binom_exact_two_tailed(6, 10, p0).p_value, expected, 1e-12);
}

TEST(Binomial, ArgumentErrors) {
  EXPECT_THROW(binom_exact_two_tailed(11, 10), std::invalid_argument);
  EXPECT_THROW(binom_exact_two_tailed(0, 0), std::invalid_argument);
  EXPECT_THROW(binom_exact_two_tailed(1, 2, 0.0), std::invalid_argument);
  EXPECT_THROW(binom_exact_two_tailed(1, 2, 1.0), std::invalid_argument);
}

TEST(Gamma, ClosedFormOracles) {
  for (int m = 0; m <= 12; ++m) {
    for (double x : {0.01, 0.3, 1.0, 2.5, 7.0, 15.0, 40.0}) {
      EXPECT_NEAR(gamma_q(m + 0.5, x), half_integer_gamma_q(m, x), 1e-12) << m << " " << x;
      EXPECT_NEAR(gamma_p(m + 0.5, x) + gamma_q(m + 0.5, x), 1.0, 1e-14);
    }
  }
  for (int a = 1; a <= 30; ++a) {
    for (double x : {0.1, 1.0, 3.0, 10.0, 29.0, 55.0}) {
      EXPECT_NEAR(gamma_q(a, x), integer_gamma_q(a, x), 1e-12) << a << " " << x;
    }
  }
  EXPECT_NEAR(gamma_q(50.0, 60.0), 0.08440668109369183, 1e-12);
}

TEST(ChiSquared, EqualCountsGivePOne) {
  std::vector<std::uint64_t> counts(10, 100);
  const auto r = chi2_uniform(counts);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.degrees_of_freedom, 9);
  EXPECT_EQ(r.sample_size, 1000u);
}

TEST(ChiSquared, StatisticTwoAtNineDf) {
  std::vector<std::uint64_t> counts{110, 90, 100, 100, 100, 100, 100, 100, 100, 100};
  const auto r = chi2_uniform(counts);
  EXPECT_DOUBLE_EQ(r.statistic, 2.0);
  EXPECT_EQ(r.degrees_of_freedom, 9);
  EXPECT_NEAR(r.p_value, half_integer_gamma_q(4, 1.0), 1e-12);
  EXPECT_NEAR(r.p_value, 0.99146760662881353, 1e-12);
}

TEST(ChiSquared, PermutationInvariant) {
  std::vector<double> obs{12, 30, 5, 17, 36};
  std::vector<double> exp{20, 20, 10, 20, 30};
  const auto base = chi2_gof(obs, exp);
  std::vector<std::size_t> idx{0, 1, 2, 3, 4};
  std::mt19937 gen(3);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(idx.begin(), idx.end(), gen);
    std::vector<double> o, e;
    for (auto i : idx) {
      o.push_back(obs[i]);
      e.push_back(exp[i]);
    }
    const auto r = chi2_gof(o, e);
    EXPECT_NEAR(r.statistic, base.statistic, 1e-12);
    EXPECT_NEAR(r.p_value, base.p_value, 1e-14);
  }
}

TEST(ChiSquared, ArgumentErrors) {
  std::vector<double> a{1, 2}, b{1, 0}, c{1, 2, 3}, one{1};
  EXPECT_THROW(chi2_gof(a, b), std::invalid_argument);
  EXPECT_THROW(chi2_gof(a, c), std::invalid_argument);
  EXPECT_THROW(chi2_gof(one, one), std::invalid_argument);
}

TEST(Bootstrap, ConstantSampleNeverMoreExtreme) {
  std::vector<std::uint8_t> ones(50, 1);
  Rng rng = make_rng(1, Stream::bootstrap);
  EXPECT_EQ(bootstrap_bias(ones, 1.0, {}, rng), 0.0);
  BootstrapOptions full{200, 1.0, false, false};
  EXPECT_EQ(bootstrap_bias(ones, 1.0, full, rng), 0.0);
  full.include_ties = true;
  EXPECT_EQ(bootstrap_bias(ones, 1.0, full, rng), 1.0);
}

TEST(Bootstrap, FullSampleWithoutReplacementReproducesObservation) {
  std::vector<std::uint8_t> obs(100, 0);
  std::fill(obs.begin(), obs.begin() + 63, 1);
  Rng rng = make_rng(2, Stream::bootstrap);
  BootstrapOptions full{500, 1.0, false, false};
  EXPECT_EQ(bootstrap_bias(obs, 0.63, full, rng), 0.0);
  full.include_ties = true;
  EXPECT_EQ(bootstrap_bias(obs, 0.63, full, rng), 1.0);
}

TEST(Bootstrap, SixtyFortyNearHalf) {
  std::vector<std::uint8_t> obs(1000, 0);
  std::fill(obs.begin(), obs.begin() + 600, 1);
  Rng rng = make_rng(3, Stream::bootstrap);
  const double p = bootstrap_bias(obs, 0.6, {}, rng);
  EXPECT_NEAR(p, 0.5, 0.03);
  // Exact: P(Binomial(700, 0.6) > 420) + P(< 280).
  EXPECT_NEAR(p, 0.48564063509487381, 0.02);

  // Independent resampler on a different generator.
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
  std::size_t extreme = 0;
  for (int r = 0; r < 10'000; ++r) {
    int ones = 0;
    for (int i = 0; i < 700; ++i) ones += obs[pick(gen)];
    if (std::fabs(ones / 700.0 - 0.5) > 0.1 + 1e-12) ++extreme;
  }
  EXPECT_NEAR(p, extreme / 10'000.0, 4 * std::sqrt(2 * 0.25 / 10'000.0));
}

TEST(Bootstrap, ResampleSizeRoundsUp) {
  // n = 3, fraction 0.7 -> 3 draws; with a single 1 among three, a resample
  // bias of exactly 1/3 is never "more extreme" than 1/3.
  std::vector<std::uint8_t> obs{1, 0, 0};
  Rng rng = make_rng(4, Stream::bootstrap);
  BootstrapOptions opt{20'000, 0.7, true, false};
  // Resample has 3 draws: farther than |1/3 - 1/2| means 0 or 3 ones.
  const double expected = std::pow(2.0 / 3.0, 3) + std::pow(1.0 / 3.0, 3);
  EXPECT_NEAR(bootstrap_bias(obs, 1.0 / 3.0, opt, rng), expected, 0.015);
}

TEST(Bootstrap, ArgumentErrors) {
  std::vector<std::uint8_t> none;
  std::vector<std::uint8_t> some{1, 0};
  Rng rng = make_rng(5, Stream::bootstrap);
  EXPECT_THROW(bootstrap_bias(none, 0.5, {}, rng), std::invalid_argument);
  EXPECT_THROW(bootstrap_bias(some, 0.5, {10, 0.0, true, false}, rng), std::invalid_argument);
  EXPECT_THROW(bootstrap_bias(some, 0.5, {10, 1.5, true, false}, rng), std::invalid_argument);
}
