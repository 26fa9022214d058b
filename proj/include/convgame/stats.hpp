#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "convgame/random.hpp"

namespace convgame::stats {

struct TestResult {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t sample_size = 0;
  std::string null_hypothesis;
  int degrees_of_freedom = 0;
};

/// Exact two-tailed binomial test by the minimum-likelihood method: the
/// p-value sums P(X = i) over every i no more likely than the observed k.
/// At p0 = 0.5 this is the doubled tail. Throws std::invalid_argument
/// unless 0 <= k <= n, n >= 1 and 0 < p0 < 1.
TestResult binom_exact_two_tailed(std::uint64_t k, std::uint64_t n, double p0 = 0.5);

/// log P(X = k) for X ~ Binomial(n, p).
double binom_log_pmf(std::uint64_t k, std::uint64_t n, double p);

/// Regularized lower/upper incomplete gamma functions P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Upper tail of the chi-squared distribution.
double chi2_survival(double x, double df);

/// Pearson goodness-of-fit with df = categories - 1. Throws
/// std::invalid_argument on length mismatch, fewer than two categories or a
/// non-positive expected count.
TestResult chi2_gof(std::span<const double> observed, std::span<const double> expected);

/// Uniform-null convenience form: expected T/W in every category.
TestResult chi2_uniform(std::span<const std::uint64_t> counts);

struct BootstrapOptions {
  std::size_t resamples = 10'000;
  double fraction = 0.7;
  bool with_replacement = true;
  /// Count resamples exactly as extreme as the observation.
  bool include_ties = false;
};

/// Share of resamples (each of ceil(fraction * n) binary outcomes) whose
/// bias lies strictly farther from 0.5 than observed_bias.
double bootstrap_bias(std::span<const std::uint8_t> observations, double observed_bias,
                      const BootstrapOptions& options, Rng& rng);

}  // namespace convgame::stats
