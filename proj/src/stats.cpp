#include "convgame/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace convgame::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIterations = 100'000;

// Series expansion, converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction (modified Lentz), for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

namespace {

long double log_pmf_ld(std::uint64_t k, std::uint64_t n, long double p) {
  const long double kd = static_cast<long double>(k);
  const long double nd = static_cast<long double>(n);
  const long double log_choose = std::lgamma(nd + 1.0L) - std::lgamma(kd + 1.0L) - std::lgamma(nd - kd + 1.0L);
  // Guard 0 * log(0) at the boundaries.
  const long double a = k == 0 ? 0.0L : kd * std::log(p);
  const long double b = k == n ? 0.0L : (nd - kd) * std::log1p(-p);
  return log_choose + a + b;
}

}  // namespace

double binom_log_pmf(std::uint64_t k, std::uint64_t n, double p) {
  return static_cast<double>(log_pmf_ld(k, n, p));
}

TestResult binom_exact_two_tailed(std::uint64_t k, std::uint64_t n, double p0) {
  if (n == 0) throw std::invalid_argument("binomial test needs at least one trial");
  if (k > n) throw std::invalid_argument("binomial test: successes exceed trials");
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("binomial test: p0 must lie in (0,1)");

  // Relative slack so that pmf values equal up to rounding count as ties.
  // Extended precision keeps small dyadic cases exact after rounding.
  constexpr long double kRelErr = 1.0L + 1e-7L;
  const long double cutoff = log_pmf_ld(k, n, p0) + std::log(kRelErr);
  long double p = 0.0L;
  long double total = 0.0L;
  for (std::uint64_t i = 0; i <= n; ++i) {
    const long double mass = std::exp(log_pmf_ld(i, n, p0));
    total += mass;
    if (log_pmf_ld(i, n, p0) <= cutoff) p += mass;
  }
  // Normalizing cancels the rounding in the log-gamma terms.
  p /= total;

  TestResult r;
  r.test = "binomial_exact_two_tailed";
  r.statistic = static_cast<double>(k) / static_cast<double>(n);
  r.p_value = std::clamp(static_cast<double>(p), 0.0, 1.0);
  r.sample_size = static_cast<std::size_t>(n);
  r.null_hypothesis = "p = " + std::to_string(p0);
  return r;
}

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double chi2_survival(double x, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("chi2_survival: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

TestResult chi2_gof(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) {
    throw std::invalid_argument("chi2_gof: observed and expected lengths differ");
  }
  if (observed.size() < 2) throw std::invalid_argument("chi2_gof: need at least two categories");
  double statistic = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) {
      throw std::invalid_argument("chi2_gof: expected counts must be positive");
    }
    const double diff = observed[i] - expected[i];
    statistic += diff * diff / expected[i];
    total += observed[i];
  }
  TestResult r;
  r.test = "chi2_goodness_of_fit";
  r.statistic = statistic;
  r.degrees_of_freedom = static_cast<int>(observed.size() - 1);
  r.p_value = std::clamp(chi2_survival(statistic, r.degrees_of_freedom), 0.0, 1.0);
  r.sample_size = static_cast<std::size_t>(std::llround(total));
  r.null_hypothesis = "given expected counts";
  return r;
}

TestResult chi2_uniform(std::span<const std::uint64_t> counts) {
  const double total =
      static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  std::vector<double> observed(counts.begin(), counts.end());
  std::vector<double> expected(counts.size(), total / static_cast<double>(counts.size()));
  TestResult r = chi2_gof(observed, expected);
  r.null_hypothesis = "uniform over " + std::to_string(counts.size()) + " categories";
  return r;
}

double bootstrap_bias(std::span<const std::uint8_t> observations, double observed_bias,
                      const BootstrapOptions& options, Rng& rng) {
  const std::size_t n = observations.size();
  if (n == 0) throw std::invalid_argument("bootstrap_bias: no observations");
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) {
    throw std::invalid_argument("bootstrap_bias: fraction must lie in (0,1]");
  }
  if (options.resamples == 0) throw std::invalid_argument("bootstrap_bias: zero resamples");
  const auto m = static_cast<std::size_t>(std::ceil(options.fraction * static_cast<double>(n) - 1e-9));
  const double observed_distance = std::fabs(observed_bias - 0.5);

  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::size_t extreme = 0;
  for (std::size_t r = 0; r < options.resamples; ++r) {
    std::size_t ones = 0;
    if (options.with_replacement) {
      for (std::size_t i = 0; i < m; ++i) ones += observations[uniform_index(rng, n)] ? 1 : 0;
    } else {
      // Partial Fisher-Yates: first m slots become the sample.
      for (std::size_t i = 0; i < m; ++i) {
        std::swap(indices[i], indices[i + uniform_index(rng, n - i)]);
        ones += observations[indices[i]] ? 1 : 0;
      }
    }
    const double distance = std::fabs(static_cast<double>(ones) / static_cast<double>(m) - 0.5);
    // Resample means are multiples of 1/m; compare with a little slack.
    constexpr double kTol = 1e-12;
    if (distance > observed_distance + kTol ||
        (options.include_ties && std::fabs(distance - observed_distance) <= kTol)) {
      ++extreme;
    }
  }
  return static_cast<double>(extreme) / static_cast<double>(options.resamples);
}

}  // namespace convgame::stats
