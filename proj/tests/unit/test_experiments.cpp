#include <gtest/gtest.h>

#include <numeric>

#include "convgame/errors.hpp"
#include "convgame/experiments.hpp"

using namespace convgame;

namespace {

PolicySpec committed_to(const std::string& name) {
  PolicySpec s;
  s.kind = PolicyKind::committed;
  s.committed_name = name;
  return s;
}

TrialConfig surrogate_config(std::size_t n, std::uint64_t seed) {
  TrialConfig c;
  c.population_size = n;
  c.master_seed = seed;
  return c;
}

}  // namespace

TEST(Probe, CountsSumAndReproduce) {
  NamePool pool{"A", "B", "C", "D", "E", "F", "G", "H", "I", "J"};
  PolicySpec spec;
  const auto a = probe_first_round_bias(spec, pool, 5000, 17);
  const auto b = probe_first_round_bias(spec, pool, 5000, 17);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(std::accumulate(a.counts.begin(), a.counts.end(), std::uint64_t{0}), 5000u);
  EXPECT_EQ(a.test.degrees_of_freedom, 9);
  EXPECT_GT(a.test.p_value, 0.01);
  EXPECT_EQ(a.fallbacks, 0u);
}

TEST(Probe, CommittedIsMaximallyBiased) {
  NamePool pool{"Q", "M"};
  const auto r = probe_first_round_bias(committed_to("M"), pool, 1000, 3);
  EXPECT_EQ(r.counts, (std::vector<std::uint64_t>{0, 1000}));
  EXPECT_LT(r.test.p_value, 1e-100);
}

TEST(Probe, WeightedSurrogateIsDetected) {
  NamePool pool{"Q", "M"};
  PolicySpec spec;
  spec.surrogate.first_round = {0.6, 0.4};
  const auto r = probe_first_round_bias(spec, pool, 2000, 4);
  EXPECT_LT(r.test.p_value, 1e-6);
  EXPECT_NEAR(static_cast<double>(r.counts[0]) / 2000.0, 0.6, 0.04);
}

TEST(BiasTest, FromCounts) {
  const std::vector<std::uint64_t> two{5079, 4921};
  EXPECT_NEAR(bias_test(two).p_value, 0.11641065246756002, 1e-12);
  const std::vector<std::uint64_t> flat(10, 100);
  EXPECT_NEAR(bias_test(flat).p_value, 1.0, 1e-12);
}

TEST(Consensus, TotalsAndCertainBias) {
  TrialConfig c;
  c.population_size = 10;
  c.pool = NamePool{"Q", "M"};
  c.mode = InteractionMode::speaker_hearer;
  c.policy.kind = PolicyKind::biased_minimal;
  c.policy.designated = "M";
  c.policy.bias = 1.0;
  c.horizon_rounds = 200;
  c.master_seed = 8;
  const auto d = consensus_distribution(c, 40);
  EXPECT_EQ(d.runs, 40u);
  EXPECT_EQ(d.counts[0] + d.counts[1] + d.not_converged + d.aborted, 40u);
  EXPECT_EQ(d.counts[1], 40u);
  EXPECT_DOUBLE_EQ(d.share(name_at(1)), 1.0);
  EXPECT_EQ(d.convergence_times.size(), 40u);
  EXPECT_GT(d.mean_convergence_time(), 0.0);
}

TEST(Consensus, UnbiasedMinimalIsBalanced) {
  TrialConfig c;
  c.population_size = 10;
  c.pool = NamePool{"Q", "M"};
  c.mode = InteractionMode::speaker_hearer;
  c.policy.kind = PolicyKind::minimal;
  c.horizon_rounds = 300;
  c.master_seed = 9;
  const auto d = consensus_distribution(c, 200);
  EXPECT_EQ(d.not_converged, 0u);
  EXPECT_GT(d.test.p_value, 0.001);
}

TEST(ConfigurationKey, Rendering) {
  NamePool pool{"Q", "M"};
  MemoryWindow w(3);
  EXPECT_EQ(configuration_key(w, pool), "");
  w.append(InteractionRecord::make(1, name_at(0), name_at(1), PayoffRule{}));
  w.append(InteractionRecord::make(2, name_at(1), name_at(1), PayoffRule{}));
  EXPECT_EQ(configuration_key(w, pool), "Q:M,M:M");
}

TEST(Microdynamics, CommittedProducesOnlyDesignated) {
  NamePool pool{"Q", "M"};
  MicrodynamicsOptions opt;
  opt.cohort = 200;
  opt.samples = 100;
  opt.run_bootstrap = false;
  const auto t = build_microdynamics_table(committed_to("Q"), pool, "Q", 5, opt);
  ASSERT_EQ(t.levels.size(), 3u);
  for (const auto& level : t.levels) {
    EXPECT_DOUBLE_EQ(level.aggregate, 1.0);
    for (const auto& cfg : level.configurations) {
      if (cfg.observed()) EXPECT_DOUBLE_EQ(*cfg.probability, 1.0) << cfg.key;
    }
  }
  // Committed agents only ever meet themselves.
  EXPECT_EQ(t.levels[1].find("Q:Q")->occurrences, 400u);
  EXPECT_FALSE(t.levels[1].find("M:M")->observed());
}

TEST(Microdynamics, SurrogateKeepAndSwitch) {
  NamePool pool{"Q", "M"};
  MicrodynamicsOptions opt;
  opt.cohort = 2000;
  opt.samples = 20'000;
  opt.bootstrap.resamples = 200;
  const auto t = build_microdynamics_table(PolicySpec{}, pool, "Q", 6, opt);
  ASSERT_EQ(t.levels.size(), 3u);
  EXPECT_EQ(t.levels[0].configurations.size(), 1u);
  EXPECT_EQ(t.levels[1].configurations.size(), 4u);
  EXPECT_EQ(t.levels[2].configurations.size(), 16u);
  const auto* keep = t.levels[1].find("Q:Q");
  ASSERT_NE(keep, nullptr);
  EXPECT_NEAR(*keep->probability, 0.994, 0.003);
  const auto* sw = t.levels[1].find("M:Q");
  EXPECT_NEAR(*sw->probability, 0.973, 0.006);
  EXPECT_TRUE(keep->p_bootstrap.has_value());
  std::uint64_t total = 0;
  for (const auto& cfg : t.levels[2].configurations) total += cfg.occurrences;
  EXPECT_EQ(total, 4000u);
}

TEST(Microdynamics, FirstInteractionMatchesProbe) {
  NamePool pool{"Q", "M"};
  MicrodynamicsOptions opt;
  opt.cohort = 300;
  opt.samples = 50;
  opt.depth = 1;
  opt.run_bootstrap = false;
  PolicySpec spec;
  spec.surrogate.first_round = {0.3, 0.7};
  const auto t = build_microdynamics_table(spec, pool, "M", 12, opt);
  const auto probe = probe_first_round_bias(spec, pool, 600, 12);
  EXPECT_EQ(t.first_round_counts, probe.counts);
  EXPECT_THROW(build_microdynamics_table(spec, NamePool{"A", "B", "C"}, "A", 1, opt), ConfigError);
}

TEST(Stability, ConsensusHolds) {
  TrialConfig c = surrogate_config(12, 21);
  c.initial_consensus = "M";
  c.policy.surrogate = {1.0, 1.0, {}};
  c.horizon_rounds = 20;
  const auto r = run_stability(c);
  EXPECT_TRUE(r.stable());
  EXPECT_EQ(r.production.size(), 20u);
  EXPECT_EQ(r.consensus, name_at(1));
  EXPECT_EQ(r.log.events.size(), 240u);

  // Occasional slips after success break the default surrogate's consensus.
  c.policy.surrogate = {};
  c.master_seed = 0;
  const auto noisy = run_stability(c);
  EXPECT_LT(noisy.minimum, 1.0);
  EXPECT_FALSE(noisy.stable());
}

TEST(Stability, Preconditions) {
  TrialConfig c = surrogate_config(12, 22);
  EXPECT_THROW(run_stability(c), ConfigError);
  c.committed = CommittedSpec{2, "Q", "M"};
  EXPECT_THROW(run_stability(c), ConfigError);
}

TEST(Sweep, EndpointsAndErrors) {
  TrialConfig c = surrogate_config(8, 30);
  c.policy.surrogate = {1.0, 1.0, {}};
  SweepOptions opt;
  opt.seeds = 3;
  opt.c_min = 0;
  opt.c_max = 8;
  const auto r = sweep_committed_minority(c, "Q", "M", opt);
  ASSERT_EQ(r.points.size(), 9u);
  EXPECT_EQ(r.points.front().flips, 0u);
  EXPECT_EQ(r.points.back().flips, 3u);
  ASSERT_TRUE(r.critical.has_value());
  for (const auto& p : r.points) {
    EXPECT_EQ(p.flip_times.size(), 3u);
    EXPECT_EQ(p.seeds, 3u);
  }

  opt.c_min = 9;
  opt.c_max = 9;
  EXPECT_THROW(sweep_committed_minority(c, "Q", "M", opt), ConfigError);
}

TEST(Sweep, StopAtFirst) {
  TrialConfig c = surrogate_config(6, 31);
  SweepOptions opt;
  opt.seeds = 2;
  opt.c_min = 6;
  opt.stop_at_first = true;
  const auto r = sweep_committed_minority(c, "Q", "M", opt);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.critical, 6u);
}
