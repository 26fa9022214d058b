#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "convgame/core.hpp"
#include "convgame/errors.hpp"
#include "convgame/names.hpp"
#include "convgame/random.hpp"
#include "convgame/stats.hpp"

using namespace convgame;

TEST(NamePool, RejectsDuplicatesAndEmptyTokens) {
  EXPECT_THROW(NamePool({"Q", "Q"}), ConfigError);
  EXPECT_THROW(NamePool({"Q", ""}), ConfigError);
  EXPECT_THROW(NamePool(std::vector<std::string>{}), ConfigError);
}

TEST(NamePool, LookupIsExactText) {
  NamePool pool{"Alice", "alice", "Q"};
  EXPECT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool.require("alice"), name_at(1));
  EXPECT_FALSE(pool.find("ALICE"));
  EXPECT_THROW(pool.require("M"), PoolMembershipError);
  EXPECT_THROW(pool.token(name_at(3)), PoolMembershipError);
  EXPECT_EQ(pool.token(name_at(2)), "Q");
}

TEST(Payoff, Examples) {
  NamePool pool{"Q", "M"};
  PayoffRule rule;
  auto same = apply_payoff("M", "M", pool, rule);
  EXPECT_TRUE(same.success);
  EXPECT_EQ(same.payoff, 100);
  auto diff = apply_payoff("Q", "M", pool, rule);
  EXPECT_FALSE(diff.success);
  EXPECT_EQ(diff.payoff, -50);
  auto unit = apply_payoff("Q", "Q", pool, PayoffRule{1, -1});
  EXPECT_TRUE(unit.success);
  EXPECT_EQ(unit.payoff, 1);
  EXPECT_THROW(apply_payoff("Q", "Z", pool, rule), PoolMembershipError);
  EXPECT_THROW(apply_payoff(name_at(0), name_at(5), pool, rule), PoolMembershipError);
}

TEST(Payoff, ValidateSigns) {
  EXPECT_NO_THROW(PayoffRule{}.validate());
  EXPECT_THROW((PayoffRule{0, -50}.validate()), ConfigError);
  EXPECT_THROW((PayoffRule{100, 0}.validate()), ConfigError);
}

TEST(InteractionRecord, SuccessIffEqualNames) {
  PayoffRule rule;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      auto r = InteractionRecord::make(1, name_at(a), name_at(b), rule);
      EXPECT_EQ(r.success, a == b);
      EXPECT_EQ(r.payoff, a == b ? 100 : -50);
    }
  }
}

TEST(MemoryWindow, AppendExamples) {
  PayoffRule rule;
  MemoryWindow w(5);
  w = memory_append(w, InteractionRecord::make(1, name_at(0), name_at(0), rule));
  EXPECT_EQ(w.size(), 1u);
  for (std::uint64_t i = 2; i <= 6; ++i) {
    w = memory_append(w, InteractionRecord::make(i, name_at(0), name_at(1), rule));
  }
  EXPECT_EQ(w.size(), 5u);
  EXPECT_EQ(w.records().front().round_index, 2u);
  EXPECT_EQ(w.newest().round_index, 6u);
}

TEST(MemoryWindow, ScoreIsSumOfStoredPayoffs) {
  PayoffRule rule;
  MemoryWindow w(5);
  w.append(InteractionRecord::make(1, name_at(0), name_at(0), rule));
  w.append(InteractionRecord::make(2, name_at(0), name_at(1), rule));
  w.append(InteractionRecord::make(3, name_at(1), name_at(1), rule));
  EXPECT_EQ(w.score(), 150);
  EXPECT_EQ(w.next_round_index(), 4u);
}

TEST(MemoryWindow, RejectsNonIncreasingIndex) {
  PayoffRule rule;
  MemoryWindow w(3);
  w.append(InteractionRecord::make(4, name_at(0), name_at(0), rule));
  EXPECT_THROW(w.append(InteractionRecord::make(4, name_at(0), name_at(0), rule)), OrderingError);
  EXPECT_THROW(w.append(InteractionRecord::make(2, name_at(0), name_at(0), rule)), OrderingError);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_THROW(MemoryWindow(0), ConfigError);
}

TEST(MemoryWindow, LengthBoundedUnderRandomAppends) {
  PayoffRule rule;
  Rng rng = make_rng(11, Stream::trial);
  for (std::size_t cap = 1; cap <= 7; ++cap) {
    MemoryWindow w(cap);
    std::uint64_t idx = 0;
    std::vector<InteractionRecord> all;
    for (int i = 0; i < 200; ++i) {
      idx += 1 + uniform_index(rng, 3);
      auto r = InteractionRecord::make(idx, name_at(uniform_index(rng, 2)),
                                       name_at(uniform_index(rng, 2)), rule);
      all.push_back(r);
      w.append(r);
      ASSERT_LE(w.size(), cap);
      ASSERT_EQ(w.newest(), r);
    }
    // The window holds exactly the last `cap` records.
    std::vector<InteractionRecord> tail(all.end() - static_cast<long>(cap), all.end());
    EXPECT_TRUE(std::equal(tail.begin(), tail.end(), w.records().begin()));
    int expected = 0;
    for (const auto& r : tail) expected += r.payoff;
    EXPECT_EQ(w.score(), expected);
  }
}

TEST(PresentationOrder, SingleNameAndDeterminism) {
  NamePool one(std::vector<std::string>{"Q"});
  Rng rng = make_rng(1, Stream::agent);
  EXPECT_EQ(presentation_order(one, rng), std::vector<NameId>{name_at(0)});

  NamePool pool{"A", "B", "C", "D"};
  Rng a = make_rng(99, Stream::agent, 3);
  Rng b = make_rng(99, Stream::agent, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(presentation_order(pool, a), presentation_order(pool, b));
}

TEST(PresentationOrder, TwoNamesAreFair) {
  NamePool pool{"Q", "M"};
  Rng rng = make_rng(2024, Stream::agent);
  std::uint64_t first_q = 0;
  const std::uint64_t n = 10'000;
  for (std::uint64_t i = 0; i < n; ++i) first_q += presentation_order(pool, rng)[0] == name_at(0);
  EXPECT_GT(stats::binom_exact_two_tailed(first_q, n).p_value, 0.05);
}

TEST(PresentationOrder, PermutationsUniform) {
  for (std::size_t w = 3; w <= 4; ++w) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < w; ++i) tokens.push_back(std::string(1, static_cast<char>('A' + i)));
    NamePool pool(tokens);
    std::size_t perms = 1;
    for (std::size_t i = 2; i <= w; ++i) perms *= i;
    std::map<std::vector<NameId>, std::uint64_t> counts;
    Rng rng = make_rng(7 + w, Stream::agent);
    for (std::size_t i = 0; i < 200 * perms; ++i) ++counts[presentation_order(pool, rng)];
    ASSERT_EQ(counts.size(), perms);
    std::vector<std::uint64_t> c;
    for (const auto& [_, v] : counts) c.push_back(v);
    EXPECT_GT(stats::chi2_uniform(c).p_value, 0.01) << "W=" << w;
  }
}

TEST(Random, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, {2, 0, 0}), derive_seed(1, {2, 0, 1}));
  EXPECT_NE(derive_seed(1, {2, 0, 0}), derive_seed(2, {2, 0, 0}));
  EXPECT_NE(derive_seed(1, {2, 1, 0}), derive_seed(1, {2, 0, 1}));
  EXPECT_EQ(derive_seed(5, {1, 2, 3}), derive_seed(5, {1, 2, 3}));
}

TEST(Random, UniformIndexCoversRange) {
  Rng rng = make_rng(3, Stream::trial);
  std::vector<std::uint64_t> counts(7, 0);
  for (int i = 0; i < 70'000; ++i) ++counts[uniform_index(rng, 7)];
  EXPECT_GT(stats::chi2_uniform(counts).p_value, 0.01);
  EXPECT_THROW(uniform_index(rng, 0), std::invalid_argument);
  EXPECT_EQ(uniform_index(rng, 1), 0u);
}

TEST(Random, BernoulliEdgesAndWeights) {
  Rng rng = make_rng(4, Stream::trial);
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(bernoulli(rng, 1.0));
    EXPECT_FALSE(bernoulli(rng, 0.0));
  }
  std::vector<double> w{0.0, 3.0, 1.0};
  std::vector<std::uint64_t> counts(3, 0);
  for (int i = 0; i < 40'000; ++i) ++counts[weighted_index(rng, w)];
  EXPECT_EQ(counts[0], 0u);
  EXPECT_NEAR(static_cast<double>(counts[1]) / 40'000.0, 0.75, 0.01);
  std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(weighted_index(rng, zero), std::invalid_argument);
}

TEST(Random, Uniform01InUnitInterval) {
  Rng rng = make_rng(5, Stream::trial);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_NEAR(sum / 100'000.0, 0.5, 0.005);
  EXPECT_LT(lo, 0.001);
  EXPECT_GT(hi, 0.999);
}
