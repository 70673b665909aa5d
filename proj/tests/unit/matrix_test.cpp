#include <gtest/gtest.h>

#include "ttm/error.hpp"
#include "ttm/matrix.hpp"
#include "ttm/random.hpp"

namespace ttm {
namespace {

const MemberId kActor("a");

AllocationContext ctx(std::size_t tribe = 4) { return {kActor, 5.0, tribe}; }

Action speak(const std::string& text) { return {Speak{text}, kActor, 1}; }

TEST(Features, AllZeroInputs) {
  const FeatureVector f = assemble_features(ActionVector{}, {}, std::array<double, kAtmosphereDim>{});
  EXPECT_EQ(f.values.size(), 1036u);
  for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(Features, LayoutSentinelAudit) {
  EXPECT_EQ(kFeatureDim, 1024u + 2u + 10u);
  ActionVector a;
  for (std::size_t i = 0; i < kActionDim; ++i) a.values[i] = 1000.0 + static_cast<double>(i);
  std::array<double, kAtmosphereDim> atm{};
  for (std::size_t i = 0; i < kAtmosphereDim; ++i) atm[i] = -0.01 * static_cast<double>(i + 1);
  const FeatureVector f = assemble_features(a, {7.0, 0.25}, atm);
  for (std::size_t i = 0; i < kActionDim; ++i) ASSERT_EQ(f.values[i], 1000.0 + static_cast<double>(i));
  EXPECT_EQ(f.values[1024], 7.0);
  EXPECT_EQ(f.values[1025], 0.25);
  for (std::size_t i = 0; i < kAtmosphereDim; ++i) EXPECT_EQ(f.values[1026 + i], atm[i]);
  EXPECT_EQ(f.resource_count(), 7.0);
  EXPECT_EQ(f.resource_proportion(), 0.25);
}

TEST(Features, RejectsWrongLengths) {
  std::vector<double> short_action(10, 0.0);
  std::vector<double> atm(kAtmosphereDim, 0.0);
  try {
    (void)assemble_features(short_action, {}, atm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Heuristic, FixedPoint) {
  HeuristicConfig cfg;
  const auto d = heuristic_allocate(cfg, {3.0, 0.25}, 0.0, ctx(4));
  EXPECT_DOUBLE_EQ(d.new_budget, 3.0);
}

TEST(Heuristic, NegativeAtmosphereCutsOne) {
  HeuristicConfig cfg;
  cfg.k_atm = 1.0;
  cfg.k_eq = 0.0;
  EXPECT_DOUBLE_EQ(heuristic_allocate(cfg, {5.0, 0.5}, -1.0, ctx()).new_budget, 4.0);
}

TEST(Heuristic, ClampsAtZeroAndCap) {
  HeuristicConfig cfg;
  EXPECT_EQ(heuristic_allocate(cfg, {0.0, 0.0}, -1.0, ctx()).new_budget, 0.0);
  cfg.k_eq = 0.0;
  EXPECT_EQ(heuristic_allocate(cfg, {5.0, 0.5}, 1.0, ctx()).new_budget, 5.0);
}

TEST(Heuristic, EqualityTermUsesTribeShare) {
  HeuristicConfig cfg;
  cfg.k_atm = 0.0;
  cfg.k_eq = 2.0;
  // s* = 1/4, proportion 0.5: 3 + 2 * (0.25 - 0.5) = 2.5
  EXPECT_DOUBLE_EQ(heuristic_allocate(cfg, {3.0, 0.5}, 0.0, ctx(4)).new_budget, 2.5);
  cfg.target_share = 0.75;
  EXPECT_DOUBLE_EQ(heuristic_allocate(cfg, {3.0, 0.5}, 0.0, ctx(4)).new_budget, 3.5);
}

TEST(Heuristic, InvalidConfigThrows) {
  HeuristicConfig cfg;
  cfg.k_atm = -1.0;
  EXPECT_THROW(heuristic_allocate(cfg, {1.0, 0.5}, 0.0, ctx()), Error);
}

TEST(Rule, CleanTextUnchanged) {
  RuleConfig cfg{{"idiot"}, 30};
  const auto d = rule_allocate(cfg, speak("hello friends"), {5.0, 0.5}, ctx());
  EXPECT_EQ(d.new_budget, 5.0);
  EXPECT_EQ(d.mute_ticks, 0);
}

TEST(Rule, BannedTokenMutes) {
  RuleConfig cfg{{"idiot"}, 30};
  const auto d = rule_allocate(cfg, speak("you IDIOT!"), {5.0, 0.5}, ctx());
  EXPECT_EQ(d.new_budget, 0.0);
  EXPECT_EQ(d.mute_ticks, 30);
}

TEST(Rule, ZeroStaysZero) {
  RuleConfig cfg{{"idiot"}, 30};
  EXPECT_EQ(rule_allocate(cfg, speak("fine"), {0.0, 0.0}, ctx()).new_budget, 0.0);
}

TEST(Dispatch, NoOpIsIdentity) {
  const FeatureVector f{};
  EXPECT_EQ(allocate(NoOpMatrix{}, f, {}, speak("x"), {5.0, 0.5}, ctx()).new_budget, 5.0);
}

TEST(Dispatch, LearnedWithZeroWeightsGivesZero) {
  auto cfg = nn::ModelConfig::tiny();
  cfg.input_dim = kFeatureDim;
  LearnedMatrix m{std::make_shared<const nn::ModelWeights>(nn::ModelWeights::zeros(cfg))};
  const auto d = allocate(m, FeatureVector{}, {}, speak("x"), {5.0, 0.5}, ctx());
  EXPECT_EQ(d.new_budget, 0.0);
}

TEST(Dispatch, LearnedWithoutWeightsThrows) {
  try {
    (void)allocate(LearnedMatrix{}, FeatureVector{}, {}, speak("x"), {5.0, 0.5}, ctx());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::WeightsMissing);
  }
}

TEST(Dispatch, HeuristicEqualsDirectCall) {
  Rng rng(9);
  HeuristicConfig cfg;
  for (int i = 0; i < 200; ++i) {
    std::array<double, kAtmosphereDim> atm{};
    for (double& v : atm) v = rng.uniform(-1.0, 1.0);
    const ResourceStructure rs{rng.uniform(0.0, 5.0), rng.uniform()};
    const FeatureVector f = assemble_features(ActionVector{}, rs, atm);
    const auto via = allocate(HeuristicMatrix{cfg}, f, {}, speak("x"), rs, ctx(3));
    const auto direct = heuristic_allocate(cfg, rs, f.atmosphere_mean(), ctx(3));
    EXPECT_EQ(via.new_budget, direct.new_budget);
  }
}

TEST(Dispatch, ResultAlwaysWithinCap) {
  Rng rng(10);
  auto cfg = nn::ModelConfig::tiny();
  cfg.input_dim = kFeatureDim;
  LearnedMatrix m{std::make_shared<const nn::ModelWeights>(nn::ModelWeights::initialize(cfg, 3))};
  for (int i = 0; i < 50; ++i) {
    FeatureVector f{};
    for (double& v : f.values) v = rng.uniform(-1.0, 1.0) * 10.0;
    const ResourceStructure rs{rng.uniform(0.0, 5.0), rng.uniform()};
    const auto d = allocate(m, f, {}, speak("x"), rs, ctx());
    EXPECT_GE(d.new_budget, 0.0);
    EXPECT_LE(d.new_budget, 5.0);
  }
}

TEST(SequenceMatrix, FrontPadsWithZeros) {
  FeatureVector cur{}, old{};
  cur.values[0] = 2.0;
  old.values[0] = 1.0;
  const std::vector<FeatureVector> hist{old};
  const auto m = sequence_matrix(cur, hist, 4);
  EXPECT_EQ(m.rows(), 4);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(1, 0), 0.0);
  EXPECT_EQ(m(2, 0), 1.0);
  EXPECT_EQ(m(3, 0), 2.0);
}

}  // namespace
}  // namespace ttm
