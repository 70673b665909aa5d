#include <cmath>
#include <gtest/gtest.h>

#include "ttm/error.hpp"
#include "ttm/random.hpp"
#include "ttm/types.hpp"

namespace ttm {
namespace {

ResourceLedger ledger_of(std::initializer_list<std::pair<const char*, double>> budgets) {
  ResourceLedger l;
  for (const auto& [name, b] : budgets) {
    MemberResources r;
    r.budget = b;
    l.add(MemberId(name), r);
  }
  return l;
}

TEST(ResourceStructure, ShareOfTotal) {
  const auto rs = resource_structure(ledger_of({{"a", 5}, {"b", 5}}), MemberId("a"));
  EXPECT_DOUBLE_EQ(rs.count, 5.0);
  EXPECT_DOUBLE_EQ(rs.proportion, 0.5);
}

TEST(ResourceStructure, ZeroTotalGivesZeroProportion) {
  const auto rs = resource_structure(ledger_of({{"a", 0}, {"b", 0}}), MemberId("a"));
  EXPECT_EQ(rs.count, 0.0);
  EXPECT_EQ(rs.proportion, 0.0);
}

TEST(ResourceStructure, SoleMember) {
  const auto rs = resource_structure(ledger_of({{"a", 5}}), MemberId("a"));
  EXPECT_EQ(rs.count, 5.0);
  EXPECT_EQ(rs.proportion, 1.0);
}

TEST(ResourceStructure, UnknownActorThrows) {
  try {
    (void)resource_structure(ledger_of({{"a", 5}}), MemberId("z"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownMember);
  }
}

TEST(ResourceStructure, ProportionAlwaysInUnitInterval) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ResourceLedger l;
    const auto n = 1 + rng.below(8);
    for (std::uint64_t i = 0; i < n; ++i) {
      MemberResources r;
      r.budget = rng.uniform(0.0, 5.0);
      l.add(MemberId("m" + std::to_string(i)), r);
    }
    double sum = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto rs = resource_structure(l, MemberId("m" + std::to_string(i)));
      EXPECT_GE(rs.proportion, 0.0);
      EXPECT_LE(rs.proportion, 1.0);
      sum += rs.proportion;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AtmosphereWindow, StartsAtZero) {
  AtmosphereWindow w;
  for (double v : w.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(w.mean(), 0.0);
}

TEST(AtmosphereWindow, FillsFromTheRight) {
  AtmosphereWindow w;
  w.push(0.2);
  w.push(-0.1);
  w.push(0.5);
  const AtmosphereWindow::Values expected{0, 0, 0, 0, 0, 0, 0, 0.2, -0.1, 0.5};
  EXPECT_EQ(w.values(), expected);
}

TEST(AtmosphereWindow, EleventhPushEvictsFirst) {
  AtmosphereWindow w;
  for (int i = 1; i <= 11; ++i) w.push(i / 100.0);
  EXPECT_DOUBLE_EQ(w.values().front(), 0.02);
  EXPECT_DOUBLE_EQ(w.values().back(), 0.11);
}

TEST(AtmosphereWindow, RejectsOutOfRange) {
  AtmosphereWindow w;
  EXPECT_THROW(w.push(1.5), Error);
  EXPECT_THROW(w.push(std::nan("")), Error);
  EXPECT_EQ(w, AtmosphereWindow{});
}

TEST(Ledger, AddRemoveAndTotal) {
  auto l = ledger_of({{"a", 1}, {"b", 2.5}});
  EXPECT_DOUBLE_EQ(l.total_budget(), 3.5);
  l.remove(MemberId("a"));
  EXPECT_FALSE(l.contains(MemberId("a")));
  EXPECT_THROW(l.remove(MemberId("a")), Error);
}

TEST(Random, UniformStaysInRange) {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, SameSeedSameStream) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Random, FnvKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace ttm
