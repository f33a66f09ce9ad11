#include <gtest/gtest.h>

#include <set>

#include "ewboot/random.hpp"

namespace ewboot {
namespace {

TEST(RandomStream, SameKeySameSequence) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(RandomStream, SubstreamsAreIndependentOfParentState) {
  RandomStream a(7);
  const auto before = a.substream("boot", 3);
  for (int i = 0; i < 10; ++i) a();
  const auto after = a.substream("boot", 3);
  EXPECT_EQ(before.key(), after.key());
}

TEST(RandomStream, DistinctTagsAndIndicesGiveDistinctKeys) {
  const RandomStream root(1);
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    keys.insert(root.substream("boot", i).key());
    keys.insert(root.substream("mc", i).key());
  }
  EXPECT_EQ(keys.size(), 2000u);
}

TEST(RandomStream, UniformInUnitInterval) {
  RandomStream r(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(RandomStream, BelowStaysInRangeAndCoversIt) {
  RandomStream r(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = r.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(RandomStream, ExponentialMean) {
  RandomStream r(9);
  double sum = 0.0;
  for (int i = 0; i < 200000; ++i) sum += r.exponential(2.0);
  EXPECT_NEAR(sum / 200000, 0.5, 0.005);
}

}  // namespace
}  // namespace ewboot
