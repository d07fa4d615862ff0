#include <gtest/gtest.h>

#include <cmath>

#include "spad/rng.hpp"

namespace spad {
namespace {

// Reference values from tests/oracles/reference.py.

TEST(SplitMix64, PublishedFirstOutput) {
  SplitMix64 sm(0);
  EXPECT_EQ(sm.next(), 0xE220A8397B1DCDAFULL);
}

TEST(Xoshiro256pp, FirstOutputMatchesReference) {
  Xoshiro256pp g(1);
  EXPECT_EQ(g.next(), 14971601782005023387ULL);
}

TEST(Rng, FirstNormalsMatchReference) {
  Rng rng(1);
  EXPECT_DOUBLE_EQ(rng.normal(), -0.033237095940591981);
  EXPECT_DOUBLE_EQ(rng.normal(), -1.8268552784710965);
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, IndexStaysInRange) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) ASSERT_LT(rng.index(7), 7u);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(DeriveSeed, DistinctIndicesGiveDistinctSeeds) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(3, 4), derive_seed(3, 4));
}

}  // namespace
}  // namespace spad
