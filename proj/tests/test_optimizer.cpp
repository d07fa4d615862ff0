#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spad/gradient.hpp"
#include "spad/optimizer.hpp"
#include "spad/scene.hpp"
#include "test_util.hpp"

namespace spad {
namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

SpadConfig wide(double alpha) {
  SpadConfig c;
  c.alpha = alpha;
  c.epsilon = 1.0;
  return c;
}

TEST(Sign, ExamplesAndIdempotence) {
  const Tensor s = sign(vec({-3.5, 0.0, 2e-300, -0.0}));
  EXPECT_EQ(s, vec({-1.0, 0.0, 1.0, 0.0}));
  EXPECT_EQ(sign(s), s);
}

TEST(SpadStep, ZeroGradientLeavesDeltaUnchanged) {
  const Tensor x = vec({0.5, 0.5});
  const auto r = spad_step(vec({0.02, -0.01}), vec({0.0, 0.0}), SpadConfig{}, x);
  EXPECT_NEAR(r.delta[0], 0.02, 1e-15);
  EXPECT_NEAR(r.delta[1], -0.01, 1e-15);
}

TEST(SpadStep, MovesAgainstGradientSign) {
  const auto r = spad_step(vec({0, 0, 0}), vec({2.0, -3.0, 0.0}), wide(0.1), vec({0.5, 0.5, 0.5}));
  EXPECT_NEAR(r.delta[0], -0.1, 1e-15);
  EXPECT_NEAR(r.delta[1], 0.1, 1e-15);
  EXPECT_EQ(r.delta[2], 0.0);
}

TEST(SpadStep, ClampsToBudget) {
  SpadConfig c;
  c.alpha = 0.1;
  c.epsilon = 0.05;
  const auto r = spad_step(vec({0.0, 0.0}), vec({1.0, -1.0}), c, vec({0.5, 0.5}));
  EXPECT_NEAR(r.delta[0], -0.05, 1e-15);
  EXPECT_NEAR(r.delta[1], 0.05, 1e-15);
  EXPECT_LE(std::abs(r.delta[0]), c.epsilon);
  EXPECT_LE(std::abs(r.delta[1]), c.epsilon);
}

TEST(SpadStep, ClampsToImageRange) {
  const auto r = spad_step(vec({0.0, 0.0}), vec({1.0, -1.0}), wide(0.05), vec({0.0, 1.0}));
  EXPECT_EQ(r.delta[0], 0.0);
  EXPECT_EQ(r.x_safe[0], 0.0);
  EXPECT_EQ(r.delta[1], 0.0);
  EXPECT_EQ(r.x_safe[1], 1.0);
}

TEST(SpadStep, ShapeMismatchThrows) {
  EXPECT_THROW(spad_step(vec({0.0}), vec({0.0, 1.0}), SpadConfig{}, vec({0.0})),
               std::invalid_argument);
}

TEST(SpadStep, BudgetAndRangeHoldForRandomInputs) {
  Rng rng(5);
  SpadConfig c;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x({64}), d({64}), g({64});
    for (std::size_t i = 0; i < 64; ++i) {
      x[i] = rng.uniform();
      d[i] = (2.0 * rng.uniform() - 1.0) * c.epsilon;
      g[i] = rng.normal();
    }
    auto r = spad_step(d, g, c, x);
    for (int k = 0; k < 20; ++k) {
      for (std::size_t i = 0; i < 64; ++i) {
        ASSERT_LE(std::abs(r.delta[i]), c.epsilon);
        ASSERT_GE(r.x_safe[i], 0.0);
        ASSERT_LE(r.x_safe[i], 1.0);
        ASSERT_EQ(r.x_safe[i], x[i] + r.delta[i]);
      }
      r = spad_step(r.delta, g, c, x);
    }
  }
}

TEST(SpadConfig, Validation) {
  SpadConfig c;
  c.alpha = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SpadConfig{};
  c.epsilon = NAN;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SpadConfig{};
  c.alpha = 0.0;
  c.iters = 0;
  EXPECT_NO_THROW(c.validate());
}

class OptimizeTest : public ::testing::Test {
 protected:
  VitWeights w = init_weights(VitConfig{}, 7);
  Scene scene = generate_scene(random_scene_spec(11));
  PatchIndexSet psz = mask_to_patches(scene.mask, 4);
};

TEST_F(OptimizeTest, ZeroStepSizeKeepsImage) {
  SpadConfig c;
  c.alpha = 0.0;
  c.iters = 1;
  const auto r = spad_optimize(w, scene.image, psz, c);
  EXPECT_EQ(r.x_safe, scene.image);
  EXPECT_EQ(r.trace.records.size(), 2u);
}

TEST_F(OptimizeTest, ZeroIterationsKeepsImage) {
  SpadConfig c;
  c.iters = 0;
  const auto r = spad_optimize(w, scene.image, psz, c);
  EXPECT_EQ(r.x_safe, scene.image);
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_NEAR(r.trace.records[0].loss.sem, 0.0, 1e-15);
}

TEST_F(OptimizeTest, EmptyZoneWithoutSemanticTermKeepsImage) {
  SpadConfig c;
  c.iters = 5;
  c.weights.w_sem = 0.0;
  const auto r = spad_optimize(w, scene.image, {}, c);
  EXPECT_EQ(r.x_safe, scene.image);
  for (const auto& rec : r.trace.records) EXPECT_EQ(rec.psz_mass_fraction, 0.0);
}

TEST_F(OptimizeTest, Deterministic) {
  SpadConfig c;
  c.iters = 10;
  const auto a = spad_optimize(w, scene.image, psz, c);
  const auto b = spad_optimize(w, scene.image, psz, c);
  EXPECT_EQ(a.x_safe, b.x_safe);
  EXPECT_EQ(a.trace.delta, b.trace.delta);
}

TEST_F(OptimizeTest, BadZoneThrows) {
  EXPECT_THROW(spad_optimize(w, scene.image, {16}, SpadConfig{}), std::out_of_range);
}

TEST_F(OptimizeTest, PinnedSceneRegressionAnchors) {
  const auto r = spad_optimize(w, scene.image, psz, SpadConfig{});
  ASSERT_EQ(r.trace.records.size(), 101u);
  const auto& first = r.trace.records.front();
  const auto& last = r.trace.records.back();
  EXPECT_EQ(psz, (PatchIndexSet{1, 2}));
  EXPECT_LT(last.loss.total, first.loss.total);
  EXPECT_NEAR(first.loss.total, 18.453961823578631, 1e-9);
  EXPECT_NEAR(last.loss.total, 15.064300213883632, 1e-9);
  EXPECT_NEAR(first.psz_mass_fraction, 0.13606912683698436, 1e-9);
  EXPECT_NEAR(last.psz_mass_fraction, 0.094200844149984711, 1e-9);
  EXPECT_LE(r.trace.delta.max_abs(), SpadConfig{}.epsilon);
}

TEST_F(OptimizeTest, TraceCsvLayout) {
  SpadConfig c;
  c.iters = 3;
  std::ostringstream out;
  write_trace_csv(out, spad_optimize(w, scene.image, psz, c).trace);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,L_total,L_sem,L_att,L_val,psz_mass_fraction");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

}  // namespace
}  // namespace spad
