#include <gtest/gtest.h>

#include <cmath>

#include "spad/gradient.hpp"
#include "spad/losses.hpp"
#include "test_util.hpp"

namespace spad {
namespace {

class GradientTest : public ::testing::Test {
 protected:
  VitWeights w = init_weights(VitConfig{}, 7);
  PatchIndexSet psz{1, 2, 5};

  std::vector<double> perturbed_reference(const Tensor& img, std::uint64_t seed) const {
    auto ref = forward(w, img).cls_embedding;
    Rng rng(seed);
    for (auto& v : ref) v += 0.25 * rng.normal();
    return ref;
  }
};

TEST_F(GradientTest, EmptyAttentionSelectorHasZeroGradient) {
  const Tensor g = input_gradient(w, test::random_image(1), LossSelector::attention({}));
  EXPECT_EQ(g.max_abs(), 0.0);
  const Tensor fd = finite_diff_gradient(w, test::random_image(1), LossSelector::attention({}));
  EXPECT_EQ(fd.max_abs(), 0.0);
}

TEST_F(GradientTest, WeightedScalesExactly) {
  const Tensor img = test::random_image(2);
  const Tensor g1 = input_gradient(w, img, LossSelector::attention(psz));
  const Tensor g2 =
      input_gradient(w, img, LossSelector::weighted({{LossSelector::attention(psz), 2.0}}));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g2[i], 2.0 * g1[i]);
}

TEST_F(GradientTest, WeightedIsLinearInComponents) {
  const Tensor img = test::random_image(4);
  const auto ref = perturbed_reference(img, 4);
  const auto ga = input_gradient(w, img, LossSelector::attention(psz));
  const auto gv = input_gradient(w, img, LossSelector::value(psz));
  const auto gs = input_gradient(w, img, LossSelector::semantic(ref));
  const auto gw = input_gradient(w, img,
                                 LossSelector::weighted({{LossSelector::attention(psz), 0.7},
                                                         {LossSelector::value(psz), 1.3},
                                                         {LossSelector::semantic(ref), 2.1}}));
  for (std::size_t i = 0; i < gw.size(); ++i) {
    EXPECT_NEAR(gw[i], 0.7 * ga[i] + 1.3 * gv[i] + 2.1 * gs[i], 1e-12);
  }
}

TEST_F(GradientTest, NestedWeightedMultipliesWeights) {
  const Tensor img = test::random_image(6);
  const auto inner = LossSelector::weighted({{LossSelector::value(psz), 3.0}});
  const auto outer = LossSelector::weighted({{inner, 0.5}});
  const auto g = input_gradient(w, img, outer);
  const auto gv = input_gradient(w, img, LossSelector::value(psz));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 1.5 * gv[i], 1e-12);
  EXPECT_NEAR(selector_loss(forward(w, img), outer), 1.5 * value_loss(forward(w, img), psz), 1e-12);
}

TEST_F(GradientTest, MatchesFiniteDifferencesForEverySelector) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const Tensor img = test::random_image(seed);
    const auto ref = perturbed_reference(img, seed);
    const LossSelector sels[] = {
        LossSelector::attention(psz),
        LossSelector::value(psz),
        LossSelector::semantic(ref),
        LossSelector::weighted({{LossSelector::semantic(ref), 1.0},
                                {LossSelector::attention(psz), 1.0},
                                {LossSelector::value(psz), 0.5}}),
    };
    for (const auto& sel : sels) {
      const double err =
          max_relative_error(input_gradient(w, img, sel), finite_diff_gradient(w, img, sel));
      EXPECT_LT(err, 1e-4) << "image seed " << seed << " selector " << sel.term.index();
    }
  }
}

TEST_F(GradientTest, FiniteDifferencesConvergeAsStepShrinks) {
  const Tensor img = test::random_image(8);
  const auto sel = LossSelector::attention(psz);
  const Tensor coarse = finite_diff_gradient(w, img, sel, 1e-4);
  const Tensor fine = finite_diff_gradient(w, img, sel, 1e-5);
  double diff = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i) diff = std::max(diff, std::abs(coarse[i] - fine[i]));
  EXPECT_LT(diff / fine.max_abs(), 1e-5);
}

TEST_F(GradientTest, DeterministicGradient) {
  const Tensor img = test::random_image(9);
  EXPECT_EQ(input_gradient(w, img, LossSelector::value(psz)),
            input_gradient(w, img, LossSelector::value(psz)));
}

TEST_F(GradientTest, InvalidSelectorsThrow) {
  const Tensor img = test::random_image(1);
  EXPECT_THROW(input_gradient(w, img, LossSelector::attention({16})), std::out_of_range);
  EXPECT_THROW(input_gradient(w, img, LossSelector::value({99})), std::out_of_range);
  EXPECT_THROW(input_gradient(w, img, LossSelector::semantic(std::vector<double>(3, 1.0))),
               std::invalid_argument);
  EXPECT_THROW(input_gradient(w, img,
                              LossSelector::weighted({{LossSelector::attention(psz), NAN}})),
               std::invalid_argument);
}

TEST_F(GradientTest, SemanticAtReferenceHasNearZeroGradient) {
  // Cosine distance is minimal at e_safe = e_ref.
  const Tensor img = test::random_image(10);
  const auto g = input_gradient(w, img, LossSelector::semantic(forward(w, img).cls_embedding));
  EXPECT_LT(g.max_abs(), 1e-12);
}

}  // namespace
}  // namespace spad
