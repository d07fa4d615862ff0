#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spad/vit.hpp"
#include "test_util.hpp"

namespace spad {
namespace {

// Straight-line forward for the default config, written independently of
// the library's matrix helpers. Returns the CLS embedding.
std::vector<double> reference_cls(const VitWeights& w, const Tensor& img) {
  constexpr int T = 17, D = 16, H = 2, DH = 8, M = 32;
  double x[T][D] = {};
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < D; ++j) {
      double e = 0.0;
      if (t > 0) {
        const int p = t - 1, py = p / 4, px = p % 4;
        e = w.patch_b[j];
        for (int r = 0; r < 4; ++r) {
          for (int c = 0; c < 4; ++c) e += img[(py * 4 + r) * 16 + px * 4 + c] * w.patch_w(r * 4 + c, j);
        }
      }
      x[t][j] = e + w.pos(t, j);
    }
  }
  auto norm = [](const double (&in)[D], const Tensor& g, const Tensor& b, double (&out)[D]) {
    double mu = 0.0, var = 0.0;
    for (double v : in) mu += v;
    mu /= D;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= D;
    for (int j = 0; j < D; ++j) out[j] = (in[j] - mu) / std::sqrt(var + 1e-5) * g[j] + b[j];
  };
  for (const auto& L : w.layers) {
    double y[T][D], q[T][D], k[T][D], v[T][D], mix[T][D] = {};
    for (int t = 0; t < T; ++t) {
      norm(x[t], L.ln1_scale, L.ln1_shift, y[t]);
      for (int j = 0; j < D; ++j) {
        q[t][j] = L.bq[j];
        k[t][j] = L.bk[j];
        v[t][j] = L.bv[j];
        for (int i = 0; i < D; ++i) {
          q[t][j] += y[t][i] * L.wq(i, j);
          k[t][j] += y[t][i] * L.wk(i, j);
          v[t][j] += y[t][i] * L.wv(i, j);
        }
      }
    }
    for (int h = 0; h < H; ++h) {
      for (int i = 0; i < T; ++i) {
        double s[T], mx = -1e300, z = 0.0;
        for (int j = 0; j < T; ++j) {
          s[j] = 0.0;
          for (int c = 0; c < DH; ++c) s[j] += q[i][h * DH + c] * k[j][h * DH + c];
          s[j] /= std::sqrt(double(DH));
          mx = std::max(mx, s[j]);
        }
        for (int j = 0; j < T; ++j) z += (s[j] = std::exp(s[j] - mx));
        for (int j = 0; j < T; ++j) {
          for (int c = 0; c < DH; ++c) mix[i][h * DH + c] += s[j] / z * v[j][h * DH + c];
        }
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < D; ++j) {
        double o = L.bo[j];
        for (int i = 0; i < D; ++i) o += mix[t][i] * L.wo(i, j);
        x[t][j] += o;
      }
      double y2[D], hid[M];
      norm(x[t], L.ln2_scale, L.ln2_shift, y2);
      for (int m = 0; m < M; ++m) {
        double a = L.b1[m];
        for (int i = 0; i < D; ++i) a += y2[i] * L.w1(i, m);
        hid[m] = 0.5 * a * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (a + 0.044715 * a * a * a)));
      }
      for (int j = 0; j < D; ++j) {
        double o = L.b2[j];
        for (int m = 0; m < M; ++m) o += hid[m] * L.w2(m, j);
        x[t][j] += o;
      }
    }
  }
  double out[D];
  norm(x[0], w.final_scale, w.final_shift, out);
  return {out, out + D};
}

TEST(VitConfig, DefaultsAreValid) {
  VitConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.tokens(), 17u);
  EXPECT_EQ(c.patch_count(), 16u);
}

TEST(VitConfig, RejectsBadShapes) {
  VitConfig c;
  c.patch = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  VitConfig d;
  d.d_model = 12;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  EXPECT_THROW(init_weights(d, 7), std::invalid_argument);
}

TEST(InitWeights, Deterministic) {
  std::ostringstream a, b;
  write_weights(a, init_weights(VitConfig{}, 7));
  write_weights(b, init_weights(VitConfig{}, 7));
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_weights(c, init_weights(VitConfig{}, 8));
  EXPECT_NE(a.str(), c.str());
}

TEST(InitWeights, NormScalesAreOneAndShiftsZero) {
  const auto w = init_weights(VitConfig{}, 7);
  for (const auto& l : w.layers) {
    for (double v : l.ln1_scale.data()) EXPECT_EQ(v, 1.0);
    for (double v : l.ln2_scale.data()) EXPECT_EQ(v, 1.0);
    for (double v : l.ln1_shift.data()) EXPECT_EQ(v, 0.0);
  }
  for (double v : w.final_scale.data()) EXPECT_EQ(v, 1.0);
}

TEST(InitWeights, PatchEmbeddingNormAnchor) {
  // Frozen from the independent Python initializer.
  EXPECT_NEAR(init_weights(VitConfig{}, 7).patch_w.frobenius_norm(), 3.6738242778731478, 1e-12);
}

TEST(Weights, SaveLoadRoundTrip) {
  const auto w = init_weights(VitConfig{}, 7);
  std::stringstream ss;
  write_weights(ss, w);
  EXPECT_EQ(ss.str().size(), 8 * 4 + 8 * w.parameter_count());
  const auto r = read_weights(ss);
  EXPECT_EQ(r.config, w.config);
  EXPECT_EQ(r.patch_w, w.patch_w);
  EXPECT_EQ(r.layers[1].w2, w.layers[1].w2);
  EXPECT_EQ(r.final_shift, w.final_shift);
}

TEST(Weights, TruncatedFileThrows) {
  std::stringstream ss;
  write_weights(ss, init_weights(VitConfig{}, 7));
  std::string s = ss.str();
  s.resize(s.size() - 3);
  std::stringstream in(s);
  EXPECT_THROW(read_weights(in), std::runtime_error);
}

TEST(Patchify, Shape) {
  const Tensor p = patchify(Tensor({16, 16, 1}), 4);
  EXPECT_EQ(p.shape(), (std::vector<std::size_t>{16, 16}));
}

TEST(Patchify, ConstantImage) {
  const Tensor p = patchify(Tensor({16, 16, 1}, 0.5), 4);
  for (double v : p.data()) EXPECT_EQ(v, 0.5);
}

TEST(Patchify, SinglePixelLocality) {
  Tensor img({16, 16, 1});
  img[0] = 1.0;
  const Tensor p = patchify(img, 4);
  double row0 = 0.0;
  for (double v : p.row(0)) row0 += v;
  EXPECT_EQ(row0, 1.0);
  EXPECT_EQ(p(0, 0), 1.0);
  for (std::size_t r = 1; r < 16; ++r) {
    for (double v : p.row(r)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Patchify, RowMajorPatchOrder) {
  Tensor img({16, 16, 1});
  img[5 * 16 + 9] = 1.0;  // y = 5, x = 9 -> patch (1, 2) = index 6, offset (1, 1) = 5
  const Tensor p = patchify(img, 4);
  EXPECT_EQ(p(6, 5), 1.0);
}

TEST(Patchify, NonDivisibleThrows) {
  EXPECT_THROW(patchify(Tensor({15, 16, 1}), 4), std::invalid_argument);
}

TEST(Patchify, UnpatchifyInverts) {
  const VitConfig c;
  const Tensor img = test::random_image(12);
  EXPECT_EQ(unpatchify(patchify(img, 4), c), img);
}

TEST(Gelu, PinnedTanhFormula) {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    const double want =
        0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
    EXPECT_DOUBLE_EQ(gelu(x), want);
  }
}

TEST(Gelu, DerivativeMatchesCentralDifference) {
  for (double x : {-2.0, -0.3, 0.0, 0.4, 1.9}) {
    const double h = 1e-6;
    EXPECT_NEAR(gelu_grad(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
}

TEST(Forward, AttentionRowsAreStochastic) {
  const auto w = init_weights(VitConfig{}, 7);
  const auto tr = forward(w, test::random_image(3));
  for (std::size_t l = 0; l < tr.depth; ++l) {
    for (std::size_t h = 0; h < tr.heads; ++h) {
      for (std::size_t i = 0; i < tr.tokens; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < tr.tokens; ++j) {
          const double a = tr.attention(l, h, i, j);
          EXPECT_GE(a, 0.0);
          EXPECT_LE(a, 1.0);
          s += a;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(Forward, Deterministic) {
  const auto w = init_weights(VitConfig{}, 7);
  const Tensor img = test::random_image(3);
  EXPECT_EQ(forward(w, img), forward(w, img));
}

TEST(Forward, TraceShapes) {
  const auto w = init_weights(VitConfig{}, 7);
  const auto tr = forward(w, test::random_image(3));
  EXPECT_EQ(tr.attn.shape(), (std::vector<std::size_t>{2, 2, 17, 17}));
  EXPECT_EQ(tr.values.shape(), (std::vector<std::size_t>{2, 2, 17, 8}));
  EXPECT_EQ(tr.cls_embedding.size(), 16u);
  EXPECT_EQ(tr.token_outputs.shape(), (std::vector<std::size_t>{17, 16}));
  EXPECT_TRUE(tr.attn.all_finite());
  EXPECT_TRUE(tr.token_outputs.all_finite());
}

TEST(Forward, ClsMatchesStraightLineReimplementation) {
  const auto w = init_weights(VitConfig{}, 7);
  const Tensor img = test::random_image(3);
  const auto tr = forward(w, img);
  const auto ref = reference_cls(w, img);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(tr.cls_embedding[j], ref[j], 1e-12);
}

TEST(Forward, ClsMatchesPythonOracle) {
  const auto tr = forward(init_weights(VitConfig{}, 7), test::random_image(3));
  EXPECT_NEAR(tr.cls_embedding[0], -0.26368271527630471, 1e-12);
  EXPECT_NEAR(tr.cls_embedding[15], -2.3458319794788016, 1e-12);
}

TEST(Forward, ShapeMismatchThrows) {
  const auto w = init_weights(VitConfig{}, 7);
  EXPECT_THROW(forward(w, Tensor({16, 12, 1})), std::invalid_argument);
}

}  // namespace
}  // namespace spad
