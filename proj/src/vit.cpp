#include "spad/vit.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "spad/rng.hpp"
#include "vit_internal.hpp"

namespace spad {

namespace {

// out (n x m) = a (n x k) * b (k x m)
Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * b(p, j);
    }
  }
  return out;
}

// out (n x k) = a b^T, a is n x m, b is k x m
Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), m = a.dim(1), k = b.dim(0);
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < m; ++p) s += a(i, p) * b(j, p);
      out(i, j) = s;
    }
  }
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  for (std::size_t i = 0; i < y.dim(0); ++i) {
    for (std::size_t j = 0; j < y.dim(1); ++j) y(i, j) += b[j];
  }
  return y;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift,
                  detail::NormCache& cache) {
  const std::size_t rows = x.dim(0), d = x.dim(1);
  cache.xhat = Tensor({rows, d});
  cache.rstd.assign(rows, 0.0);
  Tensor y({rows, d});
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[i] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (x(i, j) - mean) * rstd;
      cache.xhat(i, j) = xh;
      y(i, j) = xh * scale[j] + shift[j];
    }
  }
  return y;
}

Tensor layer_norm_backward(const Tensor& dy, const Tensor& scale, const detail::NormCache& cache) {
  const std::size_t rows = dy.dim(0), d = dy.dim(1);
  Tensor dx({rows, d});
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dxhat[j] = dy(i, j) * scale[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * cache.xhat(i, j);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) = cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("weights: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("weights: truncated body");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

template <typename Weights, typename Fn>
void visit_parameters(Weights& w, Fn&& fn) {
  fn("patch_w", ParamKind::Matrix, w.patch_w);
  fn("patch_b", ParamKind::Bias, w.patch_b);
  fn("pos", ParamKind::Positional, w.pos);
  for (auto& layer : w.layers) {
    fn("ln1_scale", ParamKind::NormScale, layer.ln1_scale);
    fn("ln1_shift", ParamKind::NormShift, layer.ln1_shift);
    fn("wq", ParamKind::Matrix, layer.wq);
    fn("bq", ParamKind::Bias, layer.bq);
    fn("wk", ParamKind::Matrix, layer.wk);
    fn("bk", ParamKind::Bias, layer.bk);
    fn("wv", ParamKind::Matrix, layer.wv);
    fn("bv", ParamKind::Bias, layer.bv);
    fn("wo", ParamKind::Matrix, layer.wo);
    fn("bo", ParamKind::Bias, layer.bo);
    fn("ln2_scale", ParamKind::NormScale, layer.ln2_scale);
    fn("ln2_shift", ParamKind::NormShift, layer.ln2_shift);
    fn("w1", ParamKind::Matrix, layer.w1);
    fn("b1", ParamKind::Bias, layer.b1);
    fn("w2", ParamKind::Matrix, layer.w2);
    fn("b2", ParamKind::Bias, layer.b2);
  }
  fn("final_scale", ParamKind::NormScale, w.final_scale);
  fn("final_shift", ParamKind::NormShift, w.final_shift);
}

// Allocates every parameter at its configured shape, zero-filled.
VitWeights allocate_weights(const VitConfig& c) {
  const std::size_t d = c.d_model, m = c.mlp_hidden;
  VitWeights w;
  w.config = c;
  w.patch_w = Tensor({c.patch_dim(), d});
  w.patch_b = Tensor({d});
  w.pos = Tensor({c.tokens(), d});
  w.layers.resize(c.depth);
  for (auto& l : w.layers) {
    l.ln1_scale = Tensor({d});
    l.ln1_shift = Tensor({d});
    l.wq = Tensor({d, d});
    l.bq = Tensor({d});
    l.wk = Tensor({d, d});
    l.bk = Tensor({d});
    l.wv = Tensor({d, d});
    l.bv = Tensor({d});
    l.wo = Tensor({d, d});
    l.bo = Tensor({d});
    l.ln2_scale = Tensor({d});
    l.ln2_shift = Tensor({d});
    l.w1 = Tensor({d, m});
    l.b1 = Tensor({m});
    l.w2 = Tensor({m, d});
    l.b2 = Tensor({d});
  }
  w.final_scale = Tensor({d});
  w.final_shift = Tensor({d});
  return w;
}

}  // namespace

void VitConfig::validate() const {
  if (image_h == 0 || image_w == 0 || channels == 0 || patch == 0 || depth == 0 || heads == 0 ||
      d_head == 0 || mlp_hidden == 0) {
    throw std::invalid_argument("vit config: all dimensions must be positive");
  }
  if (image_h % patch != 0 || image_w % patch != 0) {
    throw std::invalid_argument("vit config: image dimensions not divisible by patch size");
  }
  if (d_model != heads * d_head) {
    throw std::invalid_argument("vit config: d_model must equal heads * d_head");
  }
}

void VitWeights::for_each_parameter(
    const std::function<void(std::string_view, ParamKind, Tensor&)>& fn) {
  visit_parameters(*this, fn);
}

void VitWeights::for_each_parameter(
    const std::function<void(std::string_view, ParamKind, const Tensor&)>& fn) const {
  visit_parameters(*this, fn);
}

std::size_t VitWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](std::string_view, ParamKind, const Tensor& t) { n += t.size(); });
  return n;
}

VitWeights init_weights(const VitConfig& config, std::uint64_t seed) {
  config.validate();
  VitWeights w = allocate_weights(config);
  Rng rng(seed);
  w.for_each_parameter([&](std::string_view, ParamKind kind, Tensor& t) {
    switch (kind) {
      case ParamKind::Matrix:
      case ParamKind::Positional: {
        // Positional rows are scaled by their width, matrices by fan_in.
        const double scale = 1.0 / std::sqrt(static_cast<double>(
                                       kind == ParamKind::Matrix ? t.dim(0) : t.dim(1)));
        for (auto& v : t.data()) v = rng.normal() * scale;
        break;
      }
      case ParamKind::NormScale:
        for (auto& v : t.data()) v = 1.0;
        break;
      case ParamKind::Bias:
      case ParamKind::NormShift:
        break;
    }
  });
  return w;
}

void write_weights(std::ostream& out, const VitWeights& weights) {
  const VitConfig& c = weights.config;
  for (std::uint32_t v : {c.image_h, c.image_w, c.channels, c.patch, c.depth, c.heads, c.d_head,
                          c.mlp_hidden}) {
    write_u32(out, v);
  }
  weights.for_each_parameter([&](std::string_view, ParamKind, const Tensor& t) {
    for (double v : t.data()) write_f64(out, v);
  });
}

VitWeights read_weights(std::istream& in) {
  VitConfig c;
  c.image_h = read_u32(in);
  c.image_w = read_u32(in);
  c.channels = read_u32(in);
  c.patch = read_u32(in);
  c.depth = read_u32(in);
  c.heads = read_u32(in);
  c.d_head = read_u32(in);
  c.mlp_hidden = read_u32(in);
  c.d_model = c.heads * c.d_head;
  c.validate();
  VitWeights w = allocate_weights(c);
  w.for_each_parameter([&](std::string_view, ParamKind, Tensor& t) {
    for (auto& v : t.data()) v = read_f64(in);
  });
  return w;
}

void save_weights(const std::string& path, const VitWeights& weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weights file " + path);
  write_weights(out, weights);
}

VitWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights file " + path);
  return read_weights(in);
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) throw std::invalid_argument("patchify: expected H x W x C image");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument("patchify: image dimensions not divisible by patch size");
  }
  const std::size_t grid_w = w / patch;
  const std::size_t count = (h / patch) * grid_w;
  const std::size_t pdim = patch * patch * c;
  Tensor out({count, pdim});
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t oy = (p / grid_w) * patch, ox = (p % grid_w) * patch;
    std::size_t k = 0;
    for (std::size_t y = 0; y < patch; ++y) {
      for (std::size_t x = 0; x < patch; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) out(p, k++) = image[((oy + y) * w + ox + x) * c + ch];
      }
    }
  }
  return out;
}

Tensor unpatchify(const Tensor& patches, const VitConfig& config) {
  const std::size_t w = config.image_w, c = config.channels, patch = config.patch;
  const std::size_t grid_w = w / patch;
  Tensor image(config.image_shape());
  for (std::size_t p = 0; p < patches.dim(0); ++p) {
    const std::size_t oy = (p / grid_w) * patch, ox = (p % grid_w) * patch;
    std::size_t k = 0;
    for (std::size_t y = 0; y < patch; ++y) {
      for (std::size_t x = 0; x < patch; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) image[((oy + y) * w + ox + x) * c + ch] = patches(p, k++);
      }
    }
  }
  return image;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

ForwardTrace forward(const VitWeights& weights, const Tensor& image) {
  return detail::run_forward(weights, image, nullptr);
}

namespace detail {

TraceGrad zero_trace_grad(const VitConfig& c) {
  const std::size_t t = c.tokens();
  TraceGrad g;
  g.d_attn = Tensor({c.depth, c.heads, t, t});
  g.d_values = Tensor({c.depth, c.heads, t, c.d_head});
  g.d_tokens = Tensor({t, c.d_model});
  return g;
}

ForwardTrace run_forward(const VitWeights& weights, const Tensor& image, ForwardCache* cache) {
  const VitConfig& c = weights.config;
  if (image.shape() != c.image_shape()) {
    throw std::invalid_argument("forward: image shape does not match model config");
  }
  const std::size_t T = c.tokens(), D = c.d_model, H = c.heads, dh = c.d_head;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.patches = patchify(image, c.patch);
  fc.layers.assign(c.depth, LayerCache{});

  ForwardTrace trace;
  trace.depth = c.depth;
  trace.heads = H;
  trace.tokens = T;
  trace.d_head = dh;
  trace.attn = Tensor({c.depth, H, T, T});
  trace.values = Tensor({c.depth, H, T, dh});

  // Token 0 is CLS (zero embedding), tokens 1..P are embedded patches.
  Tensor embedded = affine(fc.patches, weights.patch_w, weights.patch_b);
  Tensor x({T, D});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < D; ++j) {
      x(t, j) = weights.pos(t, j) + (t == 0 ? 0.0 : embedded(t - 1, j));
    }
  }

  for (std::size_t l = 0; l < c.depth; ++l) {
    const LayerWeights& lw = weights.layers[l];
    LayerCache& lc = fc.layers[l];
    lc.input = x;
    lc.y1 = layer_norm(x, lw.ln1_scale, lw.ln1_shift, lc.ln1);
    lc.q = affine(lc.y1, lw.wq, lw.bq);
    lc.k = affine(lc.y1, lw.wk, lw.bk);
    lc.v = affine(lc.y1, lw.wv, lw.bv);
    lc.attn = Tensor({H, T, T});
    lc.mixed = Tensor({T, D});
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < T; ++i) {
        std::vector<double> logits(T);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < T; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < dh; ++k) s += lc.q(i, off + k) * lc.k(j, off + k);
          logits[j] = s * scale;
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (auto& v : logits) {
          v = std::exp(v - mx);
          z += v;
        }
        for (std::size_t j = 0; j < T; ++j) {
          const double a = logits[j] / z;
          lc.attn[(h * T + i) * T + j] = a;
          trace.attn[((l * H + h) * T + i) * T + j] = a;
          for (std::size_t k = 0; k < dh; ++k) lc.mixed(i, off + k) += a * lc.v(j, off + k);
        }
      }
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < dh; ++k) {
          trace.values[((l * H + h) * T + t) * dh + k] = lc.v(t, off + k);
        }
      }
    }
    Tensor projected = affine(lc.mixed, lw.wo, lw.bo);
    add_into(x, projected);
    lc.resid = x;
    lc.y2 = layer_norm(x, lw.ln2_scale, lw.ln2_shift, lc.ln2);
    lc.hidden = affine(lc.y2, lw.w1, lw.b1);
    lc.act = lc.hidden;
    for (auto& v : lc.act.data()) v = gelu(v);
    Tensor mlp_out = affine(lc.act, lw.w2, lw.b2);
    add_into(x, mlp_out);
  }

  fc.final_in = x;
  trace.token_outputs = layer_norm(x, weights.final_scale, weights.final_shift, fc.final_norm);
  const auto cls = trace.token_outputs.row(0);
  trace.cls_embedding.assign(cls.begin(), cls.end());
  return trace;
}

Tensor backward_to_image(const VitWeights& weights, const ForwardCache& fc, const TraceGrad& grad) {
  const VitConfig& c = weights.config;
  const std::size_t T = c.tokens(), D = c.d_model, H = c.heads, dh = c.d_head;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor dx = layer_norm_backward(grad.d_tokens, weights.final_scale, fc.final_norm);

  for (std::size_t l = c.depth; l-- > 0;) {
    const LayerWeights& lw = weights.layers[l];
    const LayerCache& lc = fc.layers[l];

    // MLP branch: x_out = resid + W2 gelu(W1 LN2(resid)).
    Tensor d_act = matmul_nt(dx, lw.w2);
    for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= gelu_grad(lc.hidden[i]);
    Tensor d_y2 = matmul_nt(d_act, lw.w1);
    Tensor d_resid = dx;
    add_into(d_resid, layer_norm_backward(d_y2, lw.ln2_scale, lc.ln2));

    // Attention branch: resid = input + Wo mix(LN1(input)).
    Tensor d_mixed = matmul_nt(d_resid, lw.wo);
    Tensor dq({T, D}), dk({T, D}), dv({T, D});
    std::vector<double> d_a(T);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      const double* a = lc.attn.data().data() + h * T * T;
      const double* tap_a = grad.d_attn.data().data() + (l * H + h) * T * T;
      const double* tap_v = grad.d_values.data().data() + (l * H + h) * T * dh;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < dh; ++k) dv(t, off + k) += tap_v[t * dh + k];
      }
      for (std::size_t i = 0; i < T; ++i) {
        double row_dot = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          double s = tap_a[i * T + j];
          for (std::size_t k = 0; k < dh; ++k) s += d_mixed(i, off + k) * lc.v(j, off + k);
          d_a[j] = s;
          row_dot += s * a[i * T + j];
          const double aij = a[i * T + j];
          for (std::size_t k = 0; k < dh; ++k) dv(j, off + k) += aij * d_mixed(i, off + k);
        }
        for (std::size_t j = 0; j < T; ++j) {
          const double d_logit = a[i * T + j] * (d_a[j] - row_dot) * scale;
          if (d_logit == 0.0) continue;
          for (std::size_t k = 0; k < dh; ++k) {
            dq(i, off + k) += d_logit * lc.k(j, off + k);
            dk(j, off + k) += d_logit * lc.q(i, off + k);
          }
        }
      }
    }
    Tensor d_y1 = matmul_nt(dq, lw.wq);
    add_into(d_y1, matmul_nt(dk, lw.wk));
    add_into(d_y1, matmul_nt(dv, lw.wv));
    dx = d_resid;
    add_into(dx, layer_norm_backward(d_y1, lw.ln1_scale, lc.ln1));
  }

  // Embedding: tokens 1..P came from patches * patch_w.
  Tensor d_embedded({T - 1, D});
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < D; ++j) d_embedded(t - 1, j) = dx(t, j);
  }
  Tensor d_patches = matmul_nt(d_embedded, weights.patch_w);
  return unpatchify(d_patches, c);
}

}  // namespace detail

}  // namespace spad
