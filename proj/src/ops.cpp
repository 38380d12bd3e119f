#include "aind/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace aind::ops {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

template <typename T>
Var<T> new_output(Shape shape) {
  return make_var(Tensor<T>(shape));
}

template <typename T>
void require(const Var<T>& v, const char* what) {
  if (!v) throw ShapeError(std::string(what) + ": null input");
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
  require(a, what);
  require(b, what);
  if (a->shape() != b->shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a->shape().str() + " vs " +
                     b->shape().str());
  }
}

// Row r = (n, oy, ox) window; column (ky, kx, c). Out-of-range taps are zero.
template <typename T>
void im2col(const T* img, const Shape& s, int k, int stride, int pad, int ho, int wo, T* cols) {
  const std::size_t ch = static_cast<std::size_t>(s.c);
  const std::size_t row_len = static_cast<std::size_t>(k) * k * ch;
  for (int n = 0; n < s.n; ++n) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        T* row = cols + ((static_cast<std::size_t>(n) * ho + oy) * wo + ox) * row_len;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            T* dst = row + (static_cast<std::size_t>(ky) * k + kx) * ch;
            if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) {
              std::fill(dst, dst + ch, T{0});
            } else {
              const T* src = img + ((static_cast<std::size_t>(n) * s.h + iy) * s.w + ix) * ch;
              std::memcpy(dst, src, ch * sizeof(T));
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates window columns back into the image.
template <typename T>
void col2im(const T* cols, const Shape& s, int k, int stride, int pad, int ho, int wo, T* img) {
  const std::size_t ch = static_cast<std::size_t>(s.c);
  const std::size_t row_len = static_cast<std::size_t>(k) * k * ch;
  for (int n = 0; n < s.n; ++n) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const T* row = cols + ((static_cast<std::size_t>(n) * ho + oy) * wo + ox) * row_len;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            const T* src = row + (static_cast<std::size_t>(ky) * k + kx) * ch;
            T* dst = img + ((static_cast<std::size_t>(n) * s.h + iy) * s.w + ix) * ch;
            for (std::size_t c = 0; c < ch; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias(Tensor<T>& out, const Tensor<T>& bias) {
  const std::size_t ch = static_cast<std::size_t>(out.shape().c);
  if (bias.size() != ch) {
    throw ShapeError("bias has " + std::to_string(bias.size()) + " values, expected " +
                     std::to_string(ch));
  }
  auto o = out.data();
  auto b = bias.data();
  for (std::size_t i = 0; i < o.size(); i += ch) {
    for (std::size_t c = 0; c < ch; ++c) o[i + c] += b[c];
  }
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& out, Tensor<T>& bias) {
  bias.ensure_grad();
  const std::size_t ch = static_cast<std::size_t>(out.shape().c);
  auto g = out.grad();
  auto db = bias.grad();
  for (std::size_t i = 0; i < g.size(); i += ch) {
    for (std::size_t c = 0; c < ch; ++c) db[c] += g[i + c];
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weight, const Var<T>& bias,
              int stride, int pad) {
  require(input, "conv2d");
  require(weight, "conv2d");
  const Shape xs = input->shape();
  const Shape ws = weight->shape();
  if (ws.n != ws.h || ws.n <= 0) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (ws.w != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                     std::to_string(ws.w));
  }
  if (stride <= 0) throw ConfigError("conv2d: stride must be positive");
  if (pad < 0) throw ConfigError("conv2d: pad must be non-negative");
  const int k = ws.n;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (xs.h + 2 * pad < k || xs.w + 2 * pad < k || ho <= 0 || wo <= 0) {
    throw ShapeError("conv2d: input " + xs.str() + " smaller than kernel");
  }
  const Shape os{xs.n, ho, wo, ws.c};
  const Eigen::Index rows = static_cast<Eigen::Index>(xs.n) * ho * wo;
  const Eigen::Index depth = static_cast<Eigen::Index>(k) * k * xs.c;
  const Eigen::Index cout = ws.c;

  auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows * depth));
  im2col(input->data().data(), xs, k, stride, pad, ho, wo, cols->data());

  auto out = new_output<T>(os);
  MapRM<T>(out->data().data(), rows, cout).noalias() =
      CMapRM<T>(cols->data(), rows, depth) * CMapRM<T>(weight->data().data(), depth, cout);
  if (bias) add_bias(*out, *bias);

  if (tape.wants({&input, &weight, &bias})) {
    out->set_requires_grad(true);
    tape.record([input, weight, bias, out, cols, xs, k, stride, pad, ho, wo, rows, depth, cout] {
      if (!out->has_grad()) return;
      CMapRM<T> g(out->grad().data(), rows, cout);
      if (weight->requires_grad()) {
        weight->ensure_grad();
        MapRM<T>(weight->grad().data(), depth, cout).noalias() +=
            CMapRM<T>(cols->data(), rows, depth).transpose() * g;
      }
      if (bias && bias->requires_grad()) accumulate_bias_grad(*out, *bias);
      if (input->requires_grad()) {
        std::vector<T> dcols(static_cast<std::size_t>(rows * depth));
        MapRM<T>(dcols.data(), rows, depth).noalias() =
            g * CMapRM<T>(weight->data().data(), depth, cout).transpose();
        input->ensure_grad();
        col2im(dcols.data(), xs, k, stride, pad, ho, wo, input->grad().data());
      }
    });
  }
  return out;
}

template <typename T>
Var<T> transposed_conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weight,
                         const Var<T>& bias, int stride) {
  require(input, "transposed_conv2d");
  require(weight, "transposed_conv2d");
  if (stride <= 0) throw ConfigError("transposed_conv2d: stride must be positive");
  const Shape xs = input->shape();
  const Shape ws = weight->shape();
  if (ws.n != ws.h || ws.n <= 0) {
    throw ShapeError("transposed_conv2d: kernel must be square, got " + ws.str());
  }
  if (ws.c != xs.c) {
    throw ShapeError("transposed_conv2d: input has " + std::to_string(xs.c) +
                     " channels, kernel expects " + std::to_string(ws.c));
  }
  const int k = ws.n;
  const Shape os{xs.n, (xs.h - 1) * stride + k, (xs.w - 1) * stride + k, ws.w};
  const Eigen::Index rows = static_cast<Eigen::Index>(xs.n) * xs.h * xs.w;
  const Eigen::Index depth = static_cast<Eigen::Index>(k) * k * ws.w;
  const Eigen::Index cin = xs.c;

  std::vector<T> cols(static_cast<std::size_t>(rows * depth));
  MapRM<T>(cols.data(), rows, depth).noalias() =
      CMapRM<T>(input->data().data(), rows, cin) *
      CMapRM<T>(weight->data().data(), depth, cin).transpose();
  auto out = new_output<T>(os);
  col2im(cols.data(), os, k, stride, 0, xs.h, xs.w, out->data().data());
  if (bias) add_bias(*out, *bias);

  if (tape.wants({&input, &weight, &bias})) {
    out->set_requires_grad(true);
    tape.record([input, weight, bias, out, xs, os, k, stride, rows, depth, cin] {
      if (!out->has_grad()) return;
      std::vector<T> gcols(static_cast<std::size_t>(rows * depth));
      im2col(out->grad().data(), os, k, stride, 0, xs.h, xs.w, gcols.data());
      CMapRM<T> g(gcols.data(), rows, depth);
      if (input->requires_grad()) {
        input->ensure_grad();
        MapRM<T>(input->grad().data(), rows, cin).noalias() +=
            g * CMapRM<T>(weight->data().data(), depth, cin);
      }
      if (weight->requires_grad()) {
        weight->ensure_grad();
        MapRM<T>(weight->grad().data(), depth, cin).noalias() +=
            g.transpose() * CMapRM<T>(input->data().data(), rows, cin);
      }
      if (bias && bias->requires_grad()) accumulate_bias_grad(*out, *bias);
    });
  }
  return out;
}

template <typename T>
Var<T> avg_pool(Tape<T>& tape, const Var<T>& input, int k) {
  require(input, "avg_pool");
  if (k <= 0) throw ConfigError("avg_pool: window must be positive");
  const Shape xs = input->shape();
  if (xs.h == 0 || xs.w == 0) throw ShapeError("avg_pool: empty input");
  const Shape os{xs.n, (xs.h + k - 1) / k, (xs.w + k - 1) / k, xs.c};
  const T inv = T{1} / static_cast<T>(k * k);
  auto out = new_output<T>(os);
  const Tensor<T>& x = *input;
  Tensor<T>& o = *out;
  for (int n = 0; n < os.n; ++n) {
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        T* dst = &o.at(n, oy, ox, 0);
        for (int dy = 0; dy < k; ++dy) {
          const int iy = std::min(oy * k + dy, xs.h - 1);
          for (int dx = 0; dx < k; ++dx) {
            const int ix = std::min(ox * k + dx, xs.w - 1);
            const T* src = &x.at(n, iy, ix, 0);
            for (int c = 0; c < xs.c; ++c) dst[c] += src[c];
          }
        }
        for (int c = 0; c < xs.c; ++c) dst[c] *= inv;
      }
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, xs, os, k, inv] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto gi = input->grad();
      auto go = out->grad();
      for (int n = 0; n < os.n; ++n) {
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox) {
            const T* g = &go[out->index(n, oy, ox, 0)];
            for (int dy = 0; dy < k; ++dy) {
              const int iy = std::min(oy * k + dy, xs.h - 1);
              for (int dx = 0; dx < k; ++dx) {
                const int ix = std::min(ox * k + dx, xs.w - 1);
                T* dst = &gi[input->index(n, iy, ix, 0)];
                for (int c = 0; c < xs.c; ++c) dst[c] += g[c] * inv;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

namespace {

struct LinearTap {
  int i0;
  int i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LinearTap> linear_taps(int in, int factor) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(in) * factor);
  for (int o = 0; o < in * factor; ++o) {
    double u = (o + 0.5) / factor - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(in - 1));
    const int i0 = std::min(static_cast<int>(std::floor(u)), in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, u - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> upsample_linear(Tape<T>& tape, const Var<T>& input, int factor) {
  require(input, "upsample_linear");
  if (factor <= 0) throw ConfigError("upsample_linear: factor must be positive");
  const Shape xs = input->shape();
  const Shape os{xs.n, xs.h * factor, xs.w * factor, xs.c};
  auto ty = linear_taps(xs.h, factor);
  auto tx = linear_taps(xs.w, factor);
  auto out = new_output<T>(os);
  const Tensor<T>& x = *input;
  for (int n = 0; n < os.n; ++n) {
    for (int oy = 0; oy < os.h; ++oy) {
      const T wy = static_cast<T>(ty[oy].w1);
      for (int ox = 0; ox < os.w; ++ox) {
        const T wx = static_cast<T>(tx[ox].w1);
        const T* a = &x.at(n, ty[oy].i0, tx[ox].i0, 0);
        const T* b = &x.at(n, ty[oy].i0, tx[ox].i1, 0);
        const T* c = &x.at(n, ty[oy].i1, tx[ox].i0, 0);
        const T* d = &x.at(n, ty[oy].i1, tx[ox].i1, 0);
        T* dst = &out->at(n, oy, ox, 0);
        for (int ch = 0; ch < xs.c; ++ch) {
          const T top = a[ch] + wx * (b[ch] - a[ch]);
          const T bot = c[ch] + wx * (d[ch] - c[ch]);
          dst[ch] = top + wy * (bot - top);
        }
      }
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, xs, os, ty = std::move(ty), tx = std::move(tx)] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto gi = input->grad();
      auto go = out->grad();
      for (int n = 0; n < os.n; ++n) {
        for (int oy = 0; oy < os.h; ++oy) {
          const T wy = static_cast<T>(ty[oy].w1);
          for (int ox = 0; ox < os.w; ++ox) {
            const T wx = static_cast<T>(tx[ox].w1);
            const T* g = &go[out->index(n, oy, ox, 0)];
            T* a = &gi[input->index(n, ty[oy].i0, tx[ox].i0, 0)];
            T* b = &gi[input->index(n, ty[oy].i0, tx[ox].i1, 0)];
            T* c = &gi[input->index(n, ty[oy].i1, tx[ox].i0, 0)];
            T* d = &gi[input->index(n, ty[oy].i1, tx[ox].i1, 0)];
            for (int ch = 0; ch < xs.c; ++ch) {
              a[ch] += g[ch] * (1 - wy) * (1 - wx);
              b[ch] += g[ch] * (1 - wy) * wx;
              c[ch] += g[ch] * wy * (1 - wx);
              d[ch] += g[ch] * wy * wx;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> upsample_nearest(Tape<T>& tape, const Var<T>& input, int factor) {
  require(input, "upsample_nearest");
  if (factor <= 0) throw ConfigError("upsample_nearest: factor must be positive");
  const Shape xs = input->shape();
  const Shape os{xs.n, xs.h * factor, xs.w * factor, xs.c};
  auto out = new_output<T>(os);
  for (int n = 0; n < os.n; ++n) {
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        const T* src = &input->at(n, oy / factor, ox / factor, 0);
        std::copy(src, src + xs.c, &out->at(n, oy, ox, 0));
      }
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, xs, os, factor] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto gi = input->grad();
      auto go = out->grad();
      for (int n = 0; n < os.n; ++n) {
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox) {
            const T* g = &go[out->index(n, oy, ox, 0)];
            T* dst = &gi[input->index(n, oy / factor, ox / factor, 0)];
            for (int c = 0; c < xs.c; ++c) dst[c] += g[c];
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Shared scaffolding for elementwise unary ops: f gives the value, df the
// derivative as a function of the input.
template <typename T, typename F, typename DF>
Var<T> unary(Tape<T>& tape, const Var<T>& input, F f, DF df) {
  require(input, "unary op");
  auto out = new_output<T>(input->shape());
  auto x = input->data();
  auto y = out->data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, df] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto xv = input->data();
      auto go = out->grad();
      auto gi = input->grad();
      for (std::size_t i = 0; i < xv.size(); ++i) gi[i] += go[i] * df(xv[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& input, T slope) {
  return unary(
      tape, input, [slope](T v) { return v >= T{0} ? v : slope * v; },
      [slope](T v) { return v >= T{0} ? T{1} : slope; });
}

template <typename T>
Var<T> softplus(Tape<T>& tape, const Var<T>& input) {
  return unary(
      tape, input,
      [](T v) { return std::max(v, T{0}) + std::log1p(std::exp(-std::abs(v))); },
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      });
}

template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& a, T wa, const Var<T>& b, T wb) {
  require_same_shape(a, b, "weighted_sum");
  auto out = new_output<T>(a->shape());
  auto x = a->data();
  auto y = b->data();
  auto o = out->data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = wa * x[i] + wb * y[i];
  if (tape.wants({&a, &b})) {
    out->set_requires_grad(true);
    tape.record([a, b, wa, wb, out] {
      if (!out->has_grad()) return;
      auto g = out->grad();
      if (a->requires_grad()) {
        a->ensure_grad();
        auto ga = a->grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += wa * g[i];
      }
      if (b->requires_grad()) {
        b->ensure_grad();
        auto gb = b->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += wb * g[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  return weighted_sum(tape, a, T{1}, b, T{1});
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  return weighted_sum(tape, a, T{1}, b, T{-1});
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  auto out = new_output<T>(a->shape());
  auto x = a->data();
  auto y = b->data();
  auto o = out->data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (tape.wants({&a, &b})) {
    out->set_requires_grad(true);
    tape.record([a, b, out] {
      if (!out->has_grad()) return;
      auto g = out->grad();
      if (a->requires_grad()) {
        a->ensure_grad();
        auto ga = a->grad();
        auto yb = b->data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yb[i];
      }
      if (b->requires_grad()) {
        b->ensure_grad();
        auto gb = b->grad();
        auto xa = a->data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T factor) {
  return unary(
      tape, a, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require(a, "concat_channels");
  require(b, "concat_channels");
  const Shape as = a->shape();
  const Shape bs = b->shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: spatial mismatch " + as.str() + " vs " + bs.str());
  }
  const Shape os{as.n, as.h, as.w, as.c + bs.c};
  auto out = new_output<T>(os);
  const std::size_t pixels = static_cast<std::size_t>(as.n) * as.h * as.w;
  {
    const T* pa = a->data().data();
    const T* pb = b->data().data();
    T* po = out->data().data();
    for (std::size_t p = 0; p < pixels; ++p) {
      std::copy(pa + p * as.c, pa + (p + 1) * as.c, po + p * os.c);
      std::copy(pb + p * bs.c, pb + (p + 1) * bs.c, po + p * os.c + as.c);
    }
  }
  if (tape.wants({&a, &b})) {
    out->set_requires_grad(true);
    tape.record([a, b, out, as, bs, os, pixels] {
      if (!out->has_grad()) return;
      const T* g = out->grad().data();
      if (a->requires_grad()) {
        a->ensure_grad();
        T* ga = a->grad().data();
        for (std::size_t p = 0; p < pixels; ++p) {
          for (int c = 0; c < as.c; ++c) ga[p * as.c + c] += g[p * os.c + c];
        }
      }
      if (b->requires_grad()) {
        b->ensure_grad();
        T* gb = b->grad().data();
        for (std::size_t p = 0; p < pixels; ++p) {
          for (int c = 0; c < bs.c; ++c) gb[p * bs.c + c] += g[p * os.c + as.c + c];
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> pad_replicate(Tape<T>& tape, const Var<T>& input, int h, int w) {
  require(input, "pad_replicate");
  const Shape xs = input->shape();
  if (h < xs.h || w < xs.w) throw ShapeError("pad_replicate: target smaller than input");
  const Shape os{xs.n, h, w, xs.c};
  auto out = new_output<T>(os);
  for (int n = 0; n < xs.n; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T* src = &input->at(n, std::min(y, xs.h - 1), std::min(x, xs.w - 1), 0);
        std::copy(src, src + xs.c, &out->at(n, y, x, 0));
      }
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, xs, os] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto gi = input->grad();
      auto go = out->grad();
      for (int n = 0; n < os.n; ++n) {
        for (int y = 0; y < os.h; ++y) {
          for (int x = 0; x < os.w; ++x) {
            const T* g = &go[out->index(n, y, x, 0)];
            T* dst = &gi[input->index(n, std::min(y, xs.h - 1), std::min(x, xs.w - 1), 0)];
            for (int c = 0; c < xs.c; ++c) dst[c] += g[c];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> crop(Tape<T>& tape, const Var<T>& input, int h, int w) {
  require(input, "crop");
  const Shape xs = input->shape();
  if (h > xs.h || w > xs.w || h <= 0 || w <= 0) throw ShapeError("crop: invalid window");
  const Shape os{xs.n, h, w, xs.c};
  auto out = new_output<T>(os);
  for (int n = 0; n < xs.n; ++n) {
    for (int y = 0; y < h; ++y) {
      const T* src = &input->at(n, y, 0, 0);
      std::copy(src, src + static_cast<std::size_t>(w) * xs.c, &out->at(n, y, 0, 0));
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, xs, os] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      auto gi = input->grad();
      auto go = out->grad();
      for (int n = 0; n < os.n; ++n) {
        for (int y = 0; y < os.h; ++y) {
          for (std::size_t i = 0; i < static_cast<std::size_t>(os.w) * os.c; ++i) {
            gi[input->index(n, y, 0, 0) + i] += go[out->index(n, y, 0, 0) + i];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> instance_norm(Tape<T>& tape, const Var<T>& input, T eps) {
  require(input, "instance_norm");
  const Shape xs = input->shape();
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  if (plane == 0) throw ShapeError("instance_norm: empty spatial extent");
  const int ch = xs.c;
  auto out = new_output<T>(xs);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(xs.n) * ch);
  const T* x = input->data().data();
  T* y = out->data().data();
  std::vector<double> mu(ch);
  std::vector<double> var(ch);
  for (int n = 0; n < xs.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * plane * ch;
    std::fill(mu.begin(), mu.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < ch; ++c) mu[c] += x[base + p * ch + c];
    }
    for (int c = 0; c < ch; ++c) mu[c] /= static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < ch; ++c) {
        const double d = x[base + p * ch + c] - mu[c];
        var[c] += d * d;
      }
    }
    for (int c = 0; c < ch; ++c) {
      (*inv_std)[static_cast<std::size_t>(n) * ch + c] =
          static_cast<T>(1.0 / std::sqrt(var[c] / static_cast<double>(plane) + eps));
    }
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < ch; ++c) {
        y[base + p * ch + c] = static_cast<T>((x[base + p * ch + c] - mu[c])) *
                               (*inv_std)[static_cast<std::size_t>(n) * ch + c];
      }
    }
  }
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out, inv_std, xs, plane, ch] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      const T* g = out->grad().data();
      const T* yv = out->data().data();
      T* gi = input->grad().data();
      std::vector<double> gmean(ch);
      std::vector<double> gy(ch);
      for (int n = 0; n < xs.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * plane * ch;
        std::fill(gmean.begin(), gmean.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
        for (std::size_t p = 0; p < plane; ++p) {
          for (int c = 0; c < ch; ++c) {
            gmean[c] += g[base + p * ch + c];
            gy[c] += static_cast<double>(g[base + p * ch + c]) * yv[base + p * ch + c];
          }
        }
        for (int c = 0; c < ch; ++c) {
          gmean[c] /= static_cast<double>(plane);
          gy[c] /= static_cast<double>(plane);
        }
        for (std::size_t p = 0; p < plane; ++p) {
          for (int c = 0; c < ch; ++c) {
            const std::size_t i = base + p * ch + c;
            gi[i] += (*inv_std)[static_cast<std::size_t>(n) * ch + c] *
                     static_cast<T>(g[i] - gmean[c] - yv[i] * gy[c]);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> modulate(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  require(x, "modulate");
  require(gamma, "modulate");
  require(beta, "modulate");
  const Shape xs = x->shape();
  const Shape channel_only{1, 1, 1, xs.c};
  auto broadcast_of = [&](const Var<T>& v, const char* name) {
    if (v->shape() == xs) return false;
    if (v->shape() == channel_only) return true;
    throw ShapeError(std::string("modulate: ") + name + " shape " + v->shape().str() +
                     " does not match " + xs.str());
  };
  const bool gb = broadcast_of(gamma, "gamma");
  const bool bb = broadcast_of(beta, "beta");
  const std::size_t ch = static_cast<std::size_t>(xs.c);
  auto out = new_output<T>(xs);
  {
    auto xv = x->data();
    auto gv = gamma->data();
    auto bv = beta->data();
    auto o = out->data();
    for (std::size_t i = 0; i < o.size(); ++i) {
      const std::size_t c = i % ch;
      o[i] = gv[gb ? c : i] * xv[i] + bv[bb ? c : i];
    }
  }
  if (tape.wants({&x, &gamma, &beta})) {
    out->set_requires_grad(true);
    tape.record([x, gamma, beta, out, gb, bb, ch] {
      if (!out->has_grad()) return;
      auto g = out->grad();
      auto xv = x->data();
      auto gv = gamma->data();
      if (x->requires_grad()) {
        x->ensure_grad();
        auto gx = x->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gv[gb ? i % ch : i];
      }
      if (gamma->requires_grad()) {
        gamma->ensure_grad();
        auto gg = gamma->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gg[gb ? i % ch : i] += g[i] * xv[i];
      }
      if (beta->requires_grad()) {
        beta->ensure_grad();
        auto gbeta = beta->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gbeta[bb ? i % ch : i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& input) {
  require(input, "sum");
  double acc = 0.0;
  for (T v : input->data()) acc += v;
  auto out = make_var(Tensor<T>(scalar_shape(), static_cast<T>(acc)));
  if (tape.wants({&input})) {
    out->set_requires_grad(true);
    tape.record([input, out] {
      if (!out->has_grad()) return;
      input->ensure_grad();
      const T g = out->grad()[0];
      for (T& v : input->grad()) v += g;
    });
  }
  return out;
}

template <typename T>
Var<T> mean(Tape<T>& tape, const Var<T>& input) {
  require(input, "mean");
  if (input->size() == 0) throw ShapeError("mean of empty tensor");
  return scale(tape, sum(tape, input), T{1} / static_cast<T>(input->size()));
}

template <typename T>
Var<T> mean_abs_error(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mean_abs_error");
  if (a->size() == 0) throw ShapeError("mean_abs_error: empty tensors");
  const T inv = T{1} / static_cast<T>(a->size());
  double acc = 0.0;
  auto x = a->data();
  auto y = b->data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(static_cast<double>(x[i]) - y[i]);
  auto out = make_var(Tensor<T>(scalar_shape(), static_cast<T>(acc * inv)));
  if (tape.wants({&a, &b})) {
    out->set_requires_grad(true);
    tape.record([a, b, out, inv] {
      if (!out->has_grad()) return;
      const T g = out->grad()[0] * inv;
      auto xv = a->data();
      auto yv = b->data();
      auto sign = [](T d) { return d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0}); };
      if (a->requires_grad()) {
        a->ensure_grad();
        auto ga = a->grad();
        for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += g * sign(xv[i] - yv[i]);
      }
      if (b->requires_grad()) {
        b->ensure_grad();
        auto gb = b->grad();
        for (std::size_t i = 0; i < xv.size(); ++i) gb[i] -= g * sign(xv[i] - yv[i]);
      }
    });
  }
  return out;
}

template <typename T>
Var<T> asymmetric_sq_error(Tape<T>& tape, const Var<T>& estimate, const Var<T>& target, T alpha) {
  require_same_shape(estimate, target, "asymmetric_sq_error");
  if (estimate->size() == 0) throw ShapeError("asymmetric_sq_error: empty tensors");
  const T inv = T{1} / static_cast<T>(estimate->size());
  auto weight = [alpha](T diff) { return diff < T{0} ? T{1} - alpha : alpha; };
  double acc = 0.0;
  auto e = estimate->data();
  auto t = target->data();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const T d = e[i] - t[i];
    acc += static_cast<double>(weight(d)) * d * d;
  }
  auto out = make_var(Tensor<T>(scalar_shape(), static_cast<T>(acc * inv)));
  if (tape.wants({&estimate})) {
    out->set_requires_grad(true);
    tape.record([estimate, target, out, inv, weight] {
      if (!out->has_grad()) return;
      estimate->ensure_grad();
      const T g = out->grad()[0] * inv;
      auto ev = estimate->data();
      auto tv = target->data();
      auto ge = estimate->grad();
      for (std::size_t i = 0; i < ev.size(); ++i) {
        const T d = ev[i] - tv[i];
        ge[i] += g * T{2} * weight(d) * d;
      }
    });
  }
  return out;
}

#define AIND_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int, int);       \
  template Var<T> transposed_conv2d(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int); \
  template Var<T> avg_pool(Tape<T>&, const Var<T>&, int);                                        \
  template Var<T> upsample_linear(Tape<T>&, const Var<T>&, int);                                 \
  template Var<T> upsample_nearest(Tape<T>&, const Var<T>&, int);                                \
  template Var<T> leaky_relu(Tape<T>&, const Var<T>&, T);                                        \
  template Var<T> softplus(Tape<T>&, const Var<T>&);                                             \
  template Var<T> add(Tape<T>&, const Var<T>&, const Var<T>&);                                   \
  template Var<T> sub(Tape<T>&, const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul(Tape<T>&, const Var<T>&, const Var<T>&);                                   \
  template Var<T> scale(Tape<T>&, const Var<T>&, T);                                             \
  template Var<T> weighted_sum(Tape<T>&, const Var<T>&, T, const Var<T>&, T);                    \
  template Var<T> concat_channels(Tape<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> pad_replicate(Tape<T>&, const Var<T>&, int, int);                              \
  template Var<T> crop(Tape<T>&, const Var<T>&, int, int);                                       \
  template Var<T> instance_norm(Tape<T>&, const Var<T>&, T);                                     \
  template Var<T> modulate(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&);               \
  template Var<T> sum(Tape<T>&, const Var<T>&);                                                  \
  template Var<T> mean(Tape<T>&, const Var<T>&);                                                 \
  template Var<T> mean_abs_error(Tape<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> asymmetric_sq_error(Tape<T>&, const Var<T>&, const Var<T>&, T);

AIND_INSTANTIATE_OPS(float)
AIND_INSTANTIATE_OPS(double)

#undef AIND_INSTANTIATE_OPS

}  // namespace aind::ops
