#include "aind/metrics.hpp"

#include <cmath>
#include <vector>

namespace aind {

namespace {

void require_same_shape(const Tensor<float>& a, const Tensor<float>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + a.shape().str() + " vs " + b.shape().str());
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> g(kSsimWindow);
  const double sigma = 1.5;
  const int r = kSsimWindow / 2;
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable valid-mode filtering of one h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  static const std::vector<double> g = gaussian_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, g);
  const auto mu_b = filter_valid(b, h, w, g);
  const auto e_aa = filter_valid(aa, h, w, g);
  const auto e_bb = filter_valid(bb, h, w, g);
  const auto e_ab = filter_valid(ab, h, w, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw ConfigError("psnr peak must be positive");
  if (a.size() == 0) throw ShapeError("psnr of empty tensors");
  double acc = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(da.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
  require_same_shape(a, b, "ssim");
  const Shape s = a.shape();
  if (s.h < kSsimWindow || s.w < kSsimWindow) {
    throw ShapeError("ssim needs images of at least 11x11, got " + s.str());
  }
  const Tensor<float> la = s.c == 3 ? to_luma(a) : a;
  const Tensor<float> lb = s.c == 3 ? to_luma(b) : b;
  const int channels = la.shape().c;
  double total = 0.0;
  std::vector<double> pa(static_cast<std::size_t>(s.h) * s.w), pb(pa.size());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          pa[static_cast<std::size_t>(y) * s.w + x] = la.at(n, y, x, c);
          pb[static_cast<std::size_t>(y) * s.w + x] = lb.at(n, y, x, c);
        }
      }
      total += ssim_plane(pa, pb, s.h, s.w);
    }
  }
  return total / static_cast<double>(s.n * channels);
}

Tensor<float> to_luma(const Tensor<float>& rgb) {
  const Shape s = rgb.shape();
  if (s.c != 3) throw ShapeError("to_luma expects 3 channels, got " + s.str());
  Tensor<float> out({s.n, s.h, s.w, 1});
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
  }
  return out;
}

Tensor<float> clip01(const Tensor<float>& x) {
  Tensor<float> out = x.detached();
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

namespace {

Tensor<float> rotate90(const Tensor<float>& x) {
  const Shape s = x.shape();
  Tensor<float> out({s.n, s.w, s.h, s.c});
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.w; ++y) {
      for (int xx = 0; xx < s.h; ++xx) {
        for (int c = 0; c < s.c; ++c) out.at(n, y, xx, c) = x.at(n, xx, s.w - 1 - y, c);
      }
    }
  }
  return out;
}

Tensor<float> flip_horizontal(const Tensor<float>& x) {
  const Shape s = x.shape();
  Tensor<float> out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        for (int c = 0; c < s.c; ++c) out.at(n, y, xx, c) = x.at(n, y, s.w - 1 - xx, c);
      }
    }
  }
  return out;
}

void check_dihedral_index(int k) {
  if (k < 0 || k > 7) throw ConfigError("dihedral index must be in [0, 7]");
}

}  // namespace

Tensor<float> dihedral(const Tensor<float>& x, int k) {
  check_dihedral_index(k);
  Tensor<float> out = k >= 4 ? flip_horizontal(x) : x.detached();
  for (int r = 0; r < (k & 3); ++r) out = rotate90(out);
  return out;
}

Tensor<float> dihedral_inverse(const Tensor<float>& x, int k) {
  check_dihedral_index(k);
  Tensor<float> out = x.detached();
  for (int r = 0; r < (4 - (k & 3)) % 4; ++r) out = rotate90(out);
  return k >= 4 ? flip_horizontal(out) : out;
}

Tensor<float> crop_patch(const Tensor<float>& x, int n, int y, int x0, int h, int w) {
  const Shape s = x.shape();
  if (n < 0 || n >= s.n || y < 0 || x0 < 0 || h <= 0 || w <= 0 || y + h > s.h || x0 + w > s.w) {
    throw ShapeError("crop window out of range for " + s.str());
  }
  Tensor<float> out({1, h, w, s.c});
  for (int yy = 0; yy < h; ++yy) {
    const float* src = &x.at(n, y + yy, x0, 0);
    std::copy(src, src + static_cast<std::size_t>(w) * s.c, &out.at(0, yy, 0, 0));
  }
  return out;
}

Tensor<float> stack_batch(const std::vector<Tensor<float>>& items) {
  if (items.empty()) throw ShapeError("stack_batch of nothing");
  Shape s = items.front().shape();
  int total = 0;
  for (const auto& t : items) {
    const Shape ts = t.shape();
    if (ts.h != s.h || ts.w != s.w || ts.c != s.c) throw ShapeError("stack_batch shape mismatch");
    total += ts.n;
  }
  s.n = total;
  std::vector<float> data;
  data.reserve(s.numel());
  for (const auto& t : items) data.insert(data.end(), t.data().begin(), t.data().end());
  return Tensor<float>(s, std::move(data));
}

}  // namespace aind
