#include "aind/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aind/ops.hpp"

namespace aind {
namespace {

void check_range(const Range& r, const char* name, double min_lo) {
  if (!(r.lo <= r.hi)) {
    throw ConfigError(std::string("noise range ") + name + " is empty [" + std::to_string(r.lo) +
                      ", " + std::to_string(r.hi) + "]");
  }
  if (r.lo < min_lo) throw ConfigError(std::string("noise range ") + name + " below minimum");
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr double kTail = 8.0;

double tail_mass(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct QuadratureRule {
  std::vector<double> nodes;  // on [0, 1]
  std::vector<double> weights;
};

// 32-point Gauss-Legendre rule mapped to [0, 1].
const QuadratureRule& gauss_legendre() {
  static const QuadratureRule rule = [] {
    constexpr int n = 32;
    QuadratureRule r;
    for (int i = 1; i <= n; ++i) {
      double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      r.nodes.push_back(0.5 * (x + 1.0));
      r.weights.push_back(1.0 / ((1.0 - x * x) * dp * dp));
    }
    return r;
  }();
  return rule;
}

}  // namespace

void NoiseParams::validate() const {
  if (sigma_s < 0.0 || sigma_c < 0.0) throw ConfigError("noise levels must be non-negative");
  if (!(crf_gamma > 0.0)) throw ConfigError("crf_gamma must be positive");
  if (field_amplitude < 0.0 || field_amplitude >= 1.0) {
    throw ConfigError("field_amplitude must lie in [0, 1)");
  }
}

void NoiseDomain::validate() const {
  check_range(sigma_s, "sigma_s", 0.0);
  check_range(sigma_c, "sigma_c", 0.0);
  check_range(crf_gamma, "crf_gamma", 1e-6);
  if (field_amplitude < 0.0 || field_amplitude >= 1.0) {
    throw ConfigError("field_amplitude must lie in [0, 1)");
  }
}

NoiseSampler::NoiseSampler(NoiseDomain domain, std::uint64_t seed)
    : domain_(domain), rng_(seed) {
  domain_.validate();
}

NoiseParams NoiseSampler::next() {
  NoiseParams p;
  p.sigma_s = rng_.uniform(domain_.sigma_s.lo, domain_.sigma_s.hi);
  p.sigma_c = rng_.uniform(domain_.sigma_c.lo, domain_.sigma_c.hi);
  p.crf_gamma = rng_.uniform(domain_.crf_gamma.lo, domain_.crf_gamma.hi);
  p.field_amplitude = domain_.field_amplitude;
  p.seed = rng_.next_u64();
  return p;
}

NoiseDomain default_source_domain() {
  NoiseDomain d;
  d.sigma_s = {0.0, 0.16};
  d.sigma_c = {0.0, 0.06};
  d.crf_gamma = {1.8, 2.4};
  return d;
}

NoiseDomain default_target_domain() {
  NoiseDomain d;
  d.sigma_s = {0.04, 0.12};
  d.sigma_c = {0.02, 0.05};
  d.crf_gamma = {1.0, 1.0};
  d.field_amplitude = 0.6;
  return d;
}

std::pair<NoiseSampler, NoiseSampler> make_domain_shift(const NoiseDomain& source,
                                                        const NoiseDomain& target,
                                                        std::uint64_t seed) {
  return {NoiseSampler(source, mix_seed(seed, 1)), NoiseSampler(target, mix_seed(seed, 2))};
}

NoisyImage sample_awgn(const Tensor<float>& clean, double sigma, std::uint64_t seed, bool clip) {
  if (sigma < 0.0) throw ConfigError("AWGN sigma must be non-negative");
  Rng rng(seed);
  NoisyImage out{Tensor<float>(clean.shape()), Tensor<float>(clean.shape(), static_cast<float>(sigma)),
                 {}};
  auto x = clean.data();
  auto y = out.noisy.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] + sigma * rng.normal();
    y[i] = static_cast<float>(clip ? clip01(v) : v);
  }
  Tape<float> tape(false);
  out.sigma4 = *ops::avg_pool(tape, make_var(out.sigma1), 4);
  return out;
}

Tensor<float> smooth_field(int n, int h, int w, std::uint64_t seed, int grid) {
  Rng rng(seed);
  Tensor<float> coarse(Shape{n, grid, grid, 1});
  for (float& v : coarse.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  // Upsample the coarse grid with half-pixel bilinear weights to (h, w).
  Tensor<float> out(Shape{n, h, w, 1});
  auto coord = [grid](int o, int size) {
    double u = (o + 0.5) * grid / size - 0.5;
    return std::clamp(u, 0.0, static_cast<double>(grid - 1));
  };
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < h; ++y) {
      const double u = coord(y, h);
      const int y0 = std::min(static_cast<int>(u), grid - 1);
      const int y1 = std::min(y0 + 1, grid - 1);
      const double wy = u - y0;
      for (int x = 0; x < w; ++x) {
        const double v = coord(x, w);
        const int x0 = std::min(static_cast<int>(v), grid - 1);
        const int x1 = std::min(x0 + 1, grid - 1);
        const double wx = v - x0;
        const double top = coarse.at(b, y0, x0, 0) * (1 - wx) + coarse.at(b, y0, x1, 0) * wx;
        const double bot = coarse.at(b, y1, x0, 0) * (1 - wx) + coarse.at(b, y1, x1, 0) * wx;
        out.at(b, y, x, 0) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

namespace {

// Per-pixel noise std in the linear domain.
std::vector<double> linear_std(const Tensor<float>& clean_linear, const NoiseParams& p) {
  const Shape s = clean_linear.shape();
  std::vector<double> std_map(clean_linear.size());
  Tensor<float> field;
  if (p.field_amplitude > 0.0) field = smooth_field(s.n, s.h, s.w, mix_seed(p.seed, 7));
  auto x = clean_linear.data();
  const double ss = p.sigma_s * p.sigma_s;
  const double sc = p.sigma_c * p.sigma_c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sd = std::sqrt(std::max(0.0, static_cast<double>(x[i])) * ss + sc);
    if (p.field_amplitude > 0.0) {
      const std::size_t pixel = i / static_cast<std::size_t>(s.c);
      sd *= 1.0 + p.field_amplitude * field.data()[pixel];
    }
    std_map[i] = sd;
  }
  return std_map;
}

}  // namespace

HeteroscedasticSample sample_heteroscedastic(const Tensor<float>& clean_linear,
                                             const NoiseParams& p) {
  p.validate();
  const auto sd = linear_std(clean_linear, p);
  Rng rng(p.seed);
  HeteroscedasticSample out{Tensor<float>(clean_linear.shape()), Tensor<float>(clean_linear.shape())};
  auto x = clean_linear.data();
  auto y = out.noisy_linear.data();
  auto v = out.variance.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = static_cast<float>(x[i] + sd[i] * rng.normal());
    v[i] = static_cast<float>(sd[i] * sd[i]);
  }
  return out;
}

Tensor<float> apply_crf(const Tensor<float>& linear, double crf_gamma) {
  if (!(crf_gamma > 0.0)) throw ConfigError("crf_gamma must be positive");
  Tensor<float> out(linear.shape());
  auto x = linear.data();
  auto y = out.data();
  const double e = 1.0 / crf_gamma;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = clip01(x[i]);
    y[i] = static_cast<float>(crf_gamma == 1.0 ? v : std::pow(v, e));
  }
  return out;
}

Tensor<float> inverse_crf(const Tensor<float>& srgb, double crf_gamma) {
  if (!(crf_gamma > 0.0)) throw ConfigError("crf_gamma must be positive");
  Tensor<float> out(srgb.shape());
  auto x = srgb.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = clip01(x[i]);
    y[i] = static_cast<float>(crf_gamma == 1.0 ? v : std::pow(v, crf_gamma));
  }
  return out;
}

double propagate_sigma(double x_linear, double s, double crf_gamma) {
  if (!(s > 0.0)) return 0.0;
  const double x = clip01(x_linear);
  const double e = 1.0 / crf_gamma;
  auto f = [&](double v) { return crf_gamma == 1.0 ? v : std::pow(v, e); };
  const double fx = f(x);
  const double a = std::max(-x / s, -kTail);
  const double b = std::min((1.0 - x) / s, kTail);
  const bool clipped_low = a > -kTail;
  const auto& rule = gauss_legendre();
  // Moments of f(X) - f(x); the lower clip mass sits at f(0) = 0.
  double m1 = 0.0;
  double m2 = 0.0;
  if (clipped_low) {
    m1 -= fx * tail_mass(-a);
    m2 += fx * fx * tail_mass(-a);
  }
  if (b < kTail) {
    m1 += (1.0 - fx) * tail_mass(b);
    m2 += (1.0 - fx) * (1.0 - fx) * tail_mass(b);
  }
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double u = rule.nodes[k];
    // t = u^2 next to a clipped zero.
    const double t = clipped_low ? u * u : u;
    const double dt = clipped_low ? 2.0 * u : 1.0;
    const double z = a + (b - a) * t;
    const double w = rule.weights[k] * (b - a) * dt * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    const double d = f(clip01(x + s * z)) - fx;
    m1 += w * d;
    m2 += w * d * d;
  }
  return std::sqrt(std::max(m2 - m1 * m1, 0.0));
}

NoisyImage synthesize_pair(const Tensor<float>& clean_srgb, const NoiseParams& p) {
  p.validate();
  const Tensor<float> lin = inverse_crf(clean_srgb, p.crf_gamma);
  const auto sd = linear_std(lin, p);
  Rng rng(p.seed);
  const double e = 1.0 / p.crf_gamma;
  auto f = [&](double v) { return p.crf_gamma == 1.0 ? v : std::pow(v, e); };

  NoisyImage out{Tensor<float>(clean_srgb.shape()), Tensor<float>(clean_srgb.shape()), {}};
  auto x = clean_srgb.data();
  auto xl = lin.data();
  auto y = out.noisy.data();
  auto s1 = out.sigma1.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double noisy_lin = clip01(xl[i] + sd[i] * rng.normal());
    // Adding the response-domain delta keeps the noise-free case exact.
    const double delta = f(noisy_lin) - f(xl[i]);
    y[i] = static_cast<float>(clip01(x[i] + delta));
    s1[i] = static_cast<float>(propagate_sigma(xl[i], sd[i], p.crf_gamma));
  }
  Tape<float> tape(false);
  out.sigma4 = *ops::avg_pool(tape, make_var(out.sigma1), 4);
  return out;
}

Tensor<float> make_scene(std::uint64_t seed, int h, int w, int channels) {
  if (h <= 0 || w <= 0 || (channels != 1 && channels != 3)) {
    throw ConfigError("make_scene: invalid geometry");
  }
  Rng rng(seed);
  Tensor<float> img(Shape{1, h, w, channels});
  auto color = [&] {
    std::vector<double> c(channels);
    for (double& v : c) v = rng.uniform(0.05, 0.95);
    return c;
  };
  const auto c0 = color();
  const auto c1 = color();
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const double gx = std::cos(angle);
  const double gy = std::sin(angle);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = 0.5 + 0.5 * (gx * (2.0 * x / w - 1.0) + gy * (2.0 * y / h - 1.0)) / 1.4142;
      for (int c = 0; c < channels; ++c) {
        img.at(0, y, x, c) = static_cast<float>(c0[c] * (1 - t) + c1[c] * t);
      }
    }
  }
  const int shapes = rng.uniform_int(3, 8);
  for (int s = 0; s < shapes; ++s) {
    const auto col = color();
    const bool disc = rng.uniform() < 0.5;
    const double cx = rng.uniform(0.0, w);
    const double cy = rng.uniform(0.0, h);
    const double rx = rng.uniform(0.08, 0.35) * w;
    const double ry = rng.uniform(0.08, 0.35) * h;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < channels; ++c) img.at(0, y, x, c) = static_cast<float>(col[c]);
      }
    }
  }
  const double amp = rng.uniform(0.0, 0.06);
  const double fx = rng.uniform(0.1, 0.6);
  const double fy = rng.uniform(0.1, 0.6);
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = amp * std::sin(fx * x + fy * y + phase);
      for (int c = 0; c < channels; ++c) {
        float& v = img.at(0, y, x, c);
        v = static_cast<float>(clip01(v + t));
      }
    }
  }
  return img;
}

}  // namespace aind
