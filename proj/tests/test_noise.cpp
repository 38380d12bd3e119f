#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aind/errors.hpp"
#include "aind/noise.hpp"
#include "aind/ops.hpp"

namespace aind {
namespace {

double sample_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

TEST(Awgn, ZeroSigmaIsExact) {
  const Tensor<float> clean = make_scene(1, 16, 16, 3);
  const NoisyImage out = sample_awgn(clean, 0.0, 5);
  for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_EQ(out.noisy.data()[i], clean.data()[i]);
  for (float v : out.sigma1.data()) EXPECT_EQ(v, 0.0f);
  for (float v : out.sigma4.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Awgn, EmpiricalStdMatches) {
  const double sigma = 25.0 / 255.0;
  const Tensor<float> clean(Shape{1, 250, 400, 1}, 0.5f);  // 10^5 samples
  const NoisyImage out = sample_awgn(clean, sigma, 17, false);
  std::vector<double> diff(clean.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = out.noisy.data()[i] - clean.data()[i];
  EXPECT_NEAR(sample_std(diff), sigma, 0.02 * sigma);
  for (float v : out.sigma1.data()) EXPECT_FLOAT_EQ(v, static_cast<float>(sigma));
}

TEST(Awgn, SeedDeterminesOutput) {
  const Tensor<float> clean = make_scene(2, 16, 16, 3);
  const auto a = sample_awgn(clean, 0.1, 9);
  const auto b = sample_awgn(clean, 0.1, 9);
  const auto c = sample_awgn(clean, 0.1, 10);
  EXPECT_EQ(a.noisy.storage(), b.noisy.storage());
  EXPECT_NE(a.noisy.storage(), c.noisy.storage());
}

TEST(Awgn, ClipsToUnitRange) {
  const Tensor<float> clean = make_scene(3, 32, 32, 3);
  const auto out = sample_awgn(clean, 0.3, 1);
  for (float v : out.noisy.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Awgn, NegativeSigmaIsConfigError) {
  EXPECT_THROW(sample_awgn(Tensor<float>(Shape{1, 4, 4, 1}), -0.1, 1), ConfigError);
}

double heteroscedastic_std(float x, double ss, double sc, std::uint64_t seed) {
  NoiseParams p;
  p.sigma_s = ss;
  p.sigma_c = sc;
  p.seed = seed;
  const Tensor<float> clean(Shape{1, 250, 400, 1}, x);
  const auto out = sample_heteroscedastic(clean, p);
  std::vector<double> diff(clean.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = out.noisy_linear.data()[i] - x;
  return sample_std(diff);
}

TEST(Heteroscedastic, SignalIndependentCaseIsAwgn) {
  EXPECT_NEAR(heteroscedastic_std(0.4f, 0.0, 0.1, 3), 0.1, 0.002);
}

TEST(Heteroscedastic, ClosedFormStdAtWhite) {
  const double expect = std::sqrt(0.08 * 0.08 + 0.02 * 0.02);
  EXPECT_NEAR(expect, 0.08246, 1e-5);
  EXPECT_NEAR(heteroscedastic_std(1.0f, 0.08, 0.02, 4), expect, 0.02 * expect);
}

TEST(Heteroscedastic, VarianceMapFormula) {
  NoiseParams p;
  p.sigma_s = 0.1;
  p.sigma_c = 0.03;
  p.seed = 8;
  Tensor<float> clean(Shape{1, 1, 3, 1}, std::vector<float>{0.0f, 0.5f, 1.0f});
  const auto out = sample_heteroscedastic(clean, p);
  EXPECT_FLOAT_EQ(out.variance.data()[0], static_cast<float>(0.03 * 0.03));
  EXPECT_FLOAT_EQ(out.variance.data()[1], static_cast<float>(0.5 * 0.01 + 0.0009));
  EXPECT_FLOAT_EQ(out.variance.data()[2], static_cast<float>(0.01 + 0.0009));
}

TEST(Crf, Examples) {
  Tensor<float> x(Shape{1, 1, 3, 1}, std::vector<float>{0.25f, 0.0f, 1.0f});
  const auto id = apply_crf(x, 1.0);
  EXPECT_EQ(id.storage(), x.storage());
  const auto y = apply_crf(x, 2.0);
  EXPECT_FLOAT_EQ(y.data()[0], 0.5f);
  EXPECT_FLOAT_EQ(y.data()[1], 0.0f);
  EXPECT_FLOAT_EQ(y.data()[2], 1.0f);
  EXPECT_THROW(apply_crf(x, 0.0), ConfigError);
}

TEST(Crf, MonotoneAndRangePreserving) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const double g = rng.uniform(0.5, 3.0);
    float a = static_cast<float>(rng.uniform()), b = static_cast<float>(rng.uniform());
    if (a > b) std::swap(a, b);
    Tensor<float> x(Shape{1, 1, 2, 1}, std::vector<float>{a, b});
    const auto y = apply_crf(x, g);
    EXPECT_LE(y.data()[0], y.data()[1]);
    EXPECT_GE(y.data()[0], 0.0f);
    EXPECT_LE(y.data()[1], 1.0f);
  }
}

TEST(Crf, InverseRoundTrips) {
  const Tensor<float> x = make_scene(4, 8, 8, 3);
  const auto back = apply_crf(inverse_crf(x, 2.2), 2.2);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-5);
}

TEST(SynthesizePair, LinearResponseGivesExactStdAwayFromBounds) {
  NoiseParams p;
  p.sigma_s = 0.1;
  p.sigma_c = 0.02;
  p.crf_gamma = 1.0;
  p.seed = 3;
  const Tensor<float> clean = make_scene(5, 16, 16, 3);
  const auto out = synthesize_pair(clean, p);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double x = clean.data()[i];
    const double s = std::sqrt(x * 0.01 + 0.0004);
    EXPECT_LE(out.sigma1.data()[i], s * (1.0 + 1e-6));
    if (x > 7.0 * s && x < 1.0 - 7.0 * s) {
      EXPECT_NEAR(out.sigma1.data()[i], s, 1e-6 * s);
    }
  }
}

TEST(PropagateSigma, ClippedZeroIsHalfNormalStd) {
  const double s = 0.05;
  EXPECT_NEAR(propagate_sigma(0.0, s, 1.0), s * std::sqrt(0.5 * (1.0 - 1.0 / M_PI)), 1e-9);
  EXPECT_NEAR(propagate_sigma(1.0, s, 1.0), s * std::sqrt(0.5 * (1.0 - 1.0 / M_PI)), 1e-9);
  EXPECT_EQ(propagate_sigma(0.3, 0.0, 2.2), 0.0);
}

// Per-pixel spread of (noisy - clean) over independent realizations.
std::vector<double> monte_carlo_std(const Tensor<float>& clean, NoiseParams p, int reps,
                                    std::vector<double>* means = nullptr) {
  const std::size_t n = clean.size();
  std::vector<std::vector<double>> samples(n, std::vector<double>(static_cast<std::size_t>(reps)));
  for (int r = 0; r < reps; ++r) {
    p.seed = mix_seed(1234, static_cast<std::uint64_t>(r));
    const auto out = synthesize_pair(clean, p);
    for (std::size_t i = 0; i < n; ++i) {
      samples[i][static_cast<std::size_t>(r)] = out.noisy.data()[i] - clean.data()[i];
    }
  }
  std::vector<double> sd(n);
  if (means != nullptr) means->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sd[i] = sample_std(samples[i]);
    if (means != nullptr) {
      for (double v : samples[i]) (*means)[i] += v / reps;
    }
  }
  return sd;
}

TEST(SynthesizePair, PropagatedStdMatchesMonteCarlo) {
  Tensor<float> clean(Shape{1, 1, 5, 1});
  const float levels[] = {0.02f, 0.1f, 0.3f, 0.5f, 0.9f};
  for (int i = 0; i < 5; ++i) clean.data()[static_cast<std::size_t>(i)] = levels[i];
  for (double gamma : {1.0, 2.2}) {
    for (auto [ss, sc] : {std::pair{0.08, 0.02}, std::pair{0.12, 0.06}, std::pair{0.0, 0.03}}) {
      NoiseParams p;
      p.sigma_s = ss;
      p.sigma_c = sc;
      p.crf_gamma = gamma;
      const auto sigma1 = synthesize_pair(clean, p).sigma1;
      const auto mc = monte_carlo_std(clean, p, 10000);
      for (std::size_t i = 0; i < mc.size(); ++i) {
        EXPECT_NEAR(sigma1.data()[i], mc[i], 0.05 * mc[i])
            << "gamma " << gamma << " sigma_s " << ss << " sigma_c " << sc << " x " << levels[i];
      }
    }
  }
}

TEST(SynthesizePair, NoiseIsMeanZeroForLinearResponse) {
  Tensor<float> clean(Shape{1, 4, 4, 1});
  for (std::size_t i = 0; i < clean.size(); ++i) clean.data()[i] = 0.3f + 0.025f * static_cast<float>(i);
  NoiseParams p;
  p.sigma_s = 0.08;
  p.sigma_c = 0.02;
  p.crf_gamma = 1.0;
  const int n = 10000;
  std::vector<double> means;
  const auto sd = monte_carlo_std(clean, p, n, &means);
  for (std::size_t i = 0; i < means.size(); ++i) {
    EXPECT_LE(std::abs(means[i]), 3.0 * sd[i] / std::sqrt(static_cast<double>(n))) << "pixel " << i;
  }
}

TEST(SynthesizePair, QuarterMapIsPooledFullMap) {
  NoiseParams p;
  p.sigma_s = 0.12;
  p.sigma_c = 0.03;
  p.crf_gamma = 2.0;
  p.field_amplitude = 0.5;
  p.seed = 21;
  const auto out = synthesize_pair(make_scene(6, 18, 22, 3), p);
  Tape<float> tape(false);
  const auto pooled = ops::avg_pool(tape, make_var(out.sigma1), 4);
  EXPECT_EQ(out.sigma4.shape(), pooled->shape());
  EXPECT_EQ(out.sigma4.storage(), pooled->storage());
}

TEST(SynthesizePair, NoiselessPipelineIsIdentity) {
  NoiseParams p;
  p.crf_gamma = 2.2;
  p.seed = 2;
  const Tensor<float> clean = make_scene(7, 16, 16, 3);
  const auto out = synthesize_pair(clean, p);
  EXPECT_EQ(out.noisy.storage(), clean.storage());
  for (float v : out.sigma1.data()) EXPECT_EQ(v, 0.0f);
}

TEST(SynthesizePair, StdMapIsNonNegativeAndBounded) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    NoiseParams p;
    p.sigma_s = rng.uniform(0.0, 0.16);
    p.sigma_c = rng.uniform(0.0, 0.06);
    p.crf_gamma = rng.uniform(1.0, 2.6);
    p.seed = rng.next_u64();
    const auto out = synthesize_pair(make_scene(p.seed, 16, 16, 3), p);
    // Hoelder bound of x^(1/gamma).
    const double s = std::sqrt(p.sigma_s * p.sigma_s + p.sigma_c * p.sigma_c);
    const double bound = std::pow(s, 1.0 / p.crf_gamma);
    for (float v : out.sigma1.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, bound * (1.0 + 1e-6));
    }
  }
}

TEST(SynthesizePair, FieldModulatesStd) {
  NoiseParams p;
  p.sigma_c = 0.05;
  p.crf_gamma = 1.0;
  p.field_amplitude = 0.6;
  p.seed = 4;
  const auto out = synthesize_pair(Tensor<float>(Shape{1, 32, 32, 1}, 0.5f), p);
  const auto [lo, hi] = std::minmax_element(out.sigma1.data().begin(), out.sigma1.data().end());
  EXPECT_GE(*lo, 0.05f * 0.4f - 1e-6f);
  EXPECT_LE(*hi, 0.05f * 1.6f + 1e-6f);
  EXPECT_GT(*hi - *lo, 0.01f);
}

TEST(SmoothField, WithinUnitRange) {
  const auto f = smooth_field(2, 20, 30, 5);
  for (float v : f.data()) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(DomainShift, DrawsStayInRanges) {
  auto [src, tgt] = make_domain_shift(default_source_domain(), default_target_domain(), 3);
  EXPECT_DOUBLE_EQ(src.domain().crf_gamma.lo, 1.8);
  EXPECT_DOUBLE_EQ(src.domain().crf_gamma.hi, 2.4);
  EXPECT_GT(tgt.domain().field_amplitude, 0.0);
  for (int i = 0; i < 1000; ++i) {
    const NoiseParams a = src.next();
    EXPECT_TRUE(src.domain().sigma_s.contains(a.sigma_s));
    EXPECT_TRUE(src.domain().sigma_c.contains(a.sigma_c));
    EXPECT_TRUE(src.domain().crf_gamma.contains(a.crf_gamma));
    EXPECT_EQ(a.field_amplitude, 0.0);
    const NoiseParams b = tgt.next();
    EXPECT_TRUE(tgt.domain().sigma_s.contains(b.sigma_s));
    EXPECT_TRUE(tgt.domain().sigma_c.contains(b.sigma_c));
    EXPECT_EQ(b.crf_gamma, 1.0);
  }
}

TEST(DomainShift, IdenticalRangesAreIndistinguishable) {
  const NoiseDomain d = default_source_domain();
  // Critical value of the two-sample KS test at alpha = 0.01, n = m = 1000.
  const double critical = 1.628 * std::sqrt(2.0 / 1000.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto [a, b] = make_domain_shift(d, d, seed);
    std::vector<double> as, bs, ac, bc, ag, bg;
    for (int i = 0; i < 1000; ++i) {
      const auto pa = a.next();
      const auto pb = b.next();
      as.push_back(pa.sigma_s);
      bs.push_back(pb.sigma_s);
      ac.push_back(pa.sigma_c);
      bc.push_back(pb.sigma_c);
      ag.push_back(pa.crf_gamma);
      bg.push_back(pb.crf_gamma);
    }
    EXPECT_LT(ks_statistic(as, bs), critical);
    EXPECT_LT(ks_statistic(ac, bc), critical);
    EXPECT_LT(ks_statistic(ag, bg), critical);
  }
}

TEST(DomainShift, DistinctRangesAreDistinguishable) {
  auto [a, b] = make_domain_shift(default_source_domain(), default_target_domain(), 9);
  std::vector<double> ag, bg;
  for (int i = 0; i < 1000; ++i) {
    ag.push_back(a.next().crf_gamma);
    bg.push_back(b.next().crf_gamma);
  }
  EXPECT_GT(ks_statistic(ag, bg), 0.5);
}

TEST(DomainShift, ReproducibleDraws) {
  auto [a1, b1] = make_domain_shift(default_source_domain(), default_target_domain(), 42);
  auto [a2, b2] = make_domain_shift(default_source_domain(), default_target_domain(), 42);
  for (int i = 0; i < 50; ++i) {
    const auto x = a1.next(), y = a2.next();
    EXPECT_EQ(x.sigma_s, y.sigma_s);
    EXPECT_EQ(x.seed, y.seed);
    EXPECT_EQ(b1.next().sigma_c, b2.next().sigma_c);
  }
}

TEST(DomainShift, EmptyRangeIsConfigError) {
  NoiseDomain d = default_source_domain();
  d.sigma_s = {0.1, 0.05};
  EXPECT_THROW(make_domain_shift(d, default_target_domain(), 1), ConfigError);
  NoiseDomain g = default_target_domain();
  g.crf_gamma = {0.0, 0.0};
  EXPECT_THROW(make_domain_shift(default_source_domain(), g, 1), ConfigError);
}

TEST(Scene, DeterministicAndInRange) {
  const auto a = make_scene(11, 24, 20, 3);
  const auto b = make_scene(11, 24, 20, 3);
  EXPECT_EQ(a.storage(), b.storage());
  for (float v : a.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_NE(a.storage(), make_scene(12, 24, 20, 3).storage());
  EXPECT_THROW(make_scene(1, 8, 8, 2), ConfigError);
}

}  // namespace
}  // namespace aind
