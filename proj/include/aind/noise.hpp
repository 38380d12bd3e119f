#pragma once

// Noise synthesis: AWGN, heteroscedastic Gaussian in the linear domain, a
// power-law camera response, and the full pair synthesizer that also returns
// ground-truth noise-level maps at full and quarter resolution.

#include <cstdint>
#include <utility>

#include "aind/rng.hpp"
#include "aind/tensor.hpp"

namespace aind {

struct NoiseParams {
  double sigma_s = 0.0;  // signal-dependent level
  double sigma_c = 0.0;  // signal-independent level
  double crf_gamma = 1.0;
  // Relative amplitude of a smooth multiplicative field on the noise std;
  // 0 disables it. Must be < 1.
  double field_amplitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Distribution over NoiseParams.
struct NoiseDomain {
  Range sigma_s{0.0, 0.16};
  Range sigma_c{0.0, 0.06};
  Range crf_gamma{1.6, 2.6};
  double field_amplitude = 0.0;

  void validate() const;
};

class NoiseSampler {
 public:
  NoiseSampler(NoiseDomain domain, std::uint64_t seed);
  NoiseParams next();
  const NoiseDomain& domain() const { return domain_; }

 private:
  NoiseDomain domain_;
  Rng rng_;
};

// Source: varied CRFs, no spatial field. Target: linear response with a
// spatially correlated noise field.
NoiseDomain default_source_domain();
NoiseDomain default_target_domain();

std::pair<NoiseSampler, NoiseSampler> make_domain_shift(const NoiseDomain& source,
                                                        const NoiseDomain& target,
                                                        std::uint64_t seed);

struct NoisyImage {
  Tensor<float> noisy;
  Tensor<float> sigma1;  // full-resolution std map
  Tensor<float> sigma4;  // 4x4 average pool of sigma1
};

NoisyImage sample_awgn(const Tensor<float>& clean, double sigma, std::uint64_t seed,
                       bool clip = true);

struct HeteroscedasticSample {
  Tensor<float> noisy_linear;  // unclipped
  Tensor<float> variance;      // x * sigma_s^2 + sigma_c^2 (times field^2 if enabled)
};

HeteroscedasticSample sample_heteroscedastic(const Tensor<float>& clean_linear,
                                             const NoiseParams& p);

// x^(1/gamma) on [0, 1] inputs (values outside are clipped first).
Tensor<float> apply_crf(const Tensor<float>& linear, double crf_gamma);
Tensor<float> inverse_crf(const Tensor<float>& srgb, double crf_gamma);

// Std of f(clip(x + n)), n ~ N(0, s^2), through the power-law response f,
// integrated by Gauss-Legendre quadrature with the clip masses in closed form.
// Equals s for gamma = 1 away from the [0, 1] bounds.
double propagate_sigma(double x_linear, double s, double crf_gamma);

// Smooth field in [-1, 1]: a coarse grid of uniform draws, bilinearly
// upsampled with half-pixel centers.
Tensor<float> smooth_field(int n, int h, int w, std::uint64_t seed, int grid = 4);

// inverse CRF -> heteroscedastic noise -> CRF -> clip, with the propagated
// ground-truth std map and its 4x4 pool.
NoisyImage synthesize_pair(const Tensor<float>& clean_srgb, const NoiseParams& p);

// Piecewise-smooth synthetic scene in [0, 1]: gradient background, random
// rectangles and discs, low-amplitude texture.
Tensor<float> make_scene(std::uint64_t seed, int h, int w, int channels);

}  // namespace aind
