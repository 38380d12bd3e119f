#pragma once

#include <limits>
#include <vector>

#include "aind/tensor.hpp"

namespace aind {

// Returned by psnr() when the images are identical.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(peak^2 / MSE) over all elements.
double psnr(const Tensor<float>& a, const Tensor<float>& b, double peak = 1.0);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, peak 1) over the
// valid window positions, averaged over the batch. Color images are scored
// on luma; other channel counts are averaged per channel.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

inline constexpr int kSsimWindow = 11;

Tensor<float> to_luma(const Tensor<float>& rgb);
Tensor<float> clip01(const Tensor<float>& x);

// Element i of the dihedral group: k & 3 quarter turns counter-clockwise
// after a horizontal flip when k >= 4.
Tensor<float> dihedral(const Tensor<float>& x, int k);
Tensor<float> dihedral_inverse(const Tensor<float>& x, int k);

// (1, h, w, C) window of image n at (y, x).
Tensor<float> crop_patch(const Tensor<float>& x, int n, int y, int x0, int h, int w);

// Concatenates (1, H, W, C) tensors along the batch axis.
Tensor<float> stack_batch(const std::vector<Tensor<float>>& items);

}  // namespace aind
