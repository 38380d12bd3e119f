#pragma once

// Differentiable tensor operations over NHWC feature maps. Every op computes
// its output eagerly and, when the tape is recording and an input requires a
// gradient, appends the matching backward closure to the tape.

#include <span>

#include "aind/tape.hpp"
#include "aind/tensor.hpp"

namespace aind::ops {

// Zero-padded cross-correlation. weight is (k, k, C_in, C_out); bias is
// C_out values in any shape, or null.
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weight, const Var<T>& bias,
              int stride, int pad);

// Adjoint of a pad-0 conv2d with the same (k, k, C_out, C_in) kernel, i.e. the
// kernel tensor of the conv that maps C_out -> C_in. Output is (H-1)*s+k.
template <typename T>
Var<T> transposed_conv2d(Tape<T>& tape, const Var<T>& input, const Var<T>& weight,
                         const Var<T>& bias, int stride);

// Mean over k x k blocks. Sizes not divisible by k are replicate-padded on
// the bottom/right, so the output is ceil(H/k) x ceil(W/k).
template <typename T>
Var<T> avg_pool(Tape<T>& tape, const Var<T>& input, int k);

// Bilinear upsampling with half-pixel centers: source coordinate
// u = (o + 0.5) / factor - 0.5, clamped to the valid range.
template <typename T>
Var<T> upsample_linear(Tape<T>& tape, const Var<T>& input, int factor);

template <typename T>
Var<T> upsample_nearest(Tape<T>& tape, const Var<T>& input, int factor);

template <typename T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& input, T slope);

// log(1 + exp(x)), evaluated stably.
template <typename T>
Var<T> softplus(Tape<T>& tape, const Var<T>& input);

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T factor);

// a * wa + b * wb for same-shape inputs.
template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& a, T wa, const Var<T>& b, T wb);

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

// Extends the bottom/right edges by replication to (h, w).
template <typename T>
Var<T> pad_replicate(Tape<T>& tape, const Var<T>& input, int h, int w);

// Keeps the top-left (h, w) window.
template <typename T>
Var<T> crop(Tape<T>& tape, const Var<T>& input, int h, int w);

// Per-sample, per-channel normalization (h - mu) / sqrt(var + eps) with the
// biased variance over the spatial extent.
template <typename T>
Var<T> instance_norm(Tape<T>& tape, const Var<T>& input, T eps);

// gamma * x + beta. gamma and beta either match x's shape or are (1,1,1,C).
template <typename T>
Var<T> modulate(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& input);

template <typename T>
Var<T> mean(Tape<T>& tape, const Var<T>& input);

// mean |a - b|. Subgradient 0 at equality.
template <typename T>
Var<T> mean_abs_error(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

// mean over elements of |alpha - 1[est - target < 0]| * (est - target)^2.
// target is treated as a constant.
template <typename T>
Var<T> asymmetric_sq_error(Tape<T>& tape, const Var<T>& estimate, const Var<T>& target, T alpha);

}  // namespace aind::ops
