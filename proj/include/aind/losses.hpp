#pragma once

#include "aind/tape.hpp"
#include "aind/tensor.hpp"

namespace aind {

struct LossWeights {
  double w1 = 0.2;  // full-resolution estimation term
  double w4 = 0.8;  // quarter-resolution estimation term
  double alpha = 0.25;
  double lambda_asymm = 0.05;

  void validate() const;
};

// mean |alpha - 1[est - gt < 0]| * (est - gt)^2. alpha in (0, 0.5) so that
// under-estimation costs (1 - alpha) / alpha times more.
template <typename T>
Var<T> asymm_loss_single(Tape<T>& tape, const Var<T>& sigma_hat, const Var<T>& sigma, T alpha);

// w1 * term(sigma_hat1, sigma1) + w4 * term(sigma_hat4, avgpool4(sigma1)).
template <typename T>
Var<T> ms_asymm_loss(Tape<T>& tape, const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                     const Var<T>& sigma1, T w1, T w4, T alpha);

// Same two-scale split with plain L1 terms.
template <typename T>
Var<T> ms_l1_loss(Tape<T>& tape, const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                  const Var<T>& sigma1, T w1, T w4);

template <typename T>
struct JointLoss {
  Var<T> total;
  Var<T> recon;
  Var<T> asymm;
};

// mean |x_hat - x| + lambda_asymm * ms_asymm_loss.
template <typename T>
JointLoss<T> joint_loss_sn(Tape<T>& tape, const Var<T>& x_hat, const Var<T>& x,
                           const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                           const Var<T>& sigma1, const LossWeights& weights);

// Reconstruction-only objective for pairs without a noise-level ground truth.
template <typename T>
Var<T> recon_loss_rn(Tape<T>& tape, const Var<T>& x_hat, const Var<T>& x);

}  // namespace aind
