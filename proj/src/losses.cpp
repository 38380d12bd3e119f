#include "aind/losses.hpp"

#include "aind/ops.hpp"

namespace aind {

void LossWeights::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must lie in (0, 0.5)");
  if (w1 < 0.0 || w4 < 0.0) throw ConfigError("scale weights must be non-negative");
  if (lambda_asymm < 0.0) throw ConfigError("lambda_asymm must be non-negative");
}

template <typename T>
Var<T> asymm_loss_single(Tape<T>& tape, const Var<T>& sigma_hat, const Var<T>& sigma, T alpha) {
  if (!(alpha > T{0} && alpha < T{0.5})) throw ConfigError("alpha must lie in (0, 0.5)");
  return ops::asymmetric_sq_error(tape, sigma_hat, sigma, alpha);
}

template <typename T>
Var<T> ms_asymm_loss(Tape<T>& tape, const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                     const Var<T>& sigma1, T w1, T w4, T alpha) {
  auto sigma4 = ops::avg_pool(tape, sigma1, 4);
  auto full = asymm_loss_single(tape, sigma_hat1, sigma1, alpha);
  auto quarter = asymm_loss_single(tape, sigma_hat4, sigma4, alpha);
  return ops::weighted_sum(tape, full, w1, quarter, w4);
}

template <typename T>
Var<T> ms_l1_loss(Tape<T>& tape, const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                  const Var<T>& sigma1, T w1, T w4) {
  auto sigma4 = ops::avg_pool(tape, sigma1, 4);
  auto full = ops::mean_abs_error(tape, sigma_hat1, sigma1);
  auto quarter = ops::mean_abs_error(tape, sigma_hat4, sigma4);
  return ops::weighted_sum(tape, full, w1, quarter, w4);
}

template <typename T>
JointLoss<T> joint_loss_sn(Tape<T>& tape, const Var<T>& x_hat, const Var<T>& x,
                           const Var<T>& sigma_hat1, const Var<T>& sigma_hat4,
                           const Var<T>& sigma1, const LossWeights& weights) {
  weights.validate();
  auto recon = ops::mean_abs_error(tape, x_hat, x);
  auto asymm = ms_asymm_loss(tape, sigma_hat1, sigma_hat4, sigma1, static_cast<T>(weights.w1),
                             static_cast<T>(weights.w4), static_cast<T>(weights.alpha));
  auto total = ops::weighted_sum(tape, recon, T{1}, asymm, static_cast<T>(weights.lambda_asymm));
  return {total, recon, asymm};
}

template <typename T>
Var<T> recon_loss_rn(Tape<T>& tape, const Var<T>& x_hat, const Var<T>& x) {
  return ops::mean_abs_error(tape, x_hat, x);
}

#define AIND_INSTANTIATE_LOSSES(T)                                                              \
  template Var<T> asymm_loss_single(Tape<T>&, const Var<T>&, const Var<T>&, T);                 \
  template Var<T> ms_asymm_loss(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, T, T, T); \
  template Var<T> ms_l1_loss(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, T, T);     \
  template JointLoss<T> joint_loss_sn(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&,    \
                                      const Var<T>&, const Var<T>&, const LossWeights&);        \
  template Var<T> recon_loss_rn(Tape<T>&, const Var<T>&, const Var<T>&);

AIND_INSTANTIATE_LOSSES(float)
AIND_INSTANTIATE_LOSSES(double)

#undef AIND_INSTANTIATE_LOSSES

}  // namespace aind
