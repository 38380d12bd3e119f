#pragma once

#include "aind/params.hpp"

namespace aind {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Bias-corrected Adam update on every parameter whose tag is in `trainable`
// and which received a gradient. Everything else is left bit-identical.
// Throws StateError when no parameter in the store carries a gradient.
template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg, const TagSet& trainable);

}  // namespace aind
