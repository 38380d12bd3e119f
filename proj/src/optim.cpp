#include "aind/optim.hpp"

#include <cmath>

namespace aind {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg, const TagSet& trainable) {
  bool any_grad = false;
  for (const auto& e : store.entries()) any_grad = any_grad || e.value->has_grad();
  if (!any_grad) throw StateError("adam_step called before backward");

  for (auto& e : store.entries()) {
    if (!trainable.contains(e.tag) || !e.value->has_grad()) continue;
    auto p = e.value->data();
    auto g = e.value->grad();
    if (e.moment1.size() != p.size()) {
      e.moment1.assign(p.size(), T{0});
      e.moment2.assign(p.size(), T{0});
    }
    ++e.steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.steps));
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T step = static_cast<T>(cfg.lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < p.size(); ++i) {
      e.moment1[i] = b1 * e.moment1[i] + (T{1} - b1) * g[i];
      e.moment2[i] = b2 * e.moment2[i] + (T{1} - b2) * g[i] * g[i];
      p[i] -= step * e.moment1[i] / (std::sqrt(e.moment2[i] * inv_c2) + eps);
    }
  }
}

template void adam_step(ParamStore<float>&, const AdamConfig&, const TagSet&);
template void adam_step(ParamStore<double>&, const AdamConfig&, const TagSet&);

}  // namespace aind
