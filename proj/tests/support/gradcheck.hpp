#pragma once

// Central-difference gradient oracle shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aind/ops.hpp"
#include "aind/rng.hpp"
#include "aind/tape.hpp"
#include "aind/tensor.hpp"

namespace aind::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Var<T> random_var(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return make_var(random_tensor<T>(s, rng, lo, hi), true);
}

// Reduces an arbitrary output to a scalar with fixed random weights so every
// output element contributes a distinct amount.
template <typename T>
struct Projector {
  explicit Projector(std::uint64_t seed) : seed(seed) {}
  Var<T> operator()(Tape<T>& tape, const Var<T>& out) const {
    Rng rng(seed);
    auto w = make_var(random_tensor<T>(out->shape(), rng, 0.5, 1.5));
    return ops::sum(tape, ops::mul(tape, out, w));
  }
  std::uint64_t seed;
};

struct TensorError {
  std::string name;
  double rel = 0.0;
  double analytic_max = 0.0;
  double numeric_max = 0.0;
  double abs_diff = 0.0;
};

struct GradCheckReport {
  std::vector<TensorError> tensors;
  double worst() const {
    double w = 0.0;
    for (const auto& t : tensors) w = std::max(w, t.rel);
    return w;
  }
  std::string worst_name() const {
    double w = -1.0;
    std::string n;
    for (const auto& t : tensors) {
      if (t.rel > w) {
        w = t.rel;
        n = t.name;
      }
    }
    return n;
  }
};

// Relative error of one tensor: max|a - n| / max(max|a|, max|n|, floor).
// The floor is kGradFloor times the largest gradient seen anywhere in the
// same check (and at least kGradFloor). Gradients that are analytically
// zero, such as a conv bias feeding straight into an instance norm, then get
// an absolute test instead of dividing rounding noise by rounding noise.
inline constexpr double kGradFloor = 1e-3;

template <typename T>
using LossFn = std::function<Var<T>(Tape<T>&)>;

// Central difference of the loss along one coordinate of `v`.
template <typename T>
double numeric_partial(const LossFn<T>& loss_fn, Tensor<T>& v, std::size_t i, double step) {
  const T orig = v.data()[i];
  v.data()[i] = static_cast<T>(orig + step);
  Tape<T> tp(false);
  const double up = static_cast<double>(loss_fn(tp)->item());
  v.data()[i] = static_cast<T>(orig - step);
  Tape<T> tm(false);
  const double down = static_cast<double>(loss_fn(tm)->item());
  v.data()[i] = orig;
  return (up - down) / (2.0 * step);
}

inline std::vector<std::size_t> pick_coords(std::size_t size, std::size_t max_coords, Rng& rng) {
  std::vector<std::size_t> coords;
  if (max_coords == 0 || max_coords >= size) {
    for (std::size_t i = 0; i < size; ++i) coords.push_back(i);
  } else {
    for (std::size_t i = 0; i < max_coords; ++i) {
      coords.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(size) - 1)));
    }
  }
  return coords;
}

inline TensorError compare(const std::string& name, const std::vector<double>& analytic,
                           const std::vector<double>& numeric) {
  double diff = 0.0, amax = 0.0, nmax = 0.0;
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    diff = std::max(diff, std::abs(numeric[j] - analytic[j]));
    amax = std::max(amax, std::abs(analytic[j]));
    nmax = std::max(nmax, std::abs(numeric[j]));
  }
  TensorError e;
  e.name = name;
  e.analytic_max = amax;
  e.numeric_max = nmax;
  e.abs_diff = diff;
  return e;
}

// Fills in the relative errors once the global gradient scale is known.
inline void finalize(GradCheckReport& report) {
  double scale = 1.0;
  for (const auto& t : report.tensors) scale = std::max({scale, t.analytic_max, t.numeric_max});
  const double floor = kGradFloor * scale;
  for (auto& t : report.tensors) t.rel = t.abs_diff / std::max({t.analytic_max, t.numeric_max, floor});
}

// Compares backward() against central differences for the listed tensors.
// `max_coords` > 0 checks that many randomly chosen coordinates per tensor
// instead of all of them.
template <typename T>
GradCheckReport grad_check(const LossFn<T>& loss_fn, const std::vector<Var<T>>& inputs,
                           const std::vector<std::string>& names, double step,
                           std::size_t max_coords = 0, std::uint64_t coord_seed = 7) {
  for (const auto& v : inputs) v->clear_grad();
  Tape<T> tape;
  auto loss = loss_fn(tape);
  tape.backward(loss);

  GradCheckReport report;
  Rng pick(coord_seed);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& v = *inputs[t];
    const auto coords = pick_coords(v.size(), max_coords, pick);
    std::vector<double> analytic, numeric;
    for (std::size_t i : coords) {
      analytic.push_back(v.has_grad() ? static_cast<double>(v.grad()[i]) : 0.0);
    }
    for (std::size_t i : coords) numeric.push_back(numeric_partial(loss_fn, v, i, step));
    report.tensors.push_back(
        compare(t < names.size() ? names[t] : "input" + std::to_string(t), analytic, numeric));
  }
  finalize(report);
  return report;
}

}  // namespace aind::testing
