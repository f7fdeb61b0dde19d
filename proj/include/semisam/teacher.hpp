#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>

#include "semisam/network.hpp"

namespace semisam {

/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
template <typename T>
void ema_update(std::span<T> teacher, std::span<const T> student, double alpha) {
  if (teacher.size() != student.size()) throw ShapeMismatch("ema_update: parameter layout mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("ema_update: alpha outside [0, 1]");
  if (alpha == 1.0) return;
  if (alpha == 0.0) {
    std::copy(student.begin(), student.end(), teacher.begin());
    return;
  }
  const T a = static_cast<T>(alpha);
  const T b = static_cast<T>(1.0 - alpha);
  for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = a * teacher[i] + b * student[i];
}

/// Warm-up decay min(1 - 1/(t + 1), 0.99).
inline double ema_alpha(std::int64_t t, double cap = 0.99) {
  if (t < 0) throw ContractViolation("ema_alpha: negative iteration");
  return std::min(1.0 - 1.0 / static_cast<double>(t + 1), cap);
}

/// Per-voxel predictive entropy, in [0, ln C].
using UncertaintyMap = Volume;

template <typename T>
UncertaintyMap predictive_entropy(const nn::ProbMap<T>& mean) {
  UncertaintyMap u(mean.dims);
  for (std::size_t i = 0; i < u.data.size(); ++i) {
    double h = 0.0;
    for (int c = 0; c < mean.channels; ++c) {
      const double p = mean.channel(c)[i];
      if (p > 0.0) h -= p * std::log(p);
    }
    u.data[i] = static_cast<float>(h);
  }
  return u;
}

struct UncertaintyOptions {
  int passes = 8;
  double noise_sigma = 0.1;
  double noise_clip = 0.2;
  bool input_noise = true;
};

/// Mean of `passes` stochastic teacher forwards and its entropy. RNG order per
/// pass: input noise first, then dropout.
template <typename T>
std::pair<nn::ProbMap<T>, UncertaintyMap> estimate_uncertainty(const nn::Backbone<T>& net,
                                                               std::span<const T> teacher_params,
                                                               const Volume& patch, const UncertaintyOptions& opt,
                                                               Rng& noise_rng, Rng& dropout_rng) {
  if (opt.passes < 2) throw ContractViolation("estimate_uncertainty: at least two passes are required");
  nn::ProbMap<T> mean(net.config().num_classes, patch.shape);
  for (int k = 0; k < opt.passes; ++k) {
    const Volume input = opt.input_noise ? nn::perturb_input(patch, noise_rng, opt.noise_sigma, opt.noise_clip) : patch;
    const auto p = net.forward(teacher_params, nn::from_volume<T>(input), true, &dropout_rng);
    for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += p.values[i];
  }
  const T inv = T(1) / static_cast<T>(opt.passes);
  for (T& v : mean.values) v *= inv;
  UncertaintyMap u = predictive_entropy(mean);
  return {std::move(mean), std::move(u)};
}

/// 1 where u < (0.75 + 0.25 t/t_max) ln 2.
inline BinaryMask uncertainty_mask(const UncertaintyMap& u, std::int64_t t, std::int64_t t_max) {
  if (t_max <= 0) throw ContractViolation("uncertainty_mask: t_max must be positive");
  const double threshold =
      (0.75 + 0.25 * static_cast<double>(t) / static_cast<double>(t_max)) * std::numbers::ln2;
  BinaryMask m(u.shape);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = u.data[i] < threshold ? 1 : 0;
  return m;
}

}  // namespace semisam
