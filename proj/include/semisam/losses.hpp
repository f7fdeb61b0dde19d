#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "semisam/schedules.hpp"
#include "semisam/tensor.hpp"

namespace semisam {

// Each loss optionally accumulates weight * d(loss)/d(probabilities) into
// `grad`, laid out like ProbMap::values.

namespace detail {
template <typename T>
void check_pair(const nn::ProbMap<T>& p, const Dims& dims, std::span<T> grad, const char* what) {
  if (p.channels != 2) throw ShapeMismatch(std::string(what) + ": expected a two-class probability map");
  require_same_shape(p.dims, dims, what);
  if (!grad.empty() && grad.size() != p.values.size()) throw ShapeMismatch(std::string(what) + ": gradient size");
}
}  // namespace detail

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbClamp = 1e-7;

/// 1 - (2 sum(p_fg y) + eps) / (sum(p_fg) + sum(y) + eps), eps = 1e-5.
template <typename T>
T dice_loss(const nn::ProbMap<T>& p, const BinaryMask& y, std::span<T> grad = {}, T weight = T(1)) {
  detail::check_pair(p, y.shape, grad, "dice_loss");
  const T* fg = p.channel(1);
  const std::size_t n = y.data.size();
  double inter = 0.0, sum_p = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    inter += static_cast<double>(fg[i]) * y.data[i];
    sum_p += fg[i];
    sum_y += y.data[i];
  }
  const double num = 2.0 * inter + kDiceSmooth;
  const double den = sum_p + sum_y + kDiceSmooth;
  if (!grad.empty()) {
    T* g = grad.data() + n;
    const double inv = 1.0 / (den * den);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] += weight * static_cast<T>(-(2.0 * y.data[i] * den - num) * inv);
    }
  }
  return static_cast<T>(1.0 - num / den);
}

/// Mean over voxels of -ln p_true, probabilities clamped to [1e-7, 1 - 1e-7].
template <typename T>
T ce_loss(const nn::ProbMap<T>& p, const BinaryMask& y, std::span<T> grad = {}, T weight = T(1)) {
  detail::check_pair(p, y.shape, grad, "ce_loss");
  const std::size_t n = y.data.size();
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = y.data[i] ? 1 : 0;
    const double q = p.channel(c)[i];
    const double qc = std::clamp(q, lo, hi);
    acc -= std::log(qc);
    if (!grad.empty() && q > lo && q < hi) {
      grad[c * n + i] += weight * static_cast<T>(-1.0 / (qc * static_cast<double>(n)));
    }
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

/// 0.5 * dice_loss + 0.5 * ce_loss.
template <typename T>
T supervised_loss(const nn::ProbMap<T>& p, const BinaryMask& y, std::span<T> grad = {}, T weight = T(1)) {
  const T half = weight * T(0.5);
  return T(0.5) * dice_loss(p, y, grad, half) + T(0.5) * ce_loss(p, y, grad, half);
}

/// Mean squared difference over all class channels; gradient flows to
/// `student` only. With a mask, the mean runs over mask = 1 voxels and an
/// all-zero mask yields 0.
template <typename T>
T consistency_loss(const nn::ProbMap<T>& student, const nn::ProbMap<T>& teacher, const BinaryMask* mask = nullptr,
                   std::span<T> grad = {}, T weight = T(1)) {
  if (student.channels != teacher.channels) throw ShapeMismatch("consistency_loss: channel mismatch");
  require_same_shape(student.dims, teacher.dims, "consistency_loss");
  if (mask) require_same_shape(student.dims, mask->shape, "consistency_loss mask");
  if (!grad.empty() && grad.size() != student.values.size()) throw ShapeMismatch("consistency_loss: gradient size");
  const std::size_t n = student.plane();
  const int c = student.channels;
  const std::size_t selected = mask ? mask->count() : n;
  if (selected == 0) return T(0);
  const double denom = static_cast<double>(selected) * c;
  double acc = 0.0;
  for (int k = 0; k < c; ++k) {
    const T* s = student.channel(k);
    const T* t = teacher.channel(k);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask && !mask->data[i]) continue;
      const double d = static_cast<double>(s[i]) - t[i];
      acc += d * d;
      if (!grad.empty()) grad[k * n + i] += weight * static_cast<T>(2.0 * d / denom);
    }
  }
  return static_cast<T>(acc / denom);
}

/// consistency_loss against the one-hot pseudo-label.
template <typename T>
T sam_consistency_loss(const nn::ProbMap<T>& student, const BinaryMask& pseudo_label, std::span<T> grad = {},
                       T weight = T(1)) {
  return consistency_loss(student, nn::one_hot<T>(pseudo_label), nullptr, grad, weight);
}

struct LossBreakdown {
  double l_sup = 0.0;
  double l_con = 0.0;
  double l_sam = 0.0;
  double lambda_c = 0.0;
  double lambda_s = 0.0;
  double total = 0.0;
  bool sam_skipped = false;
};

/// l_sup + lambda_c l_con + lambda_s l_sam, with the oracle term dropped when
/// skipped. Throws NonFiniteLoss naming the first bad term.
inline LossBreakdown total_objective(double l_sup, double l_con, double l_sam, std::int64_t t, std::int64_t t_max,
                                     bool sam_skipped, double w_base = 0.1) {
  if (!std::isfinite(l_sup)) throw NonFiniteLoss("l_sup", l_sup);
  if (!std::isfinite(l_con)) throw NonFiniteLoss("l_con", l_con);
  if (!sam_skipped && !std::isfinite(l_sam)) throw NonFiniteLoss("l_sam", l_sam);
  LossBreakdown b;
  b.l_sup = l_sup;
  b.l_con = l_con;
  b.l_sam = sam_skipped ? 0.0 : l_sam;
  b.lambda_c = lambda_c(t, t_max, w_base);
  b.lambda_s = lambda_s(t, t_max, w_base);
  b.sam_skipped = sam_skipped;
  b.total = l_sup + b.lambda_c * l_con + (sam_skipped ? 0.0 : b.lambda_s * l_sam);
  return b;
}

}  // namespace semisam
