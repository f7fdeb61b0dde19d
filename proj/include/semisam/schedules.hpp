#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "semisam/error.hpp"

namespace semisam {

namespace detail {
inline double ramp_position(std::int64_t t, std::int64_t t_max) {
  if (t_max <= 0) throw ContractViolation("t_max must be positive");
  if (t < 0 || t > t_max) {
    throw ContractViolation("iteration " + std::to_string(t) + " outside [0, " + std::to_string(t_max) + "]");
  }
  return static_cast<double>(t) / static_cast<double>(t_max);
}
}  // namespace detail

/// Teacher-consistency weight, w_base * exp(-5 (1 - t/t_max)); grows to w_base.
inline double lambda_c(std::int64_t t, std::int64_t t_max, double w_base = 0.1) {
  return w_base * std::exp(-5.0 * (1.0 - detail::ramp_position(t, t_max)));
}

/// Oracle-consistency weight, w_base * exp(-5 t/t_max); decays from w_base.
inline double lambda_s(std::int64_t t, std::int64_t t_max, double w_base = 0.1) {
  return w_base * std::exp(-5.0 * detail::ramp_position(t, t_max));
}

enum class RampKind { up, down };

struct RampSchedule {
  RampKind kind = RampKind::up;
  double w_base = 0.1;
  std::int64_t t_max = 6000;

  double operator()(std::int64_t t) const {
    if (!(w_base > 0.0)) throw ContractViolation("ramp weight must be positive");
    return kind == RampKind::up ? lambda_c(t, t_max, w_base) : lambda_s(t, t_max, w_base);
  }
};

/// Step decay: lr0 / decay_factor^floor(t / decay_every).
struct LrSchedule {
  double lr0 = 0.01;
  std::int64_t decay_every = 2500;
  double decay_factor = 10.0;

  double operator()(std::int64_t t) const {
    if (t < 0) throw ContractViolation("negative iteration");
    const auto drops = t / decay_every;
    double lr = lr0;
    for (std::int64_t i = 0; i < drops; ++i) lr /= decay_factor;
    return lr;
  }
};

inline double learning_rate(std::int64_t t, const LrSchedule& schedule = {}) { return schedule(t); }

}  // namespace semisam
