#pragma once

// Finite-difference check of objective_and_gradient on the tiny backbone in
// double precision. Shared by the unit tests and the acceptance binary.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "semisam/geometry.hpp"
#include "semisam/trainer.hpp"

namespace testing_support {

struct GradCheckResult {
  int coordinates = 0;
  int failures = 0;
  double worst_rel = 0.0;
};

struct GradCheckSetup {
  bool supervised = true;
  bool consistency = true;
  bool uncertainty_mask = false;
  bool oracle = true;
  bool dropout = true;
  std::int64_t t = 37;
  std::int64_t t_max = 100;
  int coordinates = 20;
  double h = 1e-3;
  double rel_tol = 1e-3;
  double abs_floor = 1e-7;
  std::uint64_t seed = 2024;
};

inline GradCheckResult run_gradcheck(const GradCheckSetup& s) {
  using namespace semisam;
  const nn::Backbone<double> net(nn::BackboneConfig::tiny());
  auto params = net.initial_parameters(s.seed);
  const Dims d{8, 8, 8};
  Rng rng(s.seed + 1);
  std::normal_distribution<float> g;
  auto image = [&] {
    Volume v(d);
    for (auto& x : v.data) x = g(rng);
    return v;
  };
  auto blob = [&](double cz, double cy, double cx, double r) {
    BinaryMask m(d);
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          m.at(z, y, x) = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
    return m;
  };
  const Volume l0 = image(), l1 = image(), u0 = image(), u1 = image();
  const BinaryMask m0 = blob(3.5, 4, 4, 2.5), m1 = blob(4, 3, 4.5, 3.0);

  std::vector<LabeledSample> labeled;
  if (s.supervised) labeled = {{&l0, &m0}, {&l1, &m1}};
  std::vector<UnlabeledSample<double>> unlabeled(2);
  unlabeled[0].image = &u0;
  unlabeled[1].image = &u1;
  for (auto& u : unlabeled) {
    u.teacher = net.forward(params.span(), nn::from_volume<double>(image()), false);
    if (s.uncertainty_mask) {
      BinaryMask cm(d);
      std::bernoulli_distribution coin(0.6);
      for (auto& v : cm.data) v = coin(rng);
      u.certain = cm;
    }
  }
  // Fixed pseudo-labels so the objective stays a smooth function of the
  // parameters; sample 1 is skipped.
  const BinaryMask pseudo = blob(4, 4, 4, 2.8);
  PseudoLabelSource<double> oracle = [&](std::size_t j, const nn::ProbMap<double>&) -> std::optional<BinaryMask> {
    if (j == 1) return std::nullopt;
    return pseudo;
  };
  const ObjectiveWeights w{s.t, s.t_max, 0.1, s.consistency};

  auto eval = [&](std::span<double> grad) {
    Rng a(s.seed + 7), b(s.seed + 8);
    return objective_and_gradient<double>(net, params.span(), labeled, unlabeled, s.oracle ? &oracle : nullptr, w,
                                          s.dropout ? &a : nullptr, s.dropout ? &b : nullptr, grad)
        .total;
  };
  std::vector<double> grad(params.size(), 0.0);
  eval(grad);

  GradCheckResult r;
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  for (int k = 0; k < s.coordinates; ++k) {
    const std::size_t i = pick(rng);
    const double orig = params.values[i];
    params.values[i] = orig + s.h;
    const double up = eval({});
    params.values[i] = orig - s.h;
    const double dn = eval({});
    params.values[i] = orig;
    const double fd = (up - dn) / (2 * s.h);
    const double rel = std::abs(fd - grad[i]) / std::max(std::max(std::abs(fd), std::abs(grad[i])), s.abs_floor);
    ++r.coordinates;
    r.worst_rel = std::max(r.worst_rel, rel);
    if (rel > s.rel_tol) ++r.failures;
  }
  return r;
}

}  // namespace testing_support
