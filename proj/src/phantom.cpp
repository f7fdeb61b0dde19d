#include "semisam/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "semisam/geometry.hpp"
#include "semisam/random.hpp"

namespace semisam {

std::pair<Volume, BinaryMask> make_phantom(const PhantomSpec& spec) {
  const int dims[3] = {spec.shape.d, spec.shape.h, spec.shape.w};
  const double reach = 1.0 + std::abs(spec.perturbation);
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw ContractViolation("phantom shape must be positive");
    if (!(spec.radii[a] > 0.0)) throw ContractViolation("phantom radii must be positive");
    const double extent = spec.radii[a] * reach;
    if (spec.center[a] - extent < -0.5 || spec.center[a] + extent > dims[a] - 0.5) {
      throw ContractViolation("phantom ellipsoid exceeds the volume bounds");
    }
  }
  if (spec.noise_sigma < 0.0) throw ContractViolation("negative phantom noise");
  for (const auto& d : spec.distractors) {
    if (!(d.radius > 0.0)) throw ContractViolation("distractor radius must be positive");
    for (int a = 0; a < 3; ++a) {
      if (d.center[a] - d.radius < -0.5 || d.center[a] + d.radius > dims[a] - 0.5) {
        throw ContractViolation("distractor exceeds the volume bounds");
      }
    }
  }

  BinaryMask mask(spec.shape, 0);
  const double f = spec.perturbation_frequency;
  for (int z = 0; z < spec.shape.d; ++z)
    for (int y = 0; y < spec.shape.h; ++y)
      for (int x = 0; x < spec.shape.w; ++x) {
        const double u = (z - spec.center[0]) / spec.radii[0];
        const double v = (y - spec.center[1]) / spec.radii[1];
        const double w = (x - spec.center[2]) / spec.radii[2];
        const double rho = std::sqrt(u * u + v * v + w * w);
        double limit = 1.0;
        if (spec.perturbation != 0.0 && rho > 0.0) {
          // Smooth function of the unit direction, so the surface has no seam.
          const double ph = spec.perturbation_phase;
          limit += spec.perturbation * std::sin(f * u / rho + ph) * std::cos(f * w / rho + 2.0 * ph) *
                   std::cos(0.5 * f * v / rho);
        }
        mask.at(z, y, x) = rho <= limit ? 1 : 0;
      }
  mask = largest_component(mask);

  Volume image(spec.shape, spec.spacing, 0.0f);
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  if (!(spec.bias_wavelength > 0.0)) throw ContractViolation("bias wavelength must be positive");
  const double k = 2.0 * std::numbers::pi / spec.bias_wavelength;
  const auto& dir = spec.bias_direction;
  for (int z = 0; z < spec.shape.d; ++z)
    for (int y = 0; y < spec.shape.h; ++y)
      for (int x = 0; x < spec.shape.w; ++x) {
        const std::size_t i = spec.shape.index(z, y, x);
        double value = spec.background + spec.contrast * mask.data[i];
        if (spec.bias_amplitude != 0.0) {
          value += spec.bias_amplitude * std::sin(k * (dir[0] * z + dir[1] * y + dir[2] * x) + spec.bias_phase);
        }
        if (spec.noise_sigma > 0.0) value += noise(rng);
        image.data[i] = static_cast<float>(value);
      }
  for (const auto& d : spec.distractors) {
    const int lo[3] = {static_cast<int>(std::floor(d.center[0] - d.radius)), static_cast<int>(std::floor(d.center[1] - d.radius)),
                       static_cast<int>(std::floor(d.center[2] - d.radius))};
    const int hi[3] = {static_cast<int>(std::ceil(d.center[0] + d.radius)), static_cast<int>(std::ceil(d.center[1] + d.radius)),
                       static_cast<int>(std::ceil(d.center[2] + d.radius))};
    for (int z = std::max(lo[0], 0); z <= std::min(hi[0], dims[0] - 1); ++z)
      for (int y = std::max(lo[1], 0); y <= std::min(hi[1], dims[1] - 1); ++y)
        for (int x = std::max(lo[2], 0); x <= std::min(hi[2], dims[2] - 1); ++x) {
          const double dz = z - d.center[0], dy = y - d.center[1], dx = x - d.center[2];
          if (dz * dz + dy * dy + dx * dx <= d.radius * d.radius && !mask.at(z, y, x)) {
            image.at(z, y, x) += static_cast<float>(d.intensity);
          }
        }
  }
  return {std::move(image), std::move(mask)};
}

std::vector<PhantomSpec> draw_phantom_specs(const SyntheticDatasetSpec& spec) {
  if (spec.num_cases <= 0) throw ContractViolation("num_cases must be positive");
  if (spec.distractor_count[0] < 0 || spec.distractor_count[0] > spec.distractor_count[1]) {
    throw ContractViolation("distractor_count must be an ordered non-negative range");
  }
  Rng rng(spec.seed);
  auto uniform = [&](const std::array<double, 2>& r) {
    return r[0] == r[1] ? r[0] : std::uniform_real_distribution<double>(r[0], r[1])(rng);
  };
  const int dims[3] = {spec.shape.d, spec.shape.h, spec.shape.w};
  std::vector<PhantomSpec> out;
  out.reserve(spec.num_cases);
  for (int i = 0; i < spec.num_cases; ++i) {
    PhantomSpec p;
    p.shape = spec.shape;
    p.spacing = spec.spacing;
    p.perturbation = uniform(spec.perturbation_range);
    p.perturbation_frequency = std::uniform_int_distribution<int>(2, 4)(rng);
    p.perturbation_phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    for (int a = 0; a < 3; ++a) {
      const double reach = 1.0 + p.perturbation;
      double r = uniform(spec.radius_range);
      const double max_r = (dims[a] - 1 - 2 * spec.margin) / (2.0 * reach);
      if (max_r <= 0.0) throw ContractViolation("synthetic volume too small for the requested margin");
      r = std::min(r, max_r);
      p.radii[a] = r;
      const double lo = spec.margin + r * reach;
      const double hi = dims[a] - 1 - spec.margin - r * reach;
      p.center[a] = lo >= hi ? 0.5 * (lo + hi) : std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    p.contrast = uniform(spec.contrast_range);
    p.background = uniform(spec.background_range);
    p.noise_sigma = uniform(spec.noise_range);
    if (spec.distractor_count[1] > 0) {
      const int n = std::uniform_int_distribution<int>(spec.distractor_count[0], spec.distractor_count[1])(rng);
      const double target_reach = *std::max_element(p.radii.begin(), p.radii.end()) * (1.0 + p.perturbation);
      for (int k = 0; k < n; ++k) {
        // Rejection sampling; a distractor that finds no room is dropped.
        const double r = uniform(spec.distractor_radius_range);
        const double intensity = p.contrast * uniform(spec.distractor_intensity_range);
        for (int attempt = 0; attempt < 200; ++attempt) {
          Distractor d{{}, r, intensity};
          for (int a = 0; a < 3; ++a) {
            d.center[a] = std::uniform_real_distribution<double>(spec.margin + r, dims[a] - 1 - spec.margin - r)(rng);
          }
          auto clear_of = [&](const std::array<double, 3>& c, double reach) {
            const double dz = d.center[0] - c[0], dy = d.center[1] - c[1], dx = d.center[2] - c[2];
            return std::sqrt(dz * dz + dy * dy + dx * dx) > reach + r + 2.0;
          };
          bool ok = clear_of(p.center, target_reach);
          for (const auto& o : p.distractors) ok = ok && clear_of(o.center, o.radius);
          if (ok) {
            p.distractors.push_back(d);
            break;
          }
        }
      }
    }
    if (spec.bias_amplitude_range[1] > 0.0) {
      p.bias_amplitude = p.contrast * uniform(spec.bias_amplitude_range);
      std::normal_distribution<double> g(0.0, 1.0);
      double n2 = 0.0;
      while (n2 < 1e-12) {
        for (auto& c : p.bias_direction) c = g(rng);
        n2 = p.bias_direction[0] * p.bias_direction[0] + p.bias_direction[1] * p.bias_direction[1] +
             p.bias_direction[2] * p.bias_direction[2];
      }
      for (auto& c : p.bias_direction) c /= std::sqrt(n2);
      p.bias_phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      p.bias_wavelength = spec.bias_wavelength;
    }
    p.seed = mix64(spec.seed ^ mix64(static_cast<std::uint64_t>(i) + 1));
    out.push_back(p);
  }
  return out;
}

nlohmann::json to_json(const SyntheticDatasetSpec& s) {
  return nlohmann::json{{"num_cases", s.num_cases},
                        {"shape", {s.shape.d, s.shape.h, s.shape.w}},
                        {"spacing", s.spacing},
                        {"radius_range", s.radius_range},
                        {"margin", s.margin},
                        {"perturbation_range", s.perturbation_range},
                        {"contrast_range", s.contrast_range},
                        {"background_range", s.background_range},
                        {"noise_range", s.noise_range},
                        {"distractor_count", s.distractor_count},
                        {"distractor_radius_range", s.distractor_radius_range},
                        {"distractor_intensity_range", s.distractor_intensity_range},
                        {"bias_amplitude_range", s.bias_amplitude_range},
                        {"bias_wavelength", s.bias_wavelength},
                        {"m_labeled", s.m_labeled},
                        {"n_test", s.n_test},
                        {"split_seed", s.split_seed},
                        {"seed", s.seed}};
}

SyntheticDatasetSpec synthetic_spec_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"num_cases",       "shape",          "spacing",     "radius_range",
                                           "margin",          "perturbation_range", "contrast_range",
                                           "background_range", "noise_range",   "m_labeled",   "n_test",
                                           "split_seed",      "seed",        "distractor_count",
                                           "distractor_radius_range", "distractor_intensity_range",
                                           "bias_amplitude_range", "bias_wavelength"};
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown synthetic spec key '" + key + "'");
  }
  SyntheticDatasetSpec s;
  try {
    s.num_cases = j.value("num_cases", s.num_cases);
    if (j.contains("shape")) {
      const auto v = j.at("shape").get<std::array<int, 3>>();
      s.shape = Dims{v[0], v[1], v[2]};
    }
    s.spacing = j.value("spacing", s.spacing);
    s.radius_range = j.value("radius_range", s.radius_range);
    s.margin = j.value("margin", s.margin);
    s.perturbation_range = j.value("perturbation_range", s.perturbation_range);
    s.contrast_range = j.value("contrast_range", s.contrast_range);
    s.background_range = j.value("background_range", s.background_range);
    s.noise_range = j.value("noise_range", s.noise_range);
    s.distractor_count = j.value("distractor_count", s.distractor_count);
    s.distractor_radius_range = j.value("distractor_radius_range", s.distractor_radius_range);
    s.distractor_intensity_range = j.value("distractor_intensity_range", s.distractor_intensity_range);
    s.bias_amplitude_range = j.value("bias_amplitude_range", s.bias_amplitude_range);
    s.bias_wavelength = j.value("bias_wavelength", s.bias_wavelength);
    s.m_labeled = j.value("m_labeled", s.m_labeled);
    s.n_test = j.value("n_test", s.n_test);
    s.split_seed = j.value("split_seed", s.split_seed);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

}  // namespace semisam
