#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisam/volume.hpp"

namespace semisam {

/// A bright ball that is not part of the target mask.
struct Distractor {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  double radius = 2.0;
  double intensity = 1.0;  // added on top of the background
};

/// A single synthetic case: a (optionally perturbed) ellipsoid in noise,
/// optionally accompanied by non-target distractor balls.
/// Geometry is fully explicit so the mask never depends on `seed`; the seed
/// drives only the noise field.
struct PhantomSpec {
  Dims shape{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};
  std::array<double, 3> center{31.5, 31.5, 31.5};  // voxel coordinates (z, y, x)
  std::array<double, 3> radii{10.0, 10.0, 10.0};   // voxels
  /// Relative radial modulation amplitude, 0 gives the plain ellipsoid.
  double perturbation = 0.0;
  int perturbation_frequency = 3;
  double perturbation_phase = 0.0;
  double background = 0.0;
  double contrast = 1.0;
  double noise_sigma = 0.0;
  std::vector<Distractor> distractors;
  /// Additive low-frequency intensity bias:
  /// bias_amplitude * sin(2 pi (bias_direction . p) / bias_wavelength + bias_phase).
  double bias_amplitude = 0.0;
  std::array<double, 3> bias_direction{1.0, 0.0, 0.0};  // unit vector
  double bias_wavelength = 64.0;                        // voxels
  double bias_phase = 0.0;
  std::uint64_t seed = 0;
};

/// Image = background + contrast * mask + distractors + bias + N(0, noise_sigma^2),
/// not normalized. The mask is reduced to its largest 6-connected component;
/// distractor voxels never enter it.
std::pair<Volume, BinaryMask> make_phantom(const PhantomSpec& spec);

/// Ranges from which a whole synthetic dataset is drawn.
struct SyntheticDatasetSpec {
  int num_cases = 20;
  Dims shape{48, 48, 48};
  Spacing spacing{1.0, 1.0, 1.0};
  std::array<double, 2> radius_range{6.0, 12.0};
  /// Minimum clearance between the object's bounding box and the volume border.
  double margin = 2.0;
  std::array<double, 2> perturbation_range{0.0, 0.15};
  std::array<double, 2> contrast_range{1.0, 1.0};
  std::array<double, 2> background_range{0.0, 0.0};
  std::array<double, 2> noise_range{0.5, 0.5};
  /// Distractors per case, inclusive range; placed clear of the target.
  std::array<int, 2> distractor_count{0, 0};
  std::array<double, 2> distractor_radius_range{2.0, 4.0};
  /// Distractor intensity as a multiple of the case's contrast.
  std::array<double, 2> distractor_intensity_range{1.0, 1.0};
  /// Bias amplitude as a multiple of the case's contrast; direction and
  /// phase are uniform.
  std::array<double, 2> bias_amplitude_range{0.0, 0.0};
  double bias_wavelength = 64.0;
  int m_labeled = 1;
  int n_test = 4;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
};

std::vector<PhantomSpec> draw_phantom_specs(const SyntheticDatasetSpec& spec);

nlohmann::json to_json(const SyntheticDatasetSpec& spec);
/// Rejects unknown keys.
SyntheticDatasetSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace semisam
