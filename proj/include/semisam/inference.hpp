#pragma once

#include <span>
#include <vector>

#include "semisam/dataset.hpp"
#include "semisam/metrics.hpp"
#include "semisam/network.hpp"

namespace semisam {

/// Window start positions along one axis. The axis is padded symmetrically
/// to at least `patch`; the last window is flush with the padded end.
std::vector<int> window_starts(int extent, int patch, int stride);

/// Sliding-window foreground probability, averaged uniformly over overlaps.
Volume infer_probabilities(const nn::Backbone<float>& net, std::span<const float> params, const Volume& volume,
                           Dims patch, Dims stride);

/// Argmax of the averaged probabilities; background wins ties.
BinaryMask infer_volume(const nn::Backbone<float>& net, std::span<const float> params, const Volume& volume,
                        Dims patch, Dims stride);

MetricsReport evaluate(const nn::Backbone<float>& net, std::span<const float> params,
                       const std::vector<LabeledCase>& test_set, Dims patch, Dims stride,
                       DistanceUnit unit = DistanceUnit::voxel);

}  // namespace semisam
