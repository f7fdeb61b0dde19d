#pragma once

#include <cstdint>
#include <vector>

#include "semisam/volume.hpp"

namespace semisam {

/// 6-connected component labels: 0 for background, 1..count in raster order
/// of each component's first voxel.
struct ComponentLabels {
  std::vector<std::int32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[k] for label k+1
  int count() const { return static_cast<int>(sizes.size()); }
};

ComponentLabels label_components(const BinaryMask& mask);

/// Largest 6-connected component; ties go to the lower label. Empty in, empty out.
BinaryMask largest_component(const BinaryMask& mask);

/// Squared Euclidean distance (spacing-scaled) from every voxel to the
/// nearest voxel where `feature` is 1. Infinity when there is no feature voxel.
std::vector<double> squared_distance_transform(const BinaryMask& feature, const Spacing& spacing);

/// Squared distance from every voxel to the nearest background voxel, where
/// everything outside the volume counts as background. Zero on background.
std::vector<double> squared_interior_distance(const BinaryMask& mask, const Spacing& spacing = {1.0, 1.0, 1.0});

/// Foreground voxels with at least one background 6-neighbour; the volume
/// border counts as background.
BinaryMask boundary(const BinaryMask& mask);

/// Voxels whose value differs from at least one in-volume 6-neighbour
/// (both sides of every foreground/background interface).
BinaryMask interface_voxels(const BinaryMask& mask);

/// Euclidean-ball dilation (radius > 0) or erosion (radius < 0) in voxel units.
BinaryMask morph_ball(const BinaryMask& mask, int radius);

}  // namespace semisam
