#pragma once

#include <optional>

#include "semisam/random.hpp"
#include "semisam/volume.hpp"

namespace semisam {

/// Copies the box [origin, origin + shape) out of `src`; voxels outside the
/// source are 0. `origin` may be negative.
Volume crop(const Volume& src, Index3 origin, Dims shape);
BinaryMask crop(const BinaryMask& src, Index3 origin, Dims shape);

struct Patch {
  Volume image;
  std::optional<BinaryMask> mask;
  Index3 origin;  // source coordinates of the patch's first voxel
};

struct PatchSampling {
  /// Probability of centering on a random foreground voxel when a mask with
  /// foreground is supplied.
  double foreground_center_prob = 0.5;
};

/// The volume is conceptually zero-padded symmetrically up to `patch_shape`
/// along any axis where it is smaller, then cropped.
Patch sample_patch(const Volume& volume, const BinaryMask* mask, Dims patch_shape, Rng& rng,
                   const PatchSampling& sampling = {});

}  // namespace semisam
