#include "semisam/patch.hpp"

#include <algorithm>

namespace semisam {
namespace {

template <typename T>
void copy_box(const std::vector<T>& src, const Dims& sdims, std::vector<T>& dst, const Dims& ddims, Index3 origin) {
  for (int z = 0; z < ddims.d; ++z) {
    const int sz = origin.z + z;
    if (sz < 0 || sz >= sdims.d) continue;
    for (int y = 0; y < ddims.h; ++y) {
      const int sy = origin.y + y;
      if (sy < 0 || sy >= sdims.h) continue;
      const int x0 = std::max(0, -origin.x);
      const int x1 = std::min(ddims.w, sdims.w - origin.x);
      if (x1 <= x0) continue;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(sdims.index(sz, sy, origin.x + x0)), x1 - x0,
                  dst.begin() + static_cast<std::ptrdiff_t>(ddims.index(z, y, x0)));
    }
  }
}

int pick(Rng& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

Volume crop(const Volume& src, Index3 origin, Dims shape) {
  Volume out(shape, src.spacing, 0.0f);
  copy_box(src.data, src.shape, out.data, shape, origin);
  return out;
}

BinaryMask crop(const BinaryMask& src, Index3 origin, Dims shape) {
  BinaryMask out(shape, 0);
  copy_box(src.data, src.shape, out.data, shape, origin);
  return out;
}

Patch sample_patch(const Volume& volume, const BinaryMask* mask, Dims patch_shape, Rng& rng,
                   const PatchSampling& sampling) {
  if (mask) require_same_shape(volume.shape, mask->shape, "sample_patch");
  const int src[3] = {volume.shape.d, volume.shape.h, volume.shape.w};
  const int len[3] = {patch_shape.d, patch_shape.h, patch_shape.w};
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    const int padded = std::max(src[a], len[a]);
    const int before = (padded - src[a]) / 2;
    lo[a] = -before;
    hi[a] = padded - before - len[a];
  }

  Index3 origin;
  bool centered = false;
  if (mask && sampling.foreground_center_prob > 0.0) {
    const bool use_fg = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < sampling.foreground_center_prob;
    if (use_fg) {
      const std::size_t n_fg = mask->count();
      if (n_fg > 0) {
        auto k = std::uniform_int_distribution<std::size_t>(0, n_fg - 1)(rng);
        std::size_t flat = 0;
        for (; flat < mask->data.size(); ++flat) {
          if (mask->data[flat] && k-- == 0) break;
        }
        const int cx = static_cast<int>(flat % volume.shape.w);
        const int cy = static_cast<int>((flat / volume.shape.w) % volume.shape.h);
        const int cz = static_cast<int>(flat / (static_cast<std::size_t>(volume.shape.w) * volume.shape.h));
        const int c[3] = {cz, cy, cx};
        int o[3];
        for (int a = 0; a < 3; ++a) o[a] = std::clamp(c[a] - len[a] / 2, lo[a], hi[a]);
        origin = Index3{o[0], o[1], o[2]};
        centered = true;
      }
    }
  }
  if (!centered) origin = Index3{pick(rng, lo[0], hi[0]), pick(rng, lo[1], hi[1]), pick(rng, lo[2], hi[2])};

  Patch out;
  out.image = crop(volume, origin, patch_shape);
  if (mask) out.mask = crop(*mask, origin, patch_shape);
  out.origin = origin;
  return out;
}

}  // namespace semisam
