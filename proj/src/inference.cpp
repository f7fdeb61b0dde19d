#include "semisam/inference.hpp"

#include <algorithm>

#include "semisam/patch.hpp"

namespace semisam {

std::vector<int> window_starts(int extent, int patch, int stride) {
  if (stride < 1 || stride > patch) throw ContractViolation("window stride must be in [1, patch]");
  const int padded = std::max(extent, patch);
  const int lo = -(padded - extent) / 2;
  const int hi = lo + padded - patch;
  std::vector<int> starts;
  for (int s = lo; s < hi; s += stride) starts.push_back(s);
  starts.push_back(hi);
  return starts;
}

Volume infer_probabilities(const nn::Backbone<float>& net, std::span<const float> params, const Volume& volume,
                           Dims patch, Dims stride) {
  const Dims& s = volume.shape;
  std::vector<double> sum(s.voxels(), 0.0);
  std::vector<float> count(s.voxels(), 0.0f);
  const auto zs = window_starts(s.d, patch.d, stride.d);
  const auto ys = window_starts(s.h, patch.h, stride.h);
  const auto xs = window_starts(s.w, patch.w, stride.w);
  for (int oz : zs)
    for (int oy : ys)
      for (int ox : xs) {
        const Index3 origin{oz, oy, ox};
        const auto probs = net.forward(params, nn::from_volume<float>(crop(volume, origin, patch)), false);
        const float* fg = probs.channel(1);
        for (int z = 0; z < patch.d; ++z) {
          const int vz = oz + z;
          if (vz < 0 || vz >= s.d) continue;
          for (int y = 0; y < patch.h; ++y) {
            const int vy = oy + y;
            if (vy < 0 || vy >= s.h) continue;
            for (int x = 0; x < patch.w; ++x) {
              const int vx = ox + x;
              if (vx < 0 || vx >= s.w) continue;
              const std::size_t i = s.index(vz, vy, vx);
              sum[i] += fg[patch.index(z, y, x)];
              count[i] += 1.0f;
            }
          }
        }
      }
  Volume out(s, volume.spacing);
  for (std::size_t i = 0; i < sum.size(); ++i) out.data[i] = static_cast<float>(sum[i] / count[i]);
  return out;
}

BinaryMask infer_volume(const nn::Backbone<float>& net, std::span<const float> params, const Volume& volume,
                        Dims patch, Dims stride) {
  const Volume fg = infer_probabilities(net, params, volume, patch, stride);
  BinaryMask out(fg.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = fg.data[i] > 1.0f - fg.data[i] ? 1 : 0;
  return out;
}

MetricsReport evaluate(const nn::Backbone<float>& net, std::span<const float> params,
                       const std::vector<LabeledCase>& test_set, Dims patch, Dims stride, DistanceUnit unit) {
  if (test_set.empty()) throw ContractViolation("evaluate: empty test set");
  std::vector<std::string> ids;
  std::vector<BinaryMask> preds, refs;
  std::vector<Spacing> spacings;
  for (const auto& c : test_set) {
    ids.push_back(c.id);
    preds.push_back(infer_volume(net, params, c.image, patch, stride));
    refs.push_back(c.mask);
    spacings.push_back(c.image.spacing);
  }
  return build_report(ids, preds, refs, spacings, unit);
}

}  // namespace semisam
