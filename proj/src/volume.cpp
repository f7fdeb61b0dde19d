#include "semisam/volume.hpp"

#include <algorithm>
#include <cmath>

namespace semisam {

std::string to_string(const Dims& dims) {
  return "(" + std::to_string(dims.d) + ", " + std::to_string(dims.h) + ", " + std::to_string(dims.w) + ")";
}

Volume::Volume(Dims dims, Spacing sp, float fill) : shape(dims), spacing(sp), data(dims.voxels(), fill) {}

BinaryMask::BinaryMask(Dims dims, std::uint8_t fill) : shape(dims), data(dims.voxels(), fill) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

void validate(const Volume& volume) {
  for (double s : volume.spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ContractViolation("non-positive voxel spacing");
    }
  }
  if (volume.data.size() != volume.shape.voxels()) {
    throw ContractViolation("volume data size does not match shape " + to_string(volume.shape));
  }
  for (float v : volume.data) {
    if (!std::isfinite(v)) throw ContractViolation("non-finite intensity in volume");
  }
}

void validate(const BinaryMask& mask) {
  if (mask.data.size() != mask.shape.voxels()) {
    throw ContractViolation("mask data size does not match shape " + to_string(mask.shape));
  }
  for (auto v : mask.data) {
    if (v > 1) throw ContractViolation("mask value outside {0,1}");
  }
}

void require_same_shape(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw ShapeMismatch(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
  }
}

void normalize_intensity(Volume& volume) {
  const std::size_t n = volume.data.size();
  if (n == 0) return;
  // Shifted accumulation keeps constant images exactly at their value.
  const double shift = volume.data.front();
  double mean = 0.0;
  for (float v : volume.data) mean += v - shift;
  mean = shift + mean / static_cast<double>(n);
  double var = 0.0;
  for (float v : volume.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + 1e-8;
  for (float& v : volume.data) v = static_cast<float>((v - mean) / denom);
}

BinaryMask binarize(const Volume& scores, float threshold) {
  BinaryMask out(scores.shape);
  for (std::size_t i = 0; i < scores.data.size(); ++i) out.data[i] = scores.data[i] > threshold ? 1 : 0;
  return out;
}

}  // namespace semisam
