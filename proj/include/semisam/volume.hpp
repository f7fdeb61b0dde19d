#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "semisam/error.hpp"

namespace semisam {

/// Voxel counts along (depth, height, width); width is the fastest axis.
struct Dims {
  int d = 0;
  int h = 0;
  int w = 0;

  std::size_t voxels() const noexcept {
    return static_cast<std::size_t>(d) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool contains(int z, int y, int x) const noexcept {
    return z >= 0 && y >= 0 && x >= 0 && z < d && y < h && x < w;
  }
  std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * h + y) * w + x;
  }
  bool operator==(const Dims&) const = default;
};

struct Index3 {
  int z = 0;
  int y = 0;
  int x = 0;
  bool operator==(const Index3&) const = default;
  auto operator<=>(const Index3&) const = default;
};

/// Millimetres per voxel along (depth, height, width).
using Spacing = std::array<double, 3>;

std::string to_string(const Dims& dims);

struct Volume {
  Dims shape;
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<float> data;

  Volume() = default;
  explicit Volume(Dims dims, Spacing sp = {1.0, 1.0, 1.0}, float fill = 0.0f);

  float& at(int z, int y, int x) { return data[shape.index(z, y, x)]; }
  float at(int z, int y, int x) const { return data[shape.index(z, y, x)]; }
};

struct BinaryMask {
  Dims shape;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  explicit BinaryMask(Dims dims, std::uint8_t fill = 0);

  std::uint8_t& at(int z, int y, int x) { return data[shape.index(z, y, x)]; }
  std::uint8_t at(int z, int y, int x) const { return data[shape.index(z, y, x)]; }
  std::size_t count() const;
  bool empty_foreground() const { return count() == 0; }
  bool operator==(const BinaryMask&) const = default;
};

/// Throws ContractViolation on non-finite intensities or non-positive spacing.
void validate(const Volume& volume);
void validate(const BinaryMask& mask);
void require_same_shape(const Dims& a, const Dims& b, const char* what);

/// Per-volume z-score; sigma is guarded by 1e-8 so constant images map to zeros.
void normalize_intensity(Volume& volume);

BinaryMask binarize(const Volume& scores, float threshold = 0.5f);

}  // namespace semisam
