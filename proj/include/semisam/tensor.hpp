#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "semisam/volume.hpp"

namespace semisam::nn {

/// Dense (channels, depth, height, width) field, width fastest.
template <typename T>
struct Tensor {
  int channels = 0;
  Dims dims;
  std::vector<T> values;

  Tensor() = default;
  Tensor(int c, Dims d, T fill = T(0)) : channels(c), dims(d), values(static_cast<std::size_t>(c) * d.voxels(), fill) {}

  std::size_t plane() const noexcept { return dims.voxels(); }
  T* channel(int c) noexcept { return values.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const noexcept { return values.data() + static_cast<std::size_t>(c) * plane(); }
  std::span<T> span() noexcept { return values; }
  std::span<const T> span() const noexcept { return values; }
};

/// Per-voxel class probabilities; channel c holds class c.
template <typename T>
using ProbMap = Tensor<T>;

template <typename T>
Tensor<T> from_volume(const Volume& v) {
  Tensor<T> t(1, v.shape);
  for (std::size_t i = 0; i < v.data.size(); ++i) t.values[i] = static_cast<T>(v.data[i]);
  return t;
}

/// Foreground channel (class 1) of a two-class map as a float volume.
template <typename T>
Volume foreground(const ProbMap<T>& p, const Spacing& spacing = {1.0, 1.0, 1.0}) {
  Volume v(p.dims, spacing);
  const T* fg = p.channel(1);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(fg[i]);
  return v;
}

/// Argmax over two classes; ties go to background.
template <typename T>
BinaryMask argmax_mask(const ProbMap<T>& p) {
  BinaryMask m(p.dims);
  const T* bg = p.channel(0);
  const T* fg = p.channel(1);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = fg[i] > bg[i] ? 1 : 0;
  return m;
}

template <typename T>
ProbMap<T> one_hot(const BinaryMask& mask) {
  ProbMap<T> p(2, mask.shape);
  T* bg = p.channel(0);
  T* fg = p.channel(1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    fg[i] = mask.data[i] ? T(1) : T(0);
    bg[i] = T(1) - fg[i];
  }
  return p;
}

}  // namespace semisam::nn
