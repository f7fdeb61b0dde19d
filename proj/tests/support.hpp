#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "semisam/random.hpp"
#include "semisam/volume.hpp"

namespace testing_support {

using semisam::BinaryMask;
using semisam::Dims;
using semisam::Spacing;

inline BinaryMask sphere(Dims shape, double cz, double cy, double cx, double r) {
  BinaryMask m(shape);
  for (int z = 0; z < shape.d; ++z)
    for (int y = 0; y < shape.h; ++y)
      for (int x = 0; x < shape.w; ++x) {
        const double dz = z - cz, dy = y - cy, dx = x - cx;
        m.at(z, y, x) = dz * dz + dy * dy + dx * dx <= r * r ? 1 : 0;
      }
  return m;
}

/// Union of a few random balls; not necessarily connected.
inline BinaryMask random_blobs(Dims shape, std::mt19937_64& rng, int balls = 4, double rmin = 1.5,
                               double rmax = 5.0) {
  BinaryMask m(shape);
  std::uniform_real_distribution<double> uz(0, shape.d - 1), uy(0, shape.h - 1), ux(0, shape.w - 1), ur(rmin, rmax);
  for (int b = 0; b < balls; ++b) {
    const double cz = uz(rng), cy = uy(rng), cx = ux(rng), r = ur(rng);
    for (int z = 0; z < shape.d; ++z)
      for (int y = 0; y < shape.h; ++y)
        for (int x = 0; x < shape.w; ++x) {
          const double dz = z - cz, dy = y - cy, dx = x - cx;
          if (dz * dz + dy * dy + dx * dx <= r * r) m.at(z, y, x) = 1;
        }
  }
  return m;
}

inline BinaryMask random_noise_mask(Dims shape, std::mt19937_64& rng, double p) {
  BinaryMask m(shape);
  std::bernoulli_distribution coin(p);
  for (auto& v : m.data) v = coin(rng) ? 1 : 0;
  return m;
}

// Reference boundary: a voxel of the mask with a 6-neighbour that is either
// outside the volume or background.
inline std::vector<std::array<int, 3>> brute_boundary(const BinaryMask& m) {
  std::vector<std::array<int, 3>> out;
  const Dims s = m.shape;
  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        if (!m.at(z, y, x)) continue;
        bool edge = false;
        for (const auto& o : off) {
          const int a = z + o[0], b = y + o[1], c = x + o[2];
          if (!s.contains(a, b, c) || !m.at(a, b, c)) edge = true;
        }
        if (edge) out.push_back({z, y, x});
      }
  return out;
}

inline std::vector<double> brute_directed(const BinaryMask& a, const BinaryMask& b, const Spacing& sp) {
  const auto ba = brute_boundary(a), bb = brute_boundary(b);
  std::vector<double> d;
  for (const auto& p : ba) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : bb) {
      const double dz = (p[0] - q[0]) * sp[0], dy = (p[1] - q[1]) * sp[1], dx = (p[2] - q[2]) * sp[2];
      best = std::min(best, dz * dz + dy * dy + dx * dx);
    }
    d.push_back(std::sqrt(best));
  }
  return d;
}

inline double brute_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("semisam_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
