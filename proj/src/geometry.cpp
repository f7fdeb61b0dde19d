#include "semisam/geometry.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace semisam {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
/// f has `n` samples with stride `stride`; positions are scaled by `step`.
void edt_line(double* f, std::size_t stride, int n, double step, std::vector<double>& buf_f,
              std::vector<int>& v, std::vector<double>& z, std::vector<double>& out) {
  buf_f.resize(n);
  out.resize(n);
  for (int i = 0; i < n; ++i) buf_f[i] = f[i * stride];
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  const double s2 = step * step;
  for (int q = 0; q < n; ++q) {
    if (buf_f[q] == kInf) continue;
    const double fq = buf_f[q] + s2 * q * q;
    while (k >= 0) {
      const int p = v[k];
      const double s = (fq - (buf_f[p] + s2 * p * p)) / (2.0 * s2 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    }
  }
  if (k < 0) {
    for (int i = 0; i < n; ++i) f[i * stride] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = static_cast<double>(q - v[j]) * step;
    out[q] = dq * dq + buf_f[v[j]];
  }
  for (int i = 0; i < n; ++i) f[i * stride] = out[i];
}

void edt_inplace(std::vector<double>& f, const Dims& dims, const Spacing& spacing) {
  std::vector<double> buf, z, out;
  std::vector<int> v;
  const std::size_t sw = 1, sh = static_cast<std::size_t>(dims.w), sd = static_cast<std::size_t>(dims.w) * dims.h;
  for (int zz = 0; zz < dims.d; ++zz)
    for (int y = 0; y < dims.h; ++y) edt_line(&f[dims.index(zz, y, 0)], sw, dims.w, spacing[2], buf, v, z, out);
  for (int zz = 0; zz < dims.d; ++zz)
    for (int x = 0; x < dims.w; ++x) edt_line(&f[dims.index(zz, 0, x)], sh, dims.h, spacing[1], buf, v, z, out);
  for (int y = 0; y < dims.h; ++y)
    for (int x = 0; x < dims.w; ++x) edt_line(&f[dims.index(0, y, x)], sd, dims.d, spacing[0], buf, v, z, out);
}

constexpr int kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

}  // namespace

ComponentLabels label_components(const BinaryMask& mask) {
  const Dims& s = mask.shape;
  ComponentLabels out;
  out.labels.assign(s.voxels(), 0);
  std::deque<std::size_t> queue;
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const std::size_t start = s.index(z, y, x);
        if (!mask.data[start] || out.labels[start]) continue;
        const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
        std::size_t size = 0;
        out.labels[start] = label;
        queue.push_back(start);
        while (!queue.empty()) {
          const std::size_t cur = queue.front();
          queue.pop_front();
          ++size;
          const int cx = static_cast<int>(cur % s.w);
          const int cy = static_cast<int>((cur / s.w) % s.h);
          const int cz = static_cast<int>(cur / (static_cast<std::size_t>(s.w) * s.h));
          for (const auto& o : kOffsets) {
            const int nz = cz + o[0], ny = cy + o[1], nx = cx + o[2];
            if (!s.contains(nz, ny, nx)) continue;
            const std::size_t n = s.index(nz, ny, nx);
            if (mask.data[n] && !out.labels[n]) {
              out.labels[n] = label;
              queue.push_back(n);
            }
          }
        }
        out.sizes.push_back(size);
      }
  return out;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const ComponentLabels cc = label_components(mask);
  BinaryMask out(mask.shape, 0);
  if (cc.count() == 0) return out;
  const auto best = std::max_element(cc.sizes.begin(), cc.sizes.end()) - cc.sizes.begin() + 1;
  for (std::size_t i = 0; i < cc.labels.size(); ++i) out.data[i] = cc.labels[i] == best ? 1 : 0;
  return out;
}

std::vector<double> squared_distance_transform(const BinaryMask& feature, const Spacing& spacing) {
  std::vector<double> f(feature.data.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = feature.data[i] ? 0.0 : kInf;
  edt_inplace(f, feature.shape, spacing);
  return f;
}

std::vector<double> squared_interior_distance(const BinaryMask& mask, const Spacing& spacing) {
  const Dims& s = mask.shape;
  const Dims padded{s.d + 2, s.h + 2, s.w + 2};
  std::vector<double> f(padded.voxels(), 0.0);
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) f[padded.index(z + 1, y + 1, x + 1)] = mask.at(z, y, x) ? kInf : 0.0;
  edt_inplace(f, padded, spacing);
  std::vector<double> out(s.voxels());
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) out[s.index(z, y, x)] = f[padded.index(z + 1, y + 1, x + 1)];
  return out;
}

BinaryMask boundary(const BinaryMask& mask) {
  const Dims& s = mask.shape;
  BinaryMask out(s, 0);
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        if (!mask.at(z, y, x)) continue;
        for (const auto& o : kOffsets) {
          const int nz = z + o[0], ny = y + o[1], nx = x + o[2];
          if (!s.contains(nz, ny, nx) || !mask.at(nz, ny, nx)) {
            out.at(z, y, x) = 1;
            break;
          }
        }
      }
  return out;
}

BinaryMask interface_voxels(const BinaryMask& mask) {
  const Dims& s = mask.shape;
  BinaryMask out(s, 0);
  for (int z = 0; z < s.d; ++z)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const auto v = mask.at(z, y, x);
        for (const auto& o : kOffsets) {
          const int nz = z + o[0], ny = y + o[1], nx = x + o[2];
          if (s.contains(nz, ny, nx) && mask.at(nz, ny, nx) != v) {
            out.at(z, y, x) = 1;
            break;
          }
        }
      }
  return out;
}

BinaryMask morph_ball(const BinaryMask& mask, int radius) {
  if (radius == 0) return mask;
  const double r2 = static_cast<double>(radius) * radius;
  const Spacing unit{1.0, 1.0, 1.0};
  BinaryMask out(mask.shape, 0);
  if (radius > 0) {
    const auto d2 = squared_distance_transform(mask, unit);
    for (std::size_t i = 0; i < d2.size(); ++i) out.data[i] = d2[i] <= r2 ? 1 : 0;
  } else {
    BinaryMask background(mask.shape);
    for (std::size_t i = 0; i < mask.data.size(); ++i) background.data[i] = mask.data[i] ? 0 : 1;
    const auto d2 = squared_distance_transform(background, unit);
    for (std::size_t i = 0; i < d2.size(); ++i) out.data[i] = (mask.data[i] && d2[i] > r2) ? 1 : 0;
  }
  return out;
}

}  // namespace semisam
