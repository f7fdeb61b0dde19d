#pragma once

// Direct 3D convolution kernels on (C, D, H, W) tensors. Every kernel walks
// whole rows along W so the inner loops vectorize; weight gradients use SIMD
// reductions, whose summation order is fixed at compile time.

#include <algorithm>
#include <cmath>

#include "semisam/tensor.hpp"

namespace semisam::nn::kernels {

namespace detail {

template <typename T>
inline void row3(T* __restrict o, const T* __restrict s, int w, T k0, T k1, T k2) {
  if (w == 1) {
    o[0] += k1 * s[0];
    return;
  }
  o[0] += k1 * s[0] + k2 * s[1];
#pragma omp simd
  for (int x = 1; x < w - 1; ++x) o[x] += k0 * s[x - 1] + k1 * s[x] + k2 * s[x + 1];
  o[w - 1] += k0 * s[w - 2] + k1 * s[w - 1];
}

template <typename T>
inline void row3_transpose(T* __restrict gi, const T* __restrict g, int w, T k0, T k1, T k2) {
  if (w == 1) {
    gi[0] += k1 * g[0];
    return;
  }
  gi[0] += k0 * g[1] + k1 * g[0];
#pragma omp simd
  for (int x = 1; x < w - 1; ++x) gi[x] += k0 * g[x + 1] + k1 * g[x] + k2 * g[x - 1];
  gi[w - 1] += k1 * g[w - 1] + k2 * g[w - 2];
}

template <typename T>
inline void row3_weights(const T* __restrict g, const T* __restrict s, int w, T& d0, T& d1, T& d2) {
  T a0 = 0, a1 = 0, a2 = 0;
#pragma omp simd reduction(+ : a1)
  for (int x = 0; x < w; ++x) a1 += g[x] * s[x];
#pragma omp simd reduction(+ : a0, a2)
  for (int x = 0; x < w - 1; ++x) {
    a0 += g[x + 1] * s[x];
    a2 += g[x] * s[x + 1];
  }
  d0 += a0;
  d1 += a1;
  d2 += a2;
}

template <typename T>
T channel_sum(const T* g, std::size_t n) {
  T acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += g[i];
  return acc;
}

}  // namespace detail

/// 3x3x3, stride 1, zero padding 1. Weights [cout][cin][27], z-major taps.
template <typename T>
void conv3_forward(const Tensor<T>& in, const T* w, const T* b, Tensor<T>& out) {
  const int D = in.dims.d, H = in.dims.h, W = in.dims.w, cin = in.channels;
  for (int co = 0; co < out.channels; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + out.plane(), b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.channel(ci);
      const T* k = w + (static_cast<std::size_t>(co) * cin + ci) * 27;
      for (int kz = 0; kz < 3; ++kz) {
        const int z0 = std::max(0, 1 - kz), z1 = std::min(D, D + 1 - kz);
        for (int ky = 0; ky < 3; ++ky) {
          const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
          const T* kk = k + (kz * 3 + ky) * 3;
          for (int z = z0; z < z1; ++z)
            for (int y = y0; y < y1; ++y) {
              detail::row3(o + (static_cast<std::size_t>(z) * H + y) * W,
                           src + (static_cast<std::size_t>(z + kz - 1) * H + (y + ky - 1)) * W, W, kk[0], kk[1],
                           kk[2]);
            }
        }
      }
    }
  }
}

/// `gin` may be null when the input gradient is not needed. Gradients accumulate.
template <typename T>
void conv3_backward(const Tensor<T>& in, const T* w, const Tensor<T>& gout, Tensor<T>* gin, T* gw, T* gb) {
  const int D = in.dims.d, H = in.dims.h, W = in.dims.w, cin = in.channels;
  for (int co = 0; co < gout.channels; ++co) {
    const T* g = gout.channel(co);
    gb[co] += detail::channel_sum(g, gout.plane());
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.channel(ci);
      T* gi = gin ? gin->channel(ci) : nullptr;
      const std::size_t base = (static_cast<std::size_t>(co) * cin + ci) * 27;
      for (int kz = 0; kz < 3; ++kz) {
        const int z0 = std::max(0, 1 - kz), z1 = std::min(D, D + 1 - kz);
        for (int ky = 0; ky < 3; ++ky) {
          const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
          const std::size_t t = base + (kz * 3 + ky) * 3;
          T d0 = 0, d1 = 0, d2 = 0;
          for (int z = z0; z < z1; ++z)
            for (int y = y0; y < y1; ++y) {
              const T* grow = g + (static_cast<std::size_t>(z) * H + y) * W;
              const std::size_t srow = (static_cast<std::size_t>(z + kz - 1) * H + (y + ky - 1)) * W;
              detail::row3_weights(grow, src + srow, W, d0, d1, d2);
              if (gi) detail::row3_transpose(gi + srow, grow, W, w[t], w[t + 1], w[t + 2]);
            }
          gw[t] += d0;
          gw[t + 1] += d1;
          gw[t + 2] += d2;
        }
      }
    }
  }
}

/// 2x2x2, stride 2 downsampling convolution. Weights [cout][cin][8].
template <typename T>
void down_forward(const Tensor<T>& in, const T* w, const T* b, Tensor<T>& out) {
  const int H = in.dims.h, W = in.dims.w, cin = in.channels;
  const int od = out.dims.d, oh = out.dims.h, ow = out.dims.w;
  for (int co = 0; co < out.channels; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + out.plane(), b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.channel(ci);
      const T* k = w + (static_cast<std::size_t>(co) * cin + ci) * 8;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy) {
          const T k0 = k[dz * 4 + dy * 2], k1 = k[dz * 4 + dy * 2 + 1];
          for (int z = 0; z < od; ++z)
            for (int y = 0; y < oh; ++y) {
              T* __restrict orow = o + (static_cast<std::size_t>(z) * oh + y) * ow;
              const T* __restrict s = src + (static_cast<std::size_t>(2 * z + dz) * H + (2 * y + dy)) * W;
              for (int x = 0; x < ow; ++x) orow[x] += k0 * s[2 * x] + k1 * s[2 * x + 1];
            }
        }
    }
  }
}

template <typename T>
void down_backward(const Tensor<T>& in, const T* w, const Tensor<T>& gout, Tensor<T>* gin, T* gw, T* gb) {
  const int H = in.dims.h, W = in.dims.w, cin = in.channels;
  const int od = gout.dims.d, oh = gout.dims.h, ow = gout.dims.w;
  for (int co = 0; co < gout.channels; ++co) {
    const T* g = gout.channel(co);
    gb[co] += detail::channel_sum(g, gout.plane());
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.channel(ci);
      T* gi = gin ? gin->channel(ci) : nullptr;
      const std::size_t base = (static_cast<std::size_t>(co) * cin + ci) * 8;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy) {
          const std::size_t t = base + dz * 4 + dy * 2;
          const T k0 = w[t], k1 = w[t + 1];
          T a0 = 0, a1 = 0;
          for (int z = 0; z < od; ++z)
            for (int y = 0; y < oh; ++y) {
              const T* grow = g + (static_cast<std::size_t>(z) * oh + y) * ow;
              const std::size_t srow = (static_cast<std::size_t>(2 * z + dz) * H + (2 * y + dy)) * W;
              const T* s = src + srow;
#pragma omp simd reduction(+ : a0, a1)
              for (int x = 0; x < ow; ++x) {
                a0 += grow[x] * s[2 * x];
                a1 += grow[x] * s[2 * x + 1];
              }
              if (gi) {
                T* gr = gi + srow;
                for (int x = 0; x < ow; ++x) {
                  gr[2 * x] += k0 * grow[x];
                  gr[2 * x + 1] += k1 * grow[x];
                }
              }
            }
          gw[t] += a0;
          gw[t + 1] += a1;
        }
    }
  }
}

/// 2x2x2, stride 2 transposed convolution. Weights [cin][cout][8].
template <typename T>
void up_forward(const Tensor<T>& in, const T* w, const T* b, Tensor<T>& out) {
  const int d = in.dims.d, h = in.dims.h, wd = in.dims.w, cin = in.channels, cout = out.channels;
  const int OH = out.dims.h, OW = out.dims.w;
  for (int co = 0; co < cout; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + out.plane(), b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.channel(ci);
      const T* k = w + (static_cast<std::size_t>(ci) * cout + co) * 8;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy) {
          const T k0 = k[dz * 4 + dy * 2], k1 = k[dz * 4 + dy * 2 + 1];
          for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y) {
              const T* __restrict s = src + (static_cast<std::size_t>(z) * h + y) * wd;
              T* __restrict orow = o + (static_cast<std::size_t>(2 * z + dz) * OH + (2 * y + dy)) * OW;
              for (int x = 0; x < wd; ++x) {
                orow[2 * x] += k0 * s[x];
                orow[2 * x + 1] += k1 * s[x];
              }
            }
        }
    }
  }
}

template <typename T>
void up_backward(const Tensor<T>& in, const T* w, const Tensor<T>& gout, Tensor<T>* gin, T* gw, T* gb) {
  const int d = in.dims.d, h = in.dims.h, wd = in.dims.w, cin = in.channels, cout = gout.channels;
  const int OH = gout.dims.h, OW = gout.dims.w;
  for (int co = 0; co < cout; ++co) gb[co] += detail::channel_sum(gout.channel(co), gout.plane());
  for (int ci = 0; ci < cin; ++ci) {
    const T* src = in.channel(ci);
    T* gi = gin ? gin->channel(ci) : nullptr;
    for (int co = 0; co < cout; ++co) {
      const T* g = gout.channel(co);
      const std::size_t base = (static_cast<std::size_t>(ci) * cout + co) * 8;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy) {
          const std::size_t t = base + dz * 4 + dy * 2;
          const T k0 = w[t], k1 = w[t + 1];
          T a0 = 0, a1 = 0;
          for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y) {
              const std::size_t srow = (static_cast<std::size_t>(z) * h + y) * wd;
              const T* s = src + srow;
              const T* grow = g + (static_cast<std::size_t>(2 * z + dz) * OH + (2 * y + dy)) * OW;
#pragma omp simd reduction(+ : a0, a1)
              for (int x = 0; x < wd; ++x) {
                a0 += s[x] * grow[2 * x];
                a1 += s[x] * grow[2 * x + 1];
              }
              if (gi) {
                T* gr = gi + srow;
                for (int x = 0; x < wd; ++x) gr[x] += k0 * grow[2 * x] + k1 * grow[2 * x + 1];
              }
            }
          gw[t] += a0;
          gw[t + 1] += a1;
        }
    }
  }
}

/// 1x1x1 convolution. Weights [cout][cin].
template <typename T>
void pointwise_forward(const Tensor<T>& in, const T* w, const T* b, Tensor<T>& out) {
  const std::size_t n = in.plane();
  for (int co = 0; co < out.channels; ++co) {
    T* __restrict o = out.channel(co);
    std::fill(o, o + n, b[co]);
    for (int ci = 0; ci < in.channels; ++ci) {
      const T k = w[static_cast<std::size_t>(co) * in.channels + ci];
      const T* __restrict s = in.channel(ci);
      for (std::size_t i = 0; i < n; ++i) o[i] += k * s[i];
    }
  }
}

template <typename T>
void pointwise_backward(const Tensor<T>& in, const T* w, const Tensor<T>& gout, Tensor<T>* gin, T* gw, T* gb) {
  const std::size_t n = in.plane();
  for (int co = 0; co < gout.channels; ++co) {
    const T* g = gout.channel(co);
    gb[co] += detail::channel_sum(g, n);
    for (int ci = 0; ci < in.channels; ++ci) {
      const std::size_t t = static_cast<std::size_t>(co) * in.channels + ci;
      const T* s = in.channel(ci);
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < n; ++i) acc += g[i] * s[i];
      gw[t] += acc;
      if (gin) {
        T* __restrict gi = gin->channel(ci);
        const T k = w[t];
        for (std::size_t i = 0; i < n; ++i) gi[i] += k * g[i];
      }
    }
  }
}

// Shifted softplus, softplus(x) - ln 2, rather than ReLU: smooth, so finite
// differences at h = 1e-3 stay meaningful, and zero at zero like ReLU.
inline constexpr double kLn2 = 0.69314718055994530942;

template <typename T>
void softplus_inplace(Tensor<T>& t) {
  const T ln2 = static_cast<T>(kLn2);
  for (T& v : t.values) v = std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))) - ln2;
}

/// d/dx = sigmoid(x) = 1 - exp(-(y + ln 2)) = 1 - exp(-y) / 2, from the output y.
template <typename T>
void softplus_backward(const Tensor<T>& out, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] *= T(1) - T(0.5) * std::exp(-out.values[i]);
}

template <typename T>
void softmax(const Tensor<T>& logits, ProbMap<T>& probs) {
  const std::size_t n = logits.plane();
  const int c = logits.channels;
  for (std::size_t i = 0; i < n; ++i) {
    T m = logits.channel(0)[i];
    for (int k = 1; k < c; ++k) m = std::max(m, logits.channel(k)[i]);
    T sum = 0;
    for (int k = 0; k < c; ++k) {
      const T e = std::exp(logits.channel(k)[i] - m);
      probs.channel(k)[i] = e;
      sum += e;
    }
    for (int k = 0; k < c; ++k) probs.channel(k)[i] /= sum;
  }
}

template <typename T>
void softmax_backward(const ProbMap<T>& probs, const T* grad_probs, Tensor<T>& grad_logits) {
  const std::size_t n = probs.plane();
  const int c = probs.channels;
  for (std::size_t i = 0; i < n; ++i) {
    T dot = 0;
    for (int k = 0; k < c; ++k) dot += probs.channel(k)[i] * grad_probs[k * n + i];
    for (int k = 0; k < c; ++k) grad_logits.channel(k)[i] = probs.channel(k)[i] * (grad_probs[k * n + i] - dot);
  }
}

}  // namespace semisam::nn::kernels
