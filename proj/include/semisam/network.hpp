#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisam/kernels.hpp"
#include "semisam/random.hpp"
#include "semisam/tensor.hpp"

namespace semisam::nn {

/// V-Net style encoder/decoder: level l has base_width * 2^l channels and
/// min(l + 1, 3) 3x3x3 convolutions; levels are joined by 2x2x2 strided
/// down/up convolutions and additive skips. Dropout sits at the bottleneck.
struct BackboneConfig {
  int in_channels = 1;
  int num_classes = 2;
  int base_width = 4;
  int depth = 2;
  double dropout_rate = 0.5;

  static BackboneConfig tiny() { return {}; }
  static BackboneConfig full() { return {1, 2, 16, 4, 0.5}; }

  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

nlohmann::json to_json(const BackboneConfig& c);
BackboneConfig backbone_from_json(const nlohmann::json& j);

/// Flat, ordered view of every trainable weight of one backbone instance.
template <typename T>
struct ParameterVector {
  std::vector<T> values;

  std::size_t size() const noexcept { return values.size(); }
  std::span<T> span() noexcept { return values; }
  std::span<const T> span() const noexcept { return values; }
  bool operator==(const ParameterVector&) const = default;
};

template <typename To, typename From>
ParameterVector<To> cast_parameters(const ParameterVector<From>& p) {
  return ParameterVector<To>{std::vector<To>(p.values.begin(), p.values.end())};
}

enum class OpKind { conv3, down, up, add, dropout, head };

struct Op {
  OpKind kind;
  int in = 0;        // activation index consumed
  int other = -1;    // second operand for add
  int out = 0;       // activation index produced
  int cin = 0;
  int cout = 0;
  std::size_t weights = 0;
  std::size_t bias = 0;
  bool act = false;
};

/// Everything forward() keeps for backward().
template <typename T>
struct Tape {
  std::vector<Tensor<T>> acts;   // acts[0] is the input
  Tensor<T> dropout_scale;        // empty when dropout was inactive
  ProbMap<T> probs;
};

template <typename T>
class Backbone {
 public:
  explicit Backbone(BackboneConfig config) : config_(config) {
    config_.validate();
    build();
  }

  const BackboneConfig& config() const noexcept { return config_; }
  std::size_t parameter_count() const noexcept { return n_params_; }
  const std::vector<Op>& ops() const noexcept { return ops_; }

  /// Spatial extents must be divisible by 2^(depth-1).
  bool accepts(const Dims& dims) const noexcept {
    const int f = 1 << (config_.depth - 1);
    return dims.d > 0 && dims.h > 0 && dims.w > 0 && dims.d % f == 0 && dims.h % f == 0 && dims.w % f == 0;
  }

  /// He-normal weights, zero biases.
  ParameterVector<T> initial_parameters(std::uint64_t seed) const {
    ParameterVector<T> p{std::vector<T>(n_params_, T(0))};
    Rng rng(seed);
    for (const Op& op : ops_) {
      std::size_t n = 0;
      double fan_in = 0;
      switch (op.kind) {
        case OpKind::conv3: n = std::size_t(op.cin) * op.cout * 27; fan_in = op.cin * 27.0; break;
        case OpKind::down: n = std::size_t(op.cin) * op.cout * 8; fan_in = op.cin * 8.0; break;
        case OpKind::up: n = std::size_t(op.cin) * op.cout * 8; fan_in = op.cin; break;
        case OpKind::head: n = std::size_t(op.cin) * op.cout; fan_in = op.cin; break;
        default: continue;
      }
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (std::size_t i = 0; i < n; ++i) p.values[op.weights + i] = static_cast<T>(dist(rng));
    }
    return p;
  }

  /// Class probabilities with the input's spatial shape. Dropout is sampled
  /// from `rng` only when `stochastic` is set.
  ProbMap<T> forward(std::span<const T> params, const Tensor<T>& input, bool stochastic, Rng* rng = nullptr,
                     Tape<T>* tape = nullptr) const {
    check_input(params, input);
    Tape<T> local;
    Tape<T>& tp = tape ? *tape : local;
    tp.acts.assign(n_acts_, Tensor<T>());
    tp.dropout_scale = Tensor<T>();
    tp.acts[0] = input;
    for (const Op& op : ops_) {
      const Tensor<T>& x = tp.acts[op.in];
      Tensor<T>& y = tp.acts[op.out];
      const T* w = params.data() + op.weights;
      const T* b = params.data() + op.bias;
      switch (op.kind) {
        case OpKind::conv3:
          y = Tensor<T>(op.cout, x.dims);
          kernels::conv3_forward(x, w, b, y);
          break;
        case OpKind::down:
          y = Tensor<T>(op.cout, Dims{x.dims.d / 2, x.dims.h / 2, x.dims.w / 2});
          kernels::down_forward(x, w, b, y);
          break;
        case OpKind::up:
          y = Tensor<T>(op.cout, Dims{x.dims.d * 2, x.dims.h * 2, x.dims.w * 2});
          kernels::up_forward(x, w, b, y);
          break;
        case OpKind::head:
          y = Tensor<T>(op.cout, x.dims);
          kernels::pointwise_forward(x, w, b, y);
          break;
        case OpKind::add: {
          y = x;
          const Tensor<T>& o = tp.acts[op.other];
          for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += o.values[i];
          break;
        }
        case OpKind::dropout:
          y = x;
          if (stochastic && config_.dropout_rate > 0.0) {
            if (!rng) throw ContractViolation("stochastic forward needs an RNG");
            const double keep = 1.0 - config_.dropout_rate;
            const T scale = static_cast<T>(1.0 / keep);
            tp.dropout_scale = Tensor<T>(x.channels, x.dims);
            std::bernoulli_distribution coin(keep);
            for (std::size_t i = 0; i < y.values.size(); ++i) {
              const T s = coin(*rng) ? scale : T(0);
              tp.dropout_scale.values[i] = s;
              y.values[i] *= s;
            }
          }
          break;
      }
      if (op.act) kernels::softplus_inplace(y);
    }
    tp.probs = ProbMap<T>(config_.num_classes, input.dims);
    kernels::softmax(tp.acts.back(), tp.probs);
    return tp.probs;
  }

  /// Accumulates d(loss)/d(params) into `grad_params` given d(loss)/d(probs).
  void backward(std::span<const T> params, const Tape<T>& tape, std::span<const T> grad_probs,
                std::span<T> grad_params) const {
    if (grad_params.size() != n_params_ || params.size() != n_params_) {
      throw ShapeMismatch("backward: parameter/gradient length mismatch");
    }
    if (grad_probs.size() != tape.probs.values.size()) throw ShapeMismatch("backward: gradient/probability mismatch");
    std::vector<Tensor<T>> grads(n_acts_);
    auto grad_of = [&](int idx) -> Tensor<T>& {
      if (grads[idx].values.empty()) grads[idx] = Tensor<T>(tape.acts[idx].channels, tape.acts[idx].dims);
      return grads[idx];
    };
    Tensor<T>& g_logits = grad_of(n_acts_ - 1);
    kernels::softmax_backward(tape.probs, grad_probs.data(), g_logits);

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      const Op& op = *it;
      if (grads[op.out].values.empty()) continue;
      Tensor<T>& gy = grads[op.out];
      if (op.act) kernels::softplus_backward(tape.acts[op.out], gy);
      const Tensor<T>& x = tape.acts[op.in];
      Tensor<T>* gx = op.in == 0 ? nullptr : &grad_of(op.in);
      const T* w = params.data() + op.weights;
      T* gw = grad_params.data() + op.weights;
      T* gb = grad_params.data() + op.bias;
      switch (op.kind) {
        case OpKind::conv3: kernels::conv3_backward(x, w, gy, gx, gw, gb); break;
        case OpKind::down: kernels::down_backward(x, w, gy, gx, gw, gb); break;
        case OpKind::up: kernels::up_backward(x, w, gy, gx, gw, gb); break;
        case OpKind::head: kernels::pointwise_backward(x, w, gy, gx, gw, gb); break;
        case OpKind::add: {
          Tensor<T>& go = grad_of(op.other);
          for (std::size_t i = 0; i < gy.values.size(); ++i) {
            if (gx) gx->values[i] += gy.values[i];
            go.values[i] += gy.values[i];
          }
          break;
        }
        case OpKind::dropout:
          if (gx) {
            const bool dropped = !tape.dropout_scale.values.empty();
            for (std::size_t i = 0; i < gy.values.size(); ++i) {
              gx->values[i] += dropped ? gy.values[i] * tape.dropout_scale.values[i] : gy.values[i];
            }
          }
          break;
      }
      // Release activations' gradients once consumed.
      gy = Tensor<T>();
    }
  }

 private:
  void check_input(std::span<const T> params, const Tensor<T>& input) const {
    if (params.size() != n_params_) {
      throw ShapeMismatch("parameter vector has " + std::to_string(params.size()) + " entries, backbone needs " +
                          std::to_string(n_params_));
    }
    if (input.channels != config_.in_channels) throw ShapeMismatch("input channel count mismatch");
    if (!accepts(input.dims)) {
      throw ShapeMismatch("input shape " + to_string(input.dims) + " is not divisible by " +
                          std::to_string(1 << (config_.depth - 1)));
    }
  }

  int emit(OpKind kind, int in, int cin, int cout, bool act, int other = -1) {
    Op op;
    op.kind = kind;
    op.in = in;
    op.other = other;
    op.out = n_acts_++;
    op.cin = cin;
    op.cout = cout;
    op.act = act;
    std::size_t taps = 0;
    switch (kind) {
      case OpKind::conv3: taps = 27; break;
      case OpKind::down: case OpKind::up: taps = 8; break;
      case OpKind::head: taps = 1; break;
      default: break;
    }
    if (taps) {
      op.weights = n_params_;
      n_params_ += taps * std::size_t(cin) * cout;
      op.bias = n_params_;
      n_params_ += cout;
    }
    ops_.push_back(op);
    return op.out;
  }

  static int convs_at(int level) { return level + 1 < 3 ? level + 1 : 3; }

  void build() {
    n_acts_ = 1;
    int x = 0;
    int ch = config_.in_channels;
    std::vector<int> skips;
    for (int l = 0; l < config_.depth; ++l) {
      const int width = config_.base_width << l;
      if (l > 0) {
        x = emit(OpKind::down, x, ch, width, true);
        ch = width;
      }
      for (int k = 0; k < convs_at(l); ++k) {
        x = emit(OpKind::conv3, x, ch, width, true);
        ch = width;
      }
      skips.push_back(x);
    }
    x = emit(OpKind::dropout, x, ch, ch, false);
    for (int l = config_.depth - 2; l >= 0; --l) {
      const int width = config_.base_width << l;
      x = emit(OpKind::up, x, ch, width, true);
      ch = width;
      x = emit(OpKind::add, x, ch, ch, false, skips[l]);
      for (int k = 0; k < convs_at(l); ++k) x = emit(OpKind::conv3, x, ch, width, true);
    }
    emit(OpKind::head, x, ch, config_.num_classes, false);
  }

  BackboneConfig config_;
  std::vector<Op> ops_;
  int n_acts_ = 0;
  std::size_t n_params_ = 0;
};

/// output = input + clip(N(0, sigma^2), -clip, clip), elementwise.
Volume perturb_input(const Volume& patch, Rng& rng, double sigma, double clip);

}  // namespace semisam::nn
