#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "d2i/nn/layers.hpp"
#include "d2i/nn/tensor.hpp"

namespace d2i::nn {

// The five-layer stack used throughout: two conv/pool blocks, a wide dense
// layer with dropout, and a dense+softmax head.
inline std::vector<LayerSpec> standard_specs(int conv1_channels, int conv2_channels, int kernel,
                                             int dense_units, float dropout_rate, int num_classes) {
  return {LayerSpec::conv(conv1_channels, kernel),
          LayerSpec::relu(),
          LayerSpec::maxpool(),
          LayerSpec::conv(conv2_channels, kernel),
          LayerSpec::relu(),
          LayerSpec::maxpool(),
          LayerSpec::dense(dense_units),
          LayerSpec::relu(),
          LayerSpec::dropout(dropout_rate),
          LayerSpec::dense(num_classes),
          LayerSpec::softmax()};
}

// Ordered layer stack with shape inference at construction. Weights are
// drawn from a fan-in-scaled truncated normal seeded by init_seed; biases
// zero.
template <class T>
class Cnn {
 public:
  Cnn(Shape3 input, const std::vector<LayerSpec>& specs, std::uint64_t init_seed)
      : input_shape_(input), init_seed_(init_seed) {
    if (specs.empty()) throw ConfigError("model: no layers");
    for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
      if (specs[i].kind == LayerSpec::Kind::softmax) {
        throw ConfigError("model: softmax must be the terminal layer only");
      }
    }
    if (specs.back().kind != LayerSpec::Kind::softmax) {
      throw ConfigError("model: terminal layer must be softmax");
    }
    std::mt19937_64 rng(init_seed);
    Shape3 shape = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const LayerSpec& s = specs[i];
      std::unique_ptr<Layer<T>> layer;
      switch (s.kind) {
        case LayerSpec::Kind::conv:
          layer = std::make_unique<Conv2D<T>>(shape.c, s.out_channels, s.kernel, rng);
          break;
        case LayerSpec::Kind::relu:
          layer = std::make_unique<Relu<T>>();
          break;
        case LayerSpec::Kind::maxpool:
          layer = std::make_unique<MaxPool<T>>();
          break;
        case LayerSpec::Kind::dense:
          layer = std::make_unique<Dense<T>>(shape.c * shape.h * shape.w, s.units, rng);
          break;
        case LayerSpec::Kind::dropout:
          layer = std::make_unique<Dropout<T>>(s.rate, static_cast<int>(i));
          break;
        case LayerSpec::Kind::softmax:
          layer = std::make_unique<Softmax<T>>();
          break;
      }
      shape = layer->output_shape(shape);
      layers_.push_back(std::move(layer));
    }
    output_shape_ = shape;
    if (output_shape_.h != 1 || output_shape_.w != 1) {
      throw ConfigError("model: output must be (n, classes, 1, 1)");
    }
  }

  // Assembles a model from prebuilt layers (tests inject instrumented ones).
  Cnn(Shape3 input, std::vector<std::unique_ptr<Layer<T>>> layers, std::uint64_t init_seed = 0)
      : input_shape_(input), init_seed_(init_seed), layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("model: no layers");
    if (layers_.back()->spec().kind != LayerSpec::Kind::softmax) {
      throw ConfigError("model: terminal layer must be softmax");
    }
    Shape3 shape = input;
    for (const auto& l : layers_) shape = l->output_shape(shape);
    output_shape_ = shape;
    if (output_shape_.h != 1 || output_shape_.w != 1) {
      throw ConfigError("model: output must be (n, classes, 1, 1)");
    }
  }

  const Shape3& input_shape() const { return input_shape_; }
  int num_classes() const { return output_shape_.c; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
  }

  std::vector<ParamTensor<T>*> params() {
    std::vector<ParamTensor<T>*> out;
    for (auto& l : layers_) {
      for (auto* p : l->params()) out.push_back(p);
    }
    return out;
  }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& l : layers_) {
      for (auto* p : const_cast<Layer<T>&>(*l).params()) total += p->size();
    }
    return total;
  }

  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }

  // Flat snapshot of every parameter tensor in params() order.
  std::vector<T> flatten_params() {
    std::vector<T> out;
    out.reserve(param_count());
    for (auto* p : params()) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
  }

  void load_flat_params(const std::vector<T>& flat) {
    std::size_t pos = 0;
    for (auto* p : params()) {
      if (pos + p->size() > flat.size()) throw ConfigError("model: flat parameter size mismatch");
      std::copy(flat.begin() + pos, flat.begin() + pos + p->size(), p->value.begin());
      pos += p->size();
    }
    if (pos != flat.size()) throw ConfigError("model: flat parameter size mismatch");
  }

  // Marks conv parameters (non-)trainable; the fine-tuning freeze contract.
  void set_conv_trainable(bool trainable) {
    for (auto& l : layers_) {
      if (l->spec().kind == LayerSpec::Kind::conv) {
        for (auto* p : l->params()) p->trainable = trainable;
      }
    }
  }

  // Class probabilities, rows summing to 1.
  Tensor4<T> forward(const Tensor4<T>& x, bool train, std::uint64_t dropout_seed = 0) {
    check_input(x);
    Tensor4<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train, dropout_seed);
    return cur;
  }

  // Mean cross-entropy against integer labels; forward in train mode.
  // Loss accumulates in double whatever T is.
  double loss_only(const Tensor4<T>& x, const std::vector<int>& labels, std::uint64_t dropout_seed) {
    return cross_entropy(forward(x, true, dropout_seed), labels);
  }

  // Forward + full backward. Parameter gradients ACCUMULATE (call
  // zero_grads between steps); returns the loss. The softmax+cross-entropy
  // pair backpropagates as the fused (p - onehot)/n form.
  double loss_and_backward(const Tensor4<T>& x, const std::vector<int>& labels,
                           std::uint64_t dropout_seed, Tensor4<T>* dx_out = nullptr) {
    Tensor4<T> probs = forward(x, true, dropout_seed);
    const double loss = cross_entropy(probs, labels);
    last_probs_ = probs;

    Tensor4<T> grad = probs;
    const T inv_n = T(1) / T(x.n);
    for (int b = 0; b < x.n; ++b) {
      grad.v[std::size_t(b) * probs.c + labels[b]] -= T(1);
    }
    for (auto& g : grad.v) g *= inv_n;

    for (std::size_t i = layers_.size() - 1; i-- > 0;) {
      grad = layers_[i]->backward(grad);
    }
    if (dx_out) *dx_out = std::move(grad);
    return loss;
  }

  double cross_entropy(const Tensor4<T>& probs, const std::vector<int>& labels) const {
    if (labels.size() != std::size_t(probs.n)) throw ConfigError("loss: batch/label count mismatch");
    double total = 0.0;
    for (int b = 0; b < probs.n; ++b) {
      const int label = labels[b];
      if (label < 0 || label >= probs.c) throw ConfigError("loss: label out of range");
      total -= std::log(double(probs.v[std::size_t(b) * probs.c + label]));
    }
    return total / probs.n;
  }

  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  std::size_t layer_count() const { return layers_.size(); }

  // Probabilities from the most recent loss_and_backward call.
  const Tensor4<T>& last_probs() const { return last_probs_; }

  // Index of the final dense layer (the classifier head).
  std::size_t head_index() const {
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (layers_[i]->spec().kind == LayerSpec::Kind::dense) return i;
    }
    throw ConfigError("model: no dense layer");
  }

  // Replaces the classifier head with a freshly initialized dense layer for
  // `num_classes` outputs. Shapes upstream are unaffected.
  void replace_head(int num_classes, std::uint64_t head_seed) {
    const std::size_t idx = head_index();
    Shape3 shape = input_shape_;
    for (std::size_t i = 0; i < idx; ++i) shape = layers_[i]->output_shape(shape);
    std::mt19937_64 rng(head_seed);
    layers_[idx] = std::make_unique<Dense<T>>(shape.c * shape.h * shape.w, num_classes, rng);
    shape = {num_classes, 1, 1};
    for (std::size_t i = idx + 1; i < layers_.size(); ++i) shape = layers_[i]->output_shape(shape);
    output_shape_ = shape;
  }

 private:
  void check_input(const Tensor4<T>& x) const {
    if (x.c != input_shape_.c || x.h != input_shape_.h || x.w != input_shape_.w) {
      throw ConfigError("model: input shape mismatch");
    }
  }

  Shape3 input_shape_{};
  Shape3 output_shape_{};
  std::uint64_t init_seed_ = 0;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  Tensor4<T> last_probs_;
};

using CnnF = Cnn<float>;

}  // namespace d2i::nn
