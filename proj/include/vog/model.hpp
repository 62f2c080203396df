#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vog/tensor.hpp"

namespace vog {

// Minimal differentiable network core: dense and small valid-padding
// convolutional nets, evaluated in f64. Everything here is a pure function
// of its inputs, so concurrent callers are safe.

enum class LayerKind { dense, conv, relu, tanh, flatten };

struct Layer {
  LayerKind kind;
  // dense
  std::size_t in = 0, out = 0;
  // conv (valid padding, stride 1, square kernel)
  std::size_t in_ch = 0, out_ch = 0, k = 0;

  static Layer dense_layer(std::size_t in, std::size_t out);
  static Layer conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k);
  static Layer relu_layer();
  static Layer tanh_layer();
  static Layer flatten_layer();
};

struct ModelSpec {
  std::vector<Layer> layers;
  std::array<std::size_t, 3> input_shape{};  // channels, height, width
  std::size_t num_classes = 0;

  // Throws ValidationError unless consecutive layer shapes compose and the
  // final activation has length num_classes.
  void validate() const;

  // Activation shape before each layer plus the output shape; index 0 is the
  // input shape, index layers.size() the final (pre-softmax) shape.
  std::vector<std::vector<std::size_t>> activation_shapes() const;
};

// Convenience builders for the desk-scale architectures.
ModelSpec make_mlp(std::array<std::size_t, 3> input_shape,
                   const std::vector<std::size_t>& hidden, std::size_t num_classes,
                   LayerKind activation = LayerKind::relu);
ModelSpec make_convnet(std::array<std::size_t, 3> input_shape, std::size_t conv_channels,
                       std::size_t kernel, std::size_t hidden, std::size_t num_classes);

struct LayerParams {
  Tensor weights;  // dense: (out, in); conv: (out_ch, in_ch, k, k)
  Tensor bias;     // dense: (out); conv: (out_ch)
};

struct Params {
  std::vector<LayerParams> layers;  // one entry per spec layer; empty tensors for relu/flatten
  std::uint64_t rng_seed = 0;

  // He-style uniform fan-in init from the seeded generator; bit-identical for
  // identical (seed, spec).
  static Params init(const ModelSpec& spec, std::uint64_t seed);
  static Params zeros_like(const ModelSpec& spec);

  void check_shapes(const ModelSpec& spec) const;
  std::size_t total_values() const;

  // theta += scale * g, elementwise over every parameter tensor.
  void axpy(double scale, const Params& g);
};

// Pre-softmax activations A^l, length num_classes.
Tensor forward(const ModelSpec& spec, const Params& params, const Tensor& x);

struct Prediction {
  std::size_t label;                // argmax of A^l, ties to the lowest index
  std::vector<double> probabilities;  // softmax, sums to 1
};
Prediction predict(const ModelSpec& spec, const Params& params, const Tensor& x);

std::vector<double> softmax(const std::vector<double>& logits);

struct LossGrad {
  double loss;
  Params param_grads;
};
// Cross-entropy of softmax(A^l) against class y, with gradients for every
// parameter.
LossGrad softmax_xent_grad(const ModelSpec& spec, const Params& params,
                           const Tensor& x, std::size_t y);

// d A_p^l / d x: gradient of the raw pre-softmax scalar at index p with
// respect to every input element. Not the loss, not post-softmax.
Tensor input_gradient(const ModelSpec& spec, const Params& params,
                      const Tensor& x, std::size_t p);

}  // namespace vog
