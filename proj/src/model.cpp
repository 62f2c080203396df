#include "vog/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vog/errors.hpp"
#include "vog/rng.hpp"

namespace vog {

Layer Layer::dense_layer(std::size_t in, std::size_t out) {
  Layer l;
  l.kind = LayerKind::dense;
  l.in = in;
  l.out = out;
  return l;
}

Layer Layer::conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t k) {
  Layer l;
  l.kind = LayerKind::conv;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.k = k;
  return l;
}

Layer Layer::relu_layer() {
  Layer l;
  l.kind = LayerKind::relu;
  return l;
}

Layer Layer::tanh_layer() {
  Layer l;
  l.kind = LayerKind::tanh;
  return l;
}

Layer Layer::flatten_layer() {
  Layer l;
  l.kind = LayerKind::flatten;
  return l;
}

std::vector<std::vector<std::size_t>> ModelSpec::activation_shapes() const {
  std::vector<std::vector<std::size_t>> shapes;
  shapes.push_back({input_shape[0], input_shape[1], input_shape[2]});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const std::vector<std::size_t>& cur = shapes.back();
    switch (l.kind) {
      case LayerKind::dense: {
        if (cur.size() != 1 || cur[0] != l.in) {
          throw ValidationError("layer " + std::to_string(i) + ": dense expects a flat input of length " +
                                std::to_string(l.in) + ", got " + shape_string(cur));
        }
        shapes.push_back({l.out});
        break;
      }
      case LayerKind::conv: {
        if (cur.size() != 3 || cur[0] != l.in_ch) {
          throw ValidationError("layer " + std::to_string(i) + ": conv expects " + std::to_string(l.in_ch) +
                                " input channels, got " + shape_string(cur));
        }
        if (l.k == 0 || cur[1] < l.k || cur[2] < l.k) {
          throw ValidationError("layer " + std::to_string(i) + ": kernel " + std::to_string(l.k) +
                                " does not fit input " + shape_string(cur));
        }
        shapes.push_back({l.out_ch, cur[1] - l.k + 1, cur[2] - l.k + 1});
        break;
      }
      case LayerKind::relu:
      case LayerKind::tanh:
        shapes.push_back(cur);
        break;
      case LayerKind::flatten:
        shapes.push_back({shape_numel(cur)});
        break;
    }
  }
  return shapes;
}

void ModelSpec::validate() const {
  if (num_classes == 0) throw ValidationError("model spec: num_classes must be positive");
  for (std::size_t e : input_shape) {
    if (e == 0) throw ValidationError("model spec: input_shape extents must be positive");
  }
  if (layers.empty()) throw ValidationError("model spec: at least one layer required");
  const auto shapes = activation_shapes();
  const std::vector<std::size_t>& out = shapes.back();
  if (out.size() != 1 || out[0] != num_classes) {
    throw ValidationError("model spec: final layer output " + shape_string(out) +
                          " must be a vector of length num_classes=" + std::to_string(num_classes));
  }
}

ModelSpec make_mlp(std::array<std::size_t, 3> input_shape,
                   const std::vector<std::size_t>& hidden, std::size_t num_classes,
                   LayerKind activation) {
  ModelSpec spec;
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  std::size_t width = input_shape[0] * input_shape[1] * input_shape[2];
  spec.layers.push_back(Layer::flatten_layer());
  for (std::size_t h : hidden) {
    spec.layers.push_back(Layer::dense_layer(width, h));
    spec.layers.push_back(activation == LayerKind::tanh ? Layer::tanh_layer()
                                                        : Layer::relu_layer());
    width = h;
  }
  spec.layers.push_back(Layer::dense_layer(width, num_classes));
  spec.validate();
  return spec;
}

ModelSpec make_convnet(std::array<std::size_t, 3> input_shape, std::size_t conv_channels,
                       std::size_t kernel, std::size_t hidden, std::size_t num_classes) {
  ModelSpec spec;
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers.push_back(Layer::conv_layer(input_shape[0], conv_channels, kernel));
  spec.layers.push_back(Layer::relu_layer());
  const std::size_t oh = input_shape[1] - kernel + 1;
  const std::size_t ow = input_shape[2] - kernel + 1;
  spec.layers.push_back(Layer::flatten_layer());
  std::size_t width = conv_channels * oh * ow;
  if (hidden > 0) {
    spec.layers.push_back(Layer::dense_layer(width, hidden));
    spec.layers.push_back(Layer::relu_layer());
    width = hidden;
  }
  spec.layers.push_back(Layer::dense_layer(width, num_classes));
  spec.validate();
  return spec;
}

Params Params::zeros_like(const ModelSpec& spec) {
  Params p;
  for (const Layer& l : spec.layers) {
    LayerParams lp;
    if (l.kind == LayerKind::dense) {
      lp.weights = Tensor::zeros({l.out, l.in});
      lp.bias = Tensor::zeros({l.out});
    } else if (l.kind == LayerKind::conv) {
      lp.weights = Tensor::zeros({l.out_ch, l.in_ch, l.k, l.k});
      lp.bias = Tensor::zeros({l.out_ch});
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

Params Params::init(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Params p = zeros_like(spec);
  p.rng_seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    if (l.kind != LayerKind::dense && l.kind != LayerKind::conv) continue;
    const std::size_t fan_in = l.kind == LayerKind::dense ? l.in : l.in_ch * l.k * l.k;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& w : p.layers[i].weights.data) w = rng.uniform(-limit, limit);
    // biases start at zero
  }
  return p;
}

void Params::check_shapes(const ModelSpec& spec) const {
  if (layers.size() != spec.layers.size()) {
    throw ShapeError("params hold " + std::to_string(layers.size()) + " layers, spec expects " +
                     std::to_string(spec.layers.size()));
  }
  const Params ref = zeros_like(spec);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.shape != ref.layers[i].weights.shape ||
        layers[i].bias.shape != ref.layers[i].bias.shape) {
      throw ShapeError("params for layer " + std::to_string(i) + " have shape " +
                       shape_string(layers[i].weights.shape) + "/" + shape_string(layers[i].bias.shape) +
                       ", spec expects " + shape_string(ref.layers[i].weights.shape) + "/" +
                       shape_string(ref.layers[i].bias.shape));
    }
  }
}

std::size_t Params::total_values() const {
  std::size_t n = 0;
  for (const LayerParams& lp : layers) n += lp.weights.numel() + lp.bias.numel();
  return n;
}

void Params::axpy(double scale, const Params& g) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].weights.numel(); ++j)
      layers[i].weights.data[j] += scale * g.layers[i].weights.data[j];
    for (std::size_t j = 0; j < layers[i].bias.numel(); ++j)
      layers[i].bias.data[j] += scale * g.layers[i].bias.data[j];
  }
}

namespace {

void check_input(const ModelSpec& spec, const Tensor& x) {
  const std::vector<std::size_t> expected{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  if (x.shape != expected) {
    throw ShapeError("input shape mismatch: expected " + shape_string(expected) + ", got " +
                     shape_string(x.shape));
  }
}

Tensor dense_forward(const Layer& l, const LayerParams& p, const Tensor& in) {
  Tensor out = Tensor::zeros({l.out});
  for (std::size_t r = 0; r < l.out; ++r) {
    double acc = p.bias.data[r];
    const double* w = &p.weights.data[r * l.in];
    for (std::size_t c = 0; c < l.in; ++c) acc += w[c] * in.data[c];
    out.data[r] = acc;
  }
  return out;
}

Tensor conv_forward(const Layer& l, const LayerParams& p, const Tensor& in) {
  const std::size_t h = in.shape[1], w = in.shape[2];
  const std::size_t oh = h - l.k + 1, ow = w - l.k + 1;
  Tensor out = Tensor::zeros({l.out_ch, oh, ow});
  for (std::size_t oc = 0; oc < l.out_ch; ++oc) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = p.bias.data[oc];
        for (std::size_t ic = 0; ic < l.in_ch; ++ic) {
          for (std::size_t ky = 0; ky < l.k; ++ky) {
            const double* wrow = &p.weights.data[((oc * l.in_ch + ic) * l.k + ky) * l.k];
            const double* irow = &in.data[(ic * h + (y + ky)) * w + x];
            for (std::size_t kx = 0; kx < l.k; ++kx) acc += wrow[kx] * irow[kx];
          }
        }
        out.data[(oc * oh + y) * ow + x] = acc;
      }
    }
  }
  return out;
}

struct Trace {
  std::vector<Tensor> activations;  // input of each layer, plus the output last
};

Trace run_forward(const ModelSpec& spec, const Params& params, const Tensor& x) {
  check_input(spec, x);
  params.check_shapes(spec);
  Trace tr;
  tr.activations.reserve(spec.layers.size() + 1);
  tr.activations.push_back(x);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    const Tensor& in = tr.activations.back();
    switch (l.kind) {
      case LayerKind::dense:
        tr.activations.push_back(dense_forward(l, params.layers[i], in));
        break;
      case LayerKind::conv:
        tr.activations.push_back(conv_forward(l, params.layers[i], in));
        break;
      case LayerKind::relu: {
        Tensor out = in;
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        tr.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::tanh: {
        Tensor out = in;
        for (double& v : out.data) v = std::tanh(v);
        tr.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::flatten: {
        Tensor out = in;
        out.shape = {in.numel()};
        tr.activations.push_back(std::move(out));
        break;
      }
    }
  }
  return tr;
}

struct BackwardResult {
  Params param_grads;
  Tensor input_grad;
};

// Reverse pass from a gradient on the pre-softmax output; fills parameter
// gradients and/or the input gradient as requested.
BackwardResult run_backward(const ModelSpec& spec, const Params& params, const Trace& tr,
                            const std::vector<double>& dlogits, bool want_params, bool want_input) {
  BackwardResult res;
  if (want_params) res.param_grads = Params::zeros_like(spec);

  Tensor grad = Tensor::from({dlogits.size()}, dlogits);
  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const Layer& l = spec.layers[ii];
    const Tensor& in = tr.activations[ii];
    switch (l.kind) {
      case LayerKind::dense: {
        Tensor din = Tensor::zeros({l.in});
        const LayerParams& p = params.layers[ii];
        for (std::size_t r = 0; r < l.out; ++r) {
          const double g = grad.data[r];
          const double* w = &p.weights.data[r * l.in];
          for (std::size_t c = 0; c < l.in; ++c) din.data[c] += g * w[c];
        }
        if (want_params) {
          LayerParams& pg = res.param_grads.layers[ii];
          for (std::size_t r = 0; r < l.out; ++r) {
            const double g = grad.data[r];
            double* wrow = &pg.weights.data[r * l.in];
            for (std::size_t c = 0; c < l.in; ++c) wrow[c] += g * in.data[c];
            pg.bias.data[r] += g;
          }
        }
        grad = std::move(din);
        break;
      }
      case LayerKind::conv: {
        const std::size_t h = in.shape[1], w = in.shape[2];
        const std::size_t oh = h - l.k + 1, ow = w - l.k + 1;
        Tensor din = Tensor::zeros(in.shape);
        const LayerParams& p = params.layers[ii];
        LayerParams* pg = want_params ? &res.param_grads.layers[ii] : nullptr;
        for (std::size_t oc = 0; oc < l.out_ch; ++oc) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              const double g = grad.data[(oc * oh + y) * ow + x];
              if (pg) pg->bias.data[oc] += g;
              for (std::size_t ic = 0; ic < l.in_ch; ++ic) {
                for (std::size_t ky = 0; ky < l.k; ++ky) {
                  const double* wrow = &p.weights.data[((oc * l.in_ch + ic) * l.k + ky) * l.k];
                  double* drow = &din.data[(ic * h + (y + ky)) * w + x];
                  const double* irow = &in.data[(ic * h + (y + ky)) * w + x];
                  for (std::size_t kx = 0; kx < l.k; ++kx) {
                    drow[kx] += g * wrow[kx];
                    if (pg) pg->weights.data[((oc * l.in_ch + ic) * l.k + ky) * l.k + kx] += g * irow[kx];
                  }
                }
              }
            }
          }
        }
        grad = std::move(din);
        break;
      }
      case LayerKind::relu: {
        Tensor din = grad;
        din.shape = in.shape;
        // subgradient at 0 is 0
        for (std::size_t j = 0; j < din.numel(); ++j)
          if (in.data[j] <= 0.0) din.data[j] = 0.0;
        grad = std::move(din);
        break;
      }
      case LayerKind::tanh: {
        Tensor din = grad;
        din.shape = in.shape;
        for (std::size_t j = 0; j < din.numel(); ++j) {
          const double y = std::tanh(in.data[j]);
          din.data[j] *= 1.0 - y * y;
        }
        grad = std::move(din);
        break;
      }
      case LayerKind::flatten: {
        grad.shape = in.shape;
        break;
      }
    }
  }
  if (want_input) res.input_grad = std::move(grad);
  return res;
}

}  // namespace

Tensor forward(const ModelSpec& spec, const Params& params, const Tensor& x) {
  Trace tr = run_forward(spec, params, x);
  Tensor out = std::move(tr.activations.back());
  out.ensure_finite("forward");
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Prediction predict(const ModelSpec& spec, const Params& params, const Tensor& x) {
  const Tensor logits = forward(spec, params, x);
  Prediction pr;
  pr.label = 0;
  for (std::size_t i = 1; i < logits.numel(); ++i) {
    if (logits.data[i] > logits.data[pr.label]) pr.label = i;  // ties keep the lowest index
  }
  pr.probabilities = softmax(logits.data);
  return pr;
}

LossGrad softmax_xent_grad(const ModelSpec& spec, const Params& params,
                           const Tensor& x, std::size_t y) {
  if (y >= spec.num_classes) {
    throw IndexError("class index " + std::to_string(y) + " out of range [0, " +
                     std::to_string(spec.num_classes) + ")");
  }
  Trace tr = run_forward(spec, params, x);
  const Tensor& logits = tr.activations.back();

  double m = logits.data[0];
  for (double v : logits.data) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits.data) sum += std::exp(v - m);
  const double loss = -(logits.data[y] - m - std::log(sum));

  std::vector<double> dlogits(logits.numel());
  for (std::size_t i = 0; i < dlogits.size(); ++i)
    dlogits[i] = std::exp(logits.data[i] - m) / sum;
  dlogits[y] -= 1.0;

  BackwardResult back = run_backward(spec, params, tr, dlogits, /*want_params=*/true, /*want_input=*/false);
  if (!std::isfinite(loss)) throw ValidationError("softmax_xent_grad: non-finite loss");
  return LossGrad{loss, std::move(back.param_grads)};
}

Tensor input_gradient(const ModelSpec& spec, const Params& params,
                      const Tensor& x, std::size_t p) {
  if (p >= spec.num_classes) {
    throw IndexError("class index " + std::to_string(p) + " out of range [0, " +
                     std::to_string(spec.num_classes) + ")");
  }
  Trace tr = run_forward(spec, params, x);
  std::vector<double> dlogits(spec.num_classes, 0.0);
  dlogits[p] = 1.0;
  BackwardResult back = run_backward(spec, params, tr, dlogits, /*want_params=*/false, /*want_input=*/true);
  back.input_grad.ensure_finite("input_gradient");
  return std::move(back.input_grad);
}

}  // namespace vog
