#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vog/errors.hpp"
#include "vog/model.hpp"
#include "vog/rng.hpp"

using namespace vog;

namespace {

// Central finite difference of the cross-entropy loss w.r.t. one parameter.
double fd_param_grad(const ModelSpec& spec, Params params, std::size_t layer, bool bias,
                     std::size_t idx, const Tensor& x, std::size_t y, double eps = 1e-5) {
  auto& slot = bias ? params.layers[layer].bias.data[idx] : params.layers[layer].weights.data[idx];
  const double saved = slot;
  slot = saved + eps;
  const double hi = [&] {
    Tensor logits = forward(spec, params, x);
    const auto p = softmax(logits.data);
    return -std::log(p[y]);
  }();
  slot = saved - eps;
  const double lo = [&] {
    Tensor logits = forward(spec, params, x);
    const auto p = softmax(logits.data);
    return -std::log(p[y]);
  }();
  slot = saved;
  return (hi - lo) / (2.0 * eps);
}

double fd_input_grad(const ModelSpec& spec, const Params& params, Tensor x, std::size_t idx,
                     std::size_t p, double eps = 1e-5) {
  const double saved = x.data[idx];
  x.data[idx] = saved + eps;
  const double hi = forward(spec, params, x).data[p];
  x.data[idx] = saved - eps;
  const double lo = forward(spec, params, x).data[p];
  return (hi - lo) / (2.0 * eps);
}

bool close_rel(double got, double want, double rel = 1e-4, double floor_abs = 1e-8) {
  const double diff = std::fabs(got - want);
  return diff <= floor_abs || diff <= rel * std::max(std::fabs(got), std::fabs(want));
}

ModelSpec two_layer_mlp() {
  return make_mlp({1, 1, 2}, {3}, 2);
}

}  // namespace

TEST_CASE("identity dense layer passes input through") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 2};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(2, 2));
  spec.validate();
  Params p = Params::zeros_like(spec);
  p.layers[1].weights.data = {1.0, 0.0, 0.0, 1.0};
  const Tensor x = Tensor::from({1, 1, 2}, {0.3, 0.7});
  const Tensor out = forward(spec, p, x);
  CHECK(out.data[0] == doctest::Approx(0.3));
  CHECK(out.data[1] == doctest::Approx(0.7));
}

TEST_CASE("linear net maps zero input with zero bias to zero output") {
  const ModelSpec spec = two_layer_mlp();
  Params p = Params::init(spec, 3);
  for (auto& lp : p.layers) std::fill(lp.bias.data.begin(), lp.bias.data.end(), 0.0);
  const Tensor x = Tensor::from({1, 1, 2}, {0.0, 0.0});
  for (double v : forward(spec, p, x).data) CHECK(v == 0.0);
}

TEST_CASE("seed-0 MLP forward matches a straight-line reimplementation") {
  const ModelSpec spec = two_layer_mlp();
  const Params p = Params::init(spec, 0);
  const Tensor x = Tensor::from({1, 1, 2}, {0.25, -1.5});
  const Tensor got = forward(spec, p, x);

  // independent arithmetic: flatten -> dense(2,3) -> relu -> dense(3,2)
  const auto& w1 = p.layers[1].weights.data;
  const auto& b1 = p.layers[1].bias.data;
  const auto& w2 = p.layers[3].weights.data;
  const auto& b2 = p.layers[3].bias.data;
  double hidden[3];
  for (int r = 0; r < 3; ++r) {
    double acc = b1[r];
    acc += w1[r * 2 + 0] * 0.25;
    acc += w1[r * 2 + 1] * -1.5;
    hidden[r] = acc > 0.0 ? acc : 0.0;
  }
  for (int r = 0; r < 2; ++r) {
    double acc = b2[r];
    for (int c = 0; c < 3; ++c) acc += w2[r * 3 + c] * hidden[c];
    CHECK(got.data[r] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("forward is pure: repeated calls are bit-identical") {
  const ModelSpec spec = two_layer_mlp();
  const Params p = Params::init(spec, 9);
  const Tensor x = Tensor::from({1, 1, 2}, {0.5, 2.0});
  const Tensor a = forward(spec, p, x);
  const Tensor b = forward(spec, p, x);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("params init is deterministic per seed") {
  const ModelSpec spec = two_layer_mlp();
  const Params a = Params::init(spec, 42);
  const Params b = Params::init(spec, 42);
  const Params c = Params::init(spec, 43);
  CHECK(a.layers[1].weights.data == b.layers[1].weights.data);
  CHECK(a.layers[1].weights.data != c.layers[1].weights.data);
}

TEST_CASE("uniform softmax loss is ln 2") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 2};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(2, 2));
  spec.validate();
  const Params p = Params::zeros_like(spec);  // logits [0, 0]
  const Tensor x = Tensor::from({1, 1, 2}, {0.4, 0.6});
  const LossGrad lg = softmax_xent_grad(spec, p, x, 0);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("confident correct logit drives the loss to zero") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 2};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(2, 2));
  spec.validate();
  Params p = Params::zeros_like(spec);
  p.layers[1].bias.data = {50.0, -50.0};
  const Tensor x = Tensor::from({1, 1, 2}, {0.0, 0.0});
  const LossGrad lg = softmax_xent_grad(spec, p, x, 0);
  CHECK(lg.loss < 1e-12);
}

TEST_CASE("parameter gradients match central finite differences (MLP)") {
  const ModelSpec spec = two_layer_mlp();
  const Params p = Params::init(spec, 17);
  const Tensor x = Tensor::from({1, 1, 2}, {0.8, -0.3});
  const LossGrad lg = softmax_xent_grad(spec, p, x, 1);
  for (std::size_t layer : {1u, 3u}) {
    for (std::size_t i = 0; i < p.layers[layer].weights.numel(); ++i) {
      const double fd = fd_param_grad(spec, p, layer, false, i, x, 1);
      CHECK_MESSAGE(close_rel(lg.param_grads.layers[layer].weights.data[i], fd),
                    "weight grad layer ", layer, " idx ", i);
    }
    for (std::size_t i = 0; i < p.layers[layer].bias.numel(); ++i) {
      const double fd = fd_param_grad(spec, p, layer, true, i, x, 1);
      CHECK_MESSAGE(close_rel(lg.param_grads.layers[layer].bias.data[i], fd),
                    "bias grad layer ", layer, " idx ", i);
    }
  }
}

TEST_CASE("parameter and input gradients match finite differences (convnet)") {
  const ModelSpec spec = make_convnet({2, 5, 5}, 3, 3, 4, 3);
  const Params p = Params::init(spec, 23);
  Rng rng(5);
  Tensor x = Tensor::zeros({2, 5, 5});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

  const LossGrad lg = softmax_xent_grad(spec, p, x, 2);
  for (std::size_t layer = 0; layer < spec.layers.size(); ++layer) {
    for (std::size_t i = 0; i < p.layers[layer].weights.numel(); ++i) {
      const double fd = fd_param_grad(spec, p, layer, false, i, x, 2);
      CHECK_MESSAGE(close_rel(lg.param_grads.layers[layer].weights.data[i], fd),
                    "conv weight grad layer ", layer, " idx ", i);
    }
    for (std::size_t i = 0; i < p.layers[layer].bias.numel(); ++i) {
      const double fd = fd_param_grad(spec, p, layer, true, i, x, 2);
      CHECK_MESSAGE(close_rel(lg.param_grads.layers[layer].bias.data[i], fd),
                    "conv bias grad layer ", layer, " idx ", i);
    }
  }

  const Tensor ig = input_gradient(spec, p, x, 1);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double fd = fd_input_grad(spec, p, x, i, 1);
    CHECK_MESSAGE(close_rel(ig.data[i], fd), "input grad idx ", i);
  }
}

TEST_CASE("input gradient of a single dense layer is row p of W") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(3, 2));
  spec.validate();
  Params p = Params::zeros_like(spec);
  p.layers[1].weights.data = {1.0, -2.0, 0.5, 3.0, 0.25, -1.0};
  p.layers[1].bias.data = {0.7, -0.1};
  const Tensor x = Tensor::from({1, 1, 3}, {0.2, 0.4, 0.6});
  const Tensor g0 = input_gradient(spec, p, x, 0);
  const Tensor g1 = input_gradient(spec, p, x, 1);
  CHECK(g0.data == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(g1.data == std::vector<double>{3.0, 0.25, -1.0});
}

TEST_CASE("input gradient of a linear model is independent of x") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(3, 2));
  spec.validate();
  const Params p = Params::init(spec, 11);
  const Tensor a = Tensor::from({1, 1, 3}, {0.0, 1.0, 2.0});
  const Tensor b = Tensor::from({1, 1, 3}, {-5.0, 3.0, 0.1});
  CHECK(input_gradient(spec, p, a, 0).data == input_gradient(spec, p, b, 0).data);
}

TEST_CASE("dead relu unit contributes nothing to the input gradient") {
  // hidden unit 0 has a strongly negative pre-activation for this input
  ModelSpec spec = make_mlp({1, 1, 2}, {2}, 2);
  Params p = Params::zeros_like(spec);
  p.layers[1].weights.data = {1.0, 1.0, 0.5, -0.5};  // unit 0 row, unit 1 row
  p.layers[1].bias.data = {-100.0, 0.0};             // unit 0 always dead for small x
  p.layers[3].weights.data = {2.0, 4.0, -1.0, 3.0};
  const Tensor x = Tensor::from({1, 1, 2}, {0.3, 0.2});
  const Tensor g = input_gradient(spec, p, x, 0);
  // only unit 1 (weights 0.5, -0.5, output weight 4.0 for class 0) passes
  CHECK(g.data[0] == doctest::Approx(4.0 * 0.5));
  CHECK(g.data[1] == doctest::Approx(4.0 * -0.5));
}

TEST_CASE("predict takes the argmax with ties to the lowest index") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.num_classes = 3;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(3, 3));
  spec.validate();
  Params p = Params::zeros_like(spec);

  SUBCASE("distinct logits") {
    p.layers[1].bias.data = {2.0, 5.0, 1.0};
    const Prediction pr = predict(spec, p, Tensor::from({1, 1, 3}, {0, 0, 0}));
    CHECK(pr.label == 1);
  }
  SUBCASE("tie goes to the lowest index") {
    p.layers[1].bias.data = {3.0, 3.0, 0.0};
    const Prediction pr = predict(spec, p, Tensor::from({1, 1, 3}, {0, 0, 0}));
    CHECK(pr.label == 0);
  }
  SUBCASE("uniform logits give uniform probabilities") {
    const Prediction pr = predict(spec, p, Tensor::from({1, 1, 3}, {0, 0, 0}));
    for (double v : pr.probabilities) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    double sum = 0.0;
    for (double v : pr.probabilities) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax is invariant to adding a constant to all logits") {
  const std::vector<double> base{0.3, -1.2, 2.5, 0.0};
  std::vector<double> shifted = base;
  for (double& v : shifted) v += 123.456;
  const auto a = softmax(base);
  const auto b = softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-12);
}

TEST_CASE("randomized gradient spot checks across layer types") {
  Rng rng(99);
  for (int trial = 0; trial < 9; ++trial) {
    const ModelSpec spec = trial % 3 == 1
                               ? make_convnet({1, 4, 4}, 2, 2, 0, 2)
                               : make_mlp({1, 1, 4}, {5, 3}, 3,
                                          trial % 3 == 2 ? LayerKind::tanh : LayerKind::relu);
    const Params p = Params::init(spec, 100 + trial);
    Tensor x = Tensor::zeros({spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
    for (double& v : x.data) v = rng.uniform(-1.5, 1.5);
    const std::size_t y = static_cast<std::size_t>(rng.below(spec.num_classes));

    const LossGrad lg = softmax_xent_grad(spec, p, x, y);
    for (std::size_t layer = 0; layer < spec.layers.size(); ++layer) {
      for (std::size_t i = 0; i < p.layers[layer].weights.numel(); i += 3) {
        CHECK(close_rel(lg.param_grads.layers[layer].weights.data[i],
                        fd_param_grad(spec, p, layer, false, i, x, y)));
      }
    }
    const Tensor ig = input_gradient(spec, p, x, y);
    for (std::size_t i = 0; i < x.numel(); i += 2) {
      CHECK(close_rel(ig.data[i], fd_input_grad(spec, p, x, i, y)));
    }
  }
}

TEST_CASE("shape and index errors") {
  const ModelSpec spec = two_layer_mlp();
  const Params p = Params::init(spec, 1);
  CHECK_THROWS_AS(forward(spec, p, Tensor::from({1, 1, 3}, {1, 2, 3})), ShapeError);
  CHECK_THROWS_WITH_AS(forward(spec, p, Tensor::from({1, 1, 3}, {1, 2, 3})),
                       doctest::Contains("expected (1x1x2), got (1x1x3)"), ShapeError);
  const Tensor x = Tensor::from({1, 1, 2}, {1, 2});
  CHECK_THROWS_AS(softmax_xent_grad(spec, p, x, 2), IndexError);
  CHECK_THROWS_AS(input_gradient(spec, p, x, 5), IndexError);
}

TEST_CASE("spec validation rejects non-composing layers") {
  ModelSpec spec;
  spec.input_shape = {1, 1, 4};
  spec.num_classes = 2;
  spec.layers.push_back(Layer::flatten_layer());
  spec.layers.push_back(Layer::dense_layer(3, 2));  // input is length 4
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  ModelSpec bad_out;
  bad_out.input_shape = {1, 1, 4};
  bad_out.num_classes = 3;
  bad_out.layers.push_back(Layer::flatten_layer());
  bad_out.layers.push_back(Layer::dense_layer(4, 2));  // 2 != num_classes
  CHECK_THROWS_AS(bad_out.validate(), ValidationError);
}
