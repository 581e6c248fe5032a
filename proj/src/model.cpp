#include "gradpred/model.hpp"

#include <functional>

#include "gradpred/errors.hpp"
#include "gradpred/kernels.hpp"
#include "gradpred/rng.hpp"

namespace gradpred {

void ModelSpec::validate() const {
  if (layers.empty()) throw EngineError("model '" + name + "' has no layers");
  if (layers.back().type != LayerType::SoftmaxCrossEntropy) {
    throw EngineError("model '" + name +
                      "' must end with the softmax_cross_entropy head");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].type == LayerType::SoftmaxCrossEntropy) {
      throw EngineError("softmax_cross_entropy must be the last layer");
    }
  }
  if (input_shape.empty()) throw EngineError("model input shape is empty");
  if (num_classes == 0) throw EngineError("num_classes must be positive");
}

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;

  // Shape-compose all layers before allocating anything heavy.
  std::vector<std::size_t> shape;
  shape.push_back(1);
  shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    auto layer = make_layer(spec.layers[i], i);
    shape = layer->output_shape(shape);  // throws naming the offending pair
    m.layers_.push_back(std::move(layer));
    if (m.layers_.back()->trainable()) m.trainable_.push_back(i);
  }
  if (shape.size() != 2 || shape[1] != spec.num_classes) {
    throw EngineError("model '" + spec.name + "' produces " +
                      Tensor::shape_str(shape) + " but the loss head expects (B," +
                      std::to_string(spec.num_classes) + ")");
  }

  Xoshiro256 rng(seed);
  for (auto& layer : m.layers_) layer->init_params(rng);
  return m;
}

double Model::forward_collect(const Tensor& batch, std::span<const int> labels,
                              ActivationTrace* trace) {
  if (trace) trace->per_layer.clear();
  Tensor x = batch;
  for (auto& layer : layers_) {
    x = layer->forward(x);
    if (trace && layer->trainable()) trace->per_layer.push_back(x);
  }
  const double loss = loss_.forward(x, labels);
  pending_backward_ = true;
  return loss;
}

GradientSet Model::backward_collect() {
  return backward_collect({});
}

GradientSet Model::backward_collect(
    const std::function<void(std::size_t, const LayerGrads&)>& per_layer_hook) {
  if (!pending_backward_) {
    throw EngineError("backward_collect without a preceding forward_collect");
  }
  pending_backward_ = false;
  ++backward_calls_;

  GradientSet grads;
  grads.kind = GradKind::True;
  grads.layers.resize(trainable_.size());

  Tensor g = loss_.backward();
  std::size_t next_trainable = trainable_.size();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
    if (layers_[i]->trainable()) {
      --next_trainable;
      grads.layers[next_trainable] = {*layers_[i]->weight_grad(),
                                      *layers_[i]->bias_grad()};
      if (per_layer_hook) per_layer_hook(next_trainable, grads.layers[next_trainable]);
    }
  }
  return grads;
}

void Model::apply_gradients(const GradientSet& grads, Optimizer& opt) {
  if (grads.layers.size() != trainable_.size()) {
    throw EngineError("gradient set has " + std::to_string(grads.layers.size()) +
                      " entries for " + std::to_string(trainable_.size()) +
                      " trainable layers");
  }
  for (std::size_t i = 0; i < trainable_.size(); ++i) {
    apply_layer_gradients(i, grads.layers[i], opt);
  }
}

void Model::apply_layer_gradients(std::size_t trainable_idx,
                                  const LayerGrads& grads, Optimizer& opt) {
  Layer& layer = trainable_layer(trainable_idx);
  opt.step(2 * trainable_idx, *layer.weight(), grads.weight);
  opt.step(2 * trainable_idx + 1, *layer.bias(), grads.bias);
}

Tensor Model::forward_logits(const Tensor& batch) {
  Tensor x = batch;
  for (auto& layer : layers_) x = layer->forward(x);
  return x;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t i : trainable_) {
    out.push_back(layers_[i]->weight());
    out.push_back(layers_[i]->bias());
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i : trainable_) {
    n += layers_[i]->weight_grad()->numel() + layers_[i]->bias_grad()->numel();
  }
  return n;
}

double param_checksum(Model& model) {
  double acc = 0.0;
  std::size_t k = 1;
  for (Tensor* p : model.parameters()) {
    for (double v : p->data()) {
      acc += v * static_cast<double>(k % 977);
      ++k;
    }
  }
  return acc;
}

namespace zoo {

ModelSpec mini_mlp() {
  ModelSpec s;
  s.name = "mini_mlp";
  s.input_shape = {32};
  s.num_classes = 4;
  s.layers = {
      LayerSpec::dense(32, 32),
      LayerSpec::relu(),
      LayerSpec::dense(32, 4),
      LayerSpec::softmax_cross_entropy(),
  };
  return s;
}

ModelSpec mini_cnn() {
  ModelSpec s;
  s.name = "mini_cnn";
  s.input_shape = {1, 16, 16};
  s.num_classes = 4;
  s.layers = {
      LayerSpec::conv2d(1, 8, 3, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),
      LayerSpec::conv2d(8, 16, 3, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),
      LayerSpec::flatten(),
      LayerSpec::dense(16 * 4 * 4, 4),
      LayerSpec::softmax_cross_entropy(),
  };
  return s;
}

ModelSpec mini_vgg() {
  ModelSpec s;
  s.name = "mini_vgg";
  s.input_shape = {3, 16, 16};
  s.num_classes = 10;
  s.layers = {
      LayerSpec::conv2d(3, 8, 3, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),
      LayerSpec::conv2d(8, 16, 3, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),
      LayerSpec::conv2d(16, 32, 3, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2),
      LayerSpec::flatten(),
      LayerSpec::dense(32 * 2 * 2, 64),
      LayerSpec::relu(),
      LayerSpec::dense(64, 10),
      LayerSpec::softmax_cross_entropy(),
  };
  return s;
}

ModelSpec by_name(const std::string& name) {
  if (name == "mini_mlp") return mini_mlp();
  if (name == "mini_cnn") return mini_cnn();
  if (name == "mini_vgg") return mini_vgg();
  throw ConfigError("unknown model '" + name + "' (known: mini_mlp, mini_cnn, mini_vgg)");
}

std::vector<std::string> names() { return {"mini_mlp", "mini_cnn", "mini_vgg"}; }

}  // namespace zoo

}  // namespace gradpred
