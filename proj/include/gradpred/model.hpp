#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gradpred/layers.hpp"
#include "gradpred/optim.hpp"
#include "gradpred/tensor.hpp"

namespace gradpred {

// Declarative network description. The last layer must be the
// softmax-cross-entropy head; everything before it composes shapewise.
struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> input_shape;  // without the batch dimension
  std::size_t num_classes = 0;

  void validate() const;
};

enum class GradKind { True, Predicted };

struct LayerGrads {
  Tensor weight;
  Tensor bias;
};

// Per-trainable-layer gradients; `kind` records provenance only, consumers
// treat both kinds identically.
struct GradientSet {
  GradKind kind = GradKind::True;
  std::vector<LayerGrads> layers;
};

// Output activations of each trainable layer for one batch.
struct ActivationTrace {
  std::vector<Tensor> per_layer;
};

class Model {
 public:
  static Model build(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // Runs the full forward pass, returns the loss and (optionally) collects
  // each trainable layer's output activations. Parameters are not touched.
  double forward_collect(const Tensor& batch, std::span<const int> labels,
                         ActivationTrace* trace = nullptr);

  // Full reverse sweep over the caches of the last forward_collect.
  // `per_layer_hook(trainable_idx)` is invoked as each layer's true gradients
  // become available (last trainable layer first).
  GradientSet backward_collect();
  GradientSet backward_collect(
      const std::function<void(std::size_t, const LayerGrads&)>& per_layer_hook);

  // The only parameter-mutating operation. Accepts True and Predicted sets
  // identically.
  void apply_gradients(const GradientSet& grads, Optimizer& opt);

  // Applies one trainable layer's gradients (GP-phase per-layer updates).
  void apply_layer_gradients(std::size_t trainable_idx, const LayerGrads& grads,
                             Optimizer& opt);

  // Logits only; used by evaluation. Does not disturb backward contracts.
  Tensor forward_logits(const Tensor& batch);

  // Layer-by-layer access for the gradient-prediction sweep.
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  SoftmaxCrossEntropy& loss_head() { return loss_; }

  std::size_t trainable_count() const { return trainable_.size(); }
  // Index into layer() for the i-th trainable layer.
  std::size_t trainable_layer_index(std::size_t i) const { return trainable_[i]; }
  Layer& trainable_layer(std::size_t i) { return *layers_[trainable_[i]]; }
  const Layer& trainable_layer(std::size_t i) const { return *layers_[trainable_[i]]; }

  std::vector<Tensor*> parameters();
  std::size_t parameter_count() const;

  // Total reverse sweeps since construction; the speed-up bookkeeping hangs
  // off this counter.
  std::size_t backward_calls() const { return backward_calls_; }

 private:
  Model() = default;

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> trainable_;
  SoftmaxCrossEntropy loss_;
  bool pending_backward_ = false;
  std::size_t backward_calls_ = 0;
};

double param_checksum(Model& model);

namespace zoo {
ModelSpec mini_mlp();
ModelSpec mini_cnn();
ModelSpec mini_vgg();
ModelSpec by_name(const std::string& name);
std::vector<std::string> names();
}  // namespace zoo

}  // namespace gradpred
