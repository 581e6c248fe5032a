#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gradpred/rng.hpp"
#include "gradpred/tensor.hpp"

namespace gradpred {

enum class LayerType {
  Dense,
  Conv2d,
  ReLU,
  MaxPool2d,
  AvgPool2d,
  AdaptiveAvgPool2d,
  Flatten,
  SoftmaxCrossEntropy,
};

// Declarative layer description. Only the fields for the given type are
// meaningful; the factory validates them.
struct LayerSpec {
  LayerType type = LayerType::ReLU;
  std::size_t in_features = 0, out_features = 0;           // Dense
  std::size_t in_channels = 0, out_channels = 0;           // Conv2d
  std::size_t kernel_h = 0, kernel_w = 0;                  // Conv2d
  std::size_t stride = 1, pad = 0;                         // Conv2d
  std::size_t pool_k = 0, pool_s = 0;                      // Max/AvgPool2d
  std::size_t target_hw = 0;                               // AdaptiveAvgPool2d

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh,
                          std::size_t kw, std::size_t stride = 1,
                          std::size_t pad = 0);
  static LayerSpec relu();
  static LayerSpec max_pool(std::size_t k, std::size_t s);
  static LayerSpec avg_pool(std::size_t k, std::size_t s);
  static LayerSpec adaptive_avg_pool(std::size_t target_hw);
  static LayerSpec flatten();
  static LayerSpec softmax_cross_entropy();
};

std::string layer_type_name(LayerType t);

class Layer {
 public:
  explicit Layer(std::size_t index) : index_(index) {}
  virtual ~Layer() = default;

  virtual LayerType type() const = 0;
  virtual std::string describe() const = 0;

  // Validates `in` and returns the output shape; throws EngineError with the
  // layer index on mismatch.
  virtual std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const = 0;

  virtual Tensor forward(const Tensor& x) = 0;
  // Consumes the cache from the matching forward; throws if absent.
  virtual Tensor backward(const Tensor& gy) = 0;

  virtual bool trainable() const { return false; }
  virtual Tensor* weight() { return nullptr; }
  virtual Tensor* bias() { return nullptr; }
  virtual const Tensor* weight_grad() const { return nullptr; }
  virtual const Tensor* bias_grad() const { return nullptr; }
  virtual void init_params(Xoshiro256&) {}

  std::size_t index() const { return index_; }
  bool has_cache() const { return has_cache_; }

 protected:
  [[noreturn]] void fail(const std::string& msg) const;
  void require_cache() const;

  std::size_t index_;
  bool has_cache_ = false;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, std::size_t index);

// Softmax + cross-entropy loss head over (B, C) logits and integer labels.
class SoftmaxCrossEntropy {
 public:
  double forward(const Tensor& logits, std::span<const int> labels);
  Tensor backward();  // gradient w.r.t. logits, mean-reduced over the batch

 private:
  Tensor probs_;
  std::vector<int> labels_;
  bool has_cache_ = false;
};

}  // namespace gradpred
