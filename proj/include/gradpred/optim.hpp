#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gradpred/tensor.hpp"

namespace gradpred {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SgdMomentum;
  double learning_rate = 0.001;
  double momentum = 0.9;       // SGD
  double beta1 = 0.9;          // Adam
  double beta2 = 0.999;        // Adam
  double eps = 1e-8;           // Adam

  static OptimizerConfig sgd_momentum(double lr = 0.001, double momentum = 0.9);
  static OptimizerConfig adam(double lr = 0.0001, double beta1 = 0.9,
                              double beta2 = 0.999, double eps = 1e-8);
  void validate() const;
};

// Per-parameter-tensor state is addressed by slot index; the first step on a
// slot fixes its shape and later mismatches are an error.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::size_t slot, Tensor& param, const Tensor& grad) = 0;
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  static std::unique_ptr<Optimizer> make(const OptimizerConfig& cfg);

 protected:
  explicit Optimizer(double lr) : lr_(lr) {}
  double lr_;
};

enum class LrSchedulerKind { None, ReduceOnPlateau, MultiStep };

struct LrSchedulerConfig {
  LrSchedulerKind kind = LrSchedulerKind::None;
  int patience = 10;                // ReduceOnPlateau
  double factor = 0.1;              // ReduceOnPlateau
  std::vector<int> milestones;      // MultiStep
  double gamma = 0.1;               // MultiStep
  void validate() const;
};

// Epoch-driven learning-rate policy; the returned rate is non-increasing.
class LrScheduler {
 public:
  virtual ~LrScheduler() = default;
  // `metric` is the monitored quantity (lower is better); ignored by MultiStep.
  virtual double on_epoch_end(int epoch, double metric, double current_lr) = 0;

  static std::unique_ptr<LrScheduler> make(const LrSchedulerConfig& cfg);
};

}  // namespace gradpred
