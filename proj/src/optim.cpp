#include "gradpred/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradpred/errors.hpp"
#include "gradpred/kernels.hpp"

namespace gradpred {

OptimizerConfig OptimizerConfig::sgd_momentum(double lr, double momentum) {
  OptimizerConfig c;
  c.kind = OptimizerKind::SgdMomentum;
  c.learning_rate = lr;
  c.momentum = momentum;
  return c;
}

OptimizerConfig OptimizerConfig::adam(double lr, double beta1, double beta2,
                                      double eps) {
  OptimizerConfig c;
  c.kind = OptimizerKind::Adam;
  c.learning_rate = lr;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.eps = eps;
  return c;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must be in [0,1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("adam betas must be in [0,1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be positive");
}

namespace {

class SgdMomentumOpt final : public Optimizer {
 public:
  explicit SgdMomentumOpt(const OptimizerConfig& cfg)
      : Optimizer(cfg.learning_rate), mu_(cfg.momentum) {}

  void step(std::size_t slot, Tensor& param, const Tensor& grad) override {
    ensure_same_shape(param, grad, "optimizer step");
    if (slot >= velocity_.size()) velocity_.resize(slot + 1);
    Tensor& v = velocity_[slot];
    if (v.numel() == 0) {
      v = Tensor::zeros_like(param);
    } else {
      ensure_same_shape(v, param, "optimizer state slot");
    }
    kernels::active().sgd_momentum(param.ptr(), v.ptr(), grad.ptr(), lr_, mu_,
                                   param.numel());
    ensure_finite(param, "sgd update");
  }

 private:
  double mu_;
  std::vector<Tensor> velocity_;
};

class AdamOpt final : public Optimizer {
 public:
  explicit AdamOpt(const OptimizerConfig& cfg)
      : Optimizer(cfg.learning_rate),
        b1_(cfg.beta1),
        b2_(cfg.beta2),
        eps_(cfg.eps) {}

  void step(std::size_t slot, Tensor& param, const Tensor& grad) override {
    ensure_same_shape(param, grad, "optimizer step");
    if (slot >= state_.size()) state_.resize(slot + 1);
    auto& s = state_[slot];
    if (s.m.numel() == 0) {
      s.m = Tensor::zeros_like(param);
      s.v = Tensor::zeros_like(param);
      s.t = 0;
    } else {
      ensure_same_shape(s.m, param, "optimizer state slot");
    }
    ++s.t;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(s.t));
    kernels::active().adam(param.ptr(), s.m.ptr(), s.v.ptr(), grad.ptr(), lr_,
                           b1_, b2_, eps_, bc1, bc2, param.numel());
    ensure_finite(param, "adam update");
  }

 private:
  struct Slot {
    Tensor m, v;
    long t = 0;
  };
  double b1_, b2_, eps_;
  std::vector<Slot> state_;
};

class ReduceOnPlateau final : public LrScheduler {
 public:
  explicit ReduceOnPlateau(const LrSchedulerConfig& cfg)
      : patience_(cfg.patience), factor_(cfg.factor) {}

  double on_epoch_end(int, double metric, double current_lr) override {
    if (metric < best_) {
      best_ = metric;
      bad_epochs_ = 0;
      return current_lr;
    }
    ++bad_epochs_;
    if (bad_epochs_ > patience_) {
      bad_epochs_ = 0;
      return current_lr * factor_;
    }
    return current_lr;
  }

 private:
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

class MultiStep final : public LrScheduler {
 public:
  explicit MultiStep(const LrSchedulerConfig& cfg)
      : milestones_(cfg.milestones), gamma_(cfg.gamma) {
    std::sort(milestones_.begin(), milestones_.end());
  }

  double on_epoch_end(int epoch, double, double current_lr) override {
    double lr = current_lr;
    for (int m : milestones_) {
      if (m == epoch) lr *= gamma_;
    }
    return lr;
  }

 private:
  std::vector<int> milestones_;
  double gamma_;
};

class NoopScheduler final : public LrScheduler {
 public:
  double on_epoch_end(int, double, double current_lr) override {
    return current_lr;
  }
};

}  // namespace

std::unique_ptr<Optimizer> Optimizer::make(const OptimizerConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OptimizerKind::SgdMomentum)
    return std::make_unique<SgdMomentumOpt>(cfg);
  return std::make_unique<AdamOpt>(cfg);
}

void LrSchedulerConfig::validate() const {
  if (kind == LrSchedulerKind::ReduceOnPlateau) {
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (!(factor > 0.0) || factor > 1.0)
      throw ConfigError("factor must be in (0,1]");
  } else if (kind == LrSchedulerKind::MultiStep) {
    if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
  }
}

std::unique_ptr<LrScheduler> LrScheduler::make(const LrSchedulerConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case LrSchedulerKind::ReduceOnPlateau:
      return std::make_unique<ReduceOnPlateau>(cfg);
    case LrSchedulerKind::MultiStep:
      return std::make_unique<MultiStep>(cfg);
    case LrSchedulerKind::None:
      break;
  }
  return std::make_unique<NoopScheduler>();
}

}  // namespace gradpred
