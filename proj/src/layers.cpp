#include "gradpred/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradpred/errors.hpp"
#include "gradpred/kernels.hpp"

namespace gradpred {

namespace {
std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t s,
                         std::size_t p) {
  const std::size_t padded = in + 2 * p;
  if (padded < k) return 0;
  return (padded - k) / s + 1;
}

std::size_t pool_out_dim(std::size_t in, std::size_t k, std::size_t s) {
  if (in < k) return 0;
  return (in - k) / s + 1;
}
}  // namespace

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.type = LayerType::Dense;
  s.in_features = in;
  s.out_features = out;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch,
                            std::size_t kh, std::size_t kw, std::size_t stride,
                            std::size_t pad) {
  LayerSpec s;
  s.type = LayerType::Conv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.type = LayerType::ReLU;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t k, std::size_t st) {
  LayerSpec s;
  s.type = LayerType::MaxPool2d;
  s.pool_k = k;
  s.pool_s = st;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t k, std::size_t st) {
  LayerSpec s;
  s.type = LayerType::AvgPool2d;
  s.pool_k = k;
  s.pool_s = st;
  return s;
}

LayerSpec LayerSpec::adaptive_avg_pool(std::size_t target_hw) {
  LayerSpec s;
  s.type = LayerType::AdaptiveAvgPool2d;
  s.target_hw = target_hw;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.type = LayerType::Flatten;
  return s;
}

LayerSpec LayerSpec::softmax_cross_entropy() {
  LayerSpec s;
  s.type = LayerType::SoftmaxCrossEntropy;
  return s;
}

std::string layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::Dense: return "dense";
    case LayerType::Conv2d: return "conv2d";
    case LayerType::ReLU: return "relu";
    case LayerType::MaxPool2d: return "max_pool2d";
    case LayerType::AvgPool2d: return "avg_pool2d";
    case LayerType::AdaptiveAvgPool2d: return "adaptive_avg_pool2d";
    case LayerType::Flatten: return "flatten";
    case LayerType::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "?";
}

void Layer::fail(const std::string& msg) const {
  throw EngineError("layer " + std::to_string(index_) + " (" + describe() +
                    "): " + msg);
}

void Layer::require_cache() const {
  if (!has_cache_) fail("backward called without a matching forward");
}

namespace {

class DenseLayer final : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, std::size_t index)
      : Layer(index),
        in_(spec.in_features),
        out_(spec.out_features),
        w_({out_, in_}),
        b_({out_}),
        gw_({out_, in_}),
        gb_({out_}) {
    if (in_ == 0 || out_ == 0) fail("dense features must be positive");
  }

  LayerType type() const override { return LayerType::Dense; }

  std::string describe() const override {
    return "dense " + std::to_string(in_) + "->" + std::to_string(out_);
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 2 || in[1] != in_) {
      fail("expected input (B," + std::to_string(in_) + "), got " +
           Tensor::shape_str(in));
    }
    return {in[0], out_};
  }

  void init_params(Xoshiro256& rng) override {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    for (double& v : w_.data()) v = rng.uniform(-bound, bound);
    for (double& v : b_.data()) v = rng.uniform(-bound, bound);
  }

  Tensor forward(const Tensor& x) override {
    Tensor y(output_shape(x.shape()));
    const std::size_t batch = x.dim(0);
    const auto& k = kernels::active();
    k.matmul_nt(x.ptr(), w_.ptr(), y.ptr(), batch, in_, out_);
    for (std::size_t b = 0; b < batch; ++b) {
      k.add(y.ptr() + b * out_, b_.ptr(), y.ptr() + b * out_, out_);
    }
    x_ = x;
    has_cache_ = true;
    ensure_finite(y, describe() + " forward");
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    const std::size_t batch = x_.dim(0);
    if (gy.rank() != 2 || gy.dim(0) != batch || gy.dim(1) != out_) {
      fail("upstream gradient shape " + gy.shape_str() + " does not match (B," +
           std::to_string(out_) + ")");
    }
    const auto& k = kernels::active();
    gw_.fill(0.0);
    gb_.fill(0.0);
    k.matmul_tn_acc(gy.ptr(), x_.ptr(), gw_.ptr(), batch, out_, in_);
    for (std::size_t b = 0; b < batch; ++b) {
      k.axpy(1.0, gy.ptr() + b * out_, gb_.ptr(), out_);
    }
    Tensor gx({batch, in_});
    k.matmul_nn(gy.ptr(), w_.ptr(), gx.ptr(), batch, out_, in_);
    ensure_finite(gx, describe() + " backward");
    return gx;
  }

  bool trainable() const override { return true; }
  Tensor* weight() override { return &w_; }
  Tensor* bias() override { return &b_; }
  const Tensor* weight_grad() const override { return &gw_; }
  const Tensor* bias_grad() const override { return &gb_; }

 private:
  std::size_t in_, out_;
  Tensor w_, b_, gw_, gb_;
  Tensor x_;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(const LayerSpec& spec, std::size_t index)
      : Layer(index),
        ic_(spec.in_channels),
        oc_(spec.out_channels),
        kh_(spec.kernel_h),
        kw_(spec.kernel_w),
        stride_(spec.stride),
        pad_(spec.pad),
        w_({oc_, ic_, kh_, kw_}),
        b_({oc_}),
        gw_({oc_, ic_, kh_, kw_}),
        gb_({oc_}) {
    if (ic_ == 0 || oc_ == 0 || kh_ == 0 || kw_ == 0 || stride_ == 0)
      fail("conv2d parameters must be positive");
  }

  LayerType type() const override { return LayerType::Conv2d; }

  std::string describe() const override {
    std::ostringstream os;
    os << "conv2d " << ic_ << "->" << oc_ << " " << kh_ << "x" << kw_ << " s"
       << stride_ << " p" << pad_;
    return os.str();
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 4 || in[1] != ic_) {
      fail("expected input (B," + std::to_string(ic_) + ",H,W), got " +
           Tensor::shape_str(in));
    }
    const std::size_t oh = conv_out_dim(in[2], kh_, stride_, pad_);
    const std::size_t ow = conv_out_dim(in[3], kw_, stride_, pad_);
    if (oh == 0 || ow == 0) {
      fail("input " + Tensor::shape_str(in) + " too small for kernel");
    }
    return {in[0], oc_, oh, ow};
  }

  void init_params(Xoshiro256& rng) override {
    const double fan_in = static_cast<double>(ic_ * kh_ * kw_);
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& v : w_.data()) v = rng.uniform(-bound, bound);
    for (double& v : b_.data()) v = rng.uniform(-bound, bound);
  }

  Tensor forward(const Tensor& x) override {
    const auto out_shape = output_shape(x.shape());
    const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = out_shape[2], ow = out_shape[3];
    const std::size_t ckk = ic_ * kh_ * kw_;
    const std::size_t rows = batch * oh * ow;

    cols_ = Tensor({rows, ckk});
    im2col(x, cols_, batch, h, w, oh, ow);

    Tensor y_mat({rows, oc_});
    const auto& k = kernels::active();
    k.matmul_nt(cols_.ptr(), w_.ptr(), y_mat.ptr(), rows, ckk, oc_);

    Tensor y(out_shape);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < oc_; ++o) {
        const double bias = b_[o];
        for (std::size_t px = 0; px < oh * ow; ++px) {
          y[((b * oc_ + o) * oh * ow) + px] =
              y_mat[(b * oh * ow + px) * oc_ + o] + bias;
        }
      }
    }
    in_shape_ = x.shape();
    has_cache_ = true;
    ensure_finite(y, describe() + " forward");
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    const std::size_t batch = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = gy.dim(2), ow = gy.dim(3);
    const std::size_t ckk = ic_ * kh_ * kw_;
    const std::size_t rows = batch * oh * ow;
    if (gy.rank() != 4 || gy.dim(0) != batch || gy.dim(1) != oc_) {
      fail("upstream gradient shape " + gy.shape_str() + " unexpected");
    }

    // (B,OC,OH,OW) -> (rows, OC)
    Tensor gy_mat({rows, oc_});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < oc_; ++o) {
        for (std::size_t px = 0; px < oh * ow; ++px) {
          gy_mat[(b * oh * ow + px) * oc_ + o] =
              gy[((b * oc_ + o) * oh * ow) + px];
        }
      }
    }

    const auto& k = kernels::active();
    gw_.fill(0.0);
    gb_.fill(0.0);
    k.matmul_tn_acc(gy_mat.ptr(), cols_.ptr(), gw_.ptr(), rows, oc_, ckk);
    for (std::size_t r = 0; r < rows; ++r) {
      k.axpy(1.0, gy_mat.ptr() + r * oc_, gb_.ptr(), oc_);
    }

    Tensor dcols({rows, ckk});
    k.matmul_nn(gy_mat.ptr(), w_.ptr(), dcols.ptr(), rows, oc_, ckk);

    Tensor gx({batch, ic_, h, w});
    col2im(dcols, gx, batch, h, w, oh, ow);
    ensure_finite(gx, describe() + " backward");
    return gx;
  }

  bool trainable() const override { return true; }
  Tensor* weight() override { return &w_; }
  Tensor* bias() override { return &b_; }
  const Tensor* weight_grad() const override { return &gw_; }
  const Tensor* bias_grad() const override { return &gb_; }

 private:
  void im2col(const Tensor& x, Tensor& cols, std::size_t batch, std::size_t h,
              std::size_t w, std::size_t oh, std::size_t ow) const {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t y0 = 0; y0 < oh; ++y0) {
        for (std::size_t x0 = 0; x0 < ow; ++x0) {
          const std::size_t row = (b * oh + y0) * ow + x0;
          double* dst = cols.ptr() + row * ic_ * kh_ * kw_;
          for (std::size_t c = 0; c < ic_; ++c) {
            for (std::size_t ki = 0; ki < kh_; ++ki) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(y0 * stride_ + ki) -
                  static_cast<std::ptrdiff_t>(pad_);
              for (std::size_t kj = 0; kj < kw_; ++kj) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(x0 * stride_ + kj) -
                    static_cast<std::ptrdiff_t>(pad_);
                double v = 0.0;
                if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                    ix < static_cast<std::ptrdiff_t>(w)) {
                  v = x[((b * ic_ + c) * h + iy) * w + ix];
                }
                *dst++ = v;
              }
            }
          }
        }
      }
    }
  }

  void col2im(const Tensor& dcols, Tensor& gx, std::size_t batch, std::size_t h,
              std::size_t w, std::size_t oh, std::size_t ow) const {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t y0 = 0; y0 < oh; ++y0) {
        for (std::size_t x0 = 0; x0 < ow; ++x0) {
          const std::size_t row = (b * oh + y0) * ow + x0;
          const double* src = dcols.ptr() + row * ic_ * kh_ * kw_;
          for (std::size_t c = 0; c < ic_; ++c) {
            for (std::size_t ki = 0; ki < kh_; ++ki) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(y0 * stride_ + ki) -
                  static_cast<std::ptrdiff_t>(pad_);
              for (std::size_t kj = 0; kj < kw_; ++kj) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(x0 * stride_ + kj) -
                    static_cast<std::ptrdiff_t>(pad_);
                const double v = *src++;
                if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                    ix < static_cast<std::ptrdiff_t>(w)) {
                  gx[((b * ic_ + c) * h + iy) * w + ix] += v;
                }
              }
            }
          }
        }
      }
    }
  }

  std::size_t ic_, oc_, kh_, kw_, stride_, pad_;
  Tensor w_, b_, gw_, gb_;
  Tensor cols_;
  std::vector<std::size_t> in_shape_;
};

class ReluLayer final : public Layer {
 public:
  using Layer::Layer;

  LayerType type() const override { return LayerType::ReLU; }
  std::string describe() const override { return "relu"; }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }

  Tensor forward(const Tensor& x) override {
    Tensor y(x.shape());
    kernels::active().relu_fw(x.ptr(), y.ptr(), x.numel());
    x_ = x;
    has_cache_ = true;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    ensure_same_shape(gy, x_, "relu backward");
    Tensor gx(x_.shape());
    kernels::active().relu_bw(x_.ptr(), gy.ptr(), gx.ptr(), x_.numel());
    return gx;
  }

 private:
  Tensor x_;
};

class MaxPoolLayer final : public Layer {
 public:
  MaxPoolLayer(const LayerSpec& spec, std::size_t index)
      : Layer(index), k_(spec.pool_k), s_(spec.pool_s) {
    if (k_ == 0 || s_ == 0) fail("pool parameters must be positive");
  }

  LayerType type() const override { return LayerType::MaxPool2d; }
  std::string describe() const override {
    return "max_pool2d k" + std::to_string(k_) + " s" + std::to_string(s_);
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 4) fail("expected rank-4 input, got " + Tensor::shape_str(in));
    const std::size_t oh = pool_out_dim(in[2], k_, s_);
    const std::size_t ow = pool_out_dim(in[3], k_, s_);
    if (oh == 0 || ow == 0) fail("input too small for pool window");
    return {in[0], in[1], oh, ow};
  }

  Tensor forward(const Tensor& x) override {
    const auto os = output_shape(x.shape());
    Tensor y(os);
    argmax_.assign(y.numel(), 0);
    const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = os[2], ow = os[3];
    for (std::size_t p = 0; p < bc; ++p) {
      const double* xin = x.ptr() + p * h * w;
      for (std::size_t y0 = 0; y0 < oh; ++y0) {
        for (std::size_t x0 = 0; x0 < ow; ++x0) {
          double best = xin[(y0 * s_) * w + (x0 * s_)];
          std::size_t best_ix = (y0 * s_) * w + (x0 * s_);
          for (std::size_t ki = 0; ki < k_; ++ki) {
            for (std::size_t kj = 0; kj < k_; ++kj) {
              const std::size_t ix = (y0 * s_ + ki) * w + (x0 * s_ + kj);
              if (xin[ix] > best) {
                best = xin[ix];
                best_ix = ix;
              }
            }
          }
          const std::size_t oix = p * oh * ow + y0 * ow + x0;
          y[oix] = best;
          argmax_[oix] = p * h * w + best_ix;
        }
      }
    }
    in_shape_ = x.shape();
    has_cache_ = true;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    if (gy.numel() != argmax_.size()) {
      fail("upstream gradient shape " + gy.shape_str() + " unexpected");
    }
    Tensor gx(in_shape_);
    for (std::size_t i = 0; i < gy.numel(); ++i) gx[argmax_[i]] += gy[i];
    return gx;
  }

 private:
  std::size_t k_, s_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

class AvgPoolLayer final : public Layer {
 public:
  AvgPoolLayer(const LayerSpec& spec, std::size_t index)
      : Layer(index), k_(spec.pool_k), s_(spec.pool_s) {
    if (k_ == 0 || s_ == 0) fail("pool parameters must be positive");
  }

  LayerType type() const override { return LayerType::AvgPool2d; }
  std::string describe() const override {
    return "avg_pool2d k" + std::to_string(k_) + " s" + std::to_string(s_);
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 4) fail("expected rank-4 input, got " + Tensor::shape_str(in));
    const std::size_t oh = pool_out_dim(in[2], k_, s_);
    const std::size_t ow = pool_out_dim(in[3], k_, s_);
    if (oh == 0 || ow == 0) fail("input too small for pool window");
    return {in[0], in[1], oh, ow};
  }

  Tensor forward(const Tensor& x) override {
    const auto os = output_shape(x.shape());
    Tensor y(os);
    const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = os[2], ow = os[3];
    const double inv = 1.0 / static_cast<double>(k_ * k_);
    for (std::size_t p = 0; p < bc; ++p) {
      const double* xin = x.ptr() + p * h * w;
      for (std::size_t y0 = 0; y0 < oh; ++y0) {
        for (std::size_t x0 = 0; x0 < ow; ++x0) {
          double acc = 0.0;
          for (std::size_t ki = 0; ki < k_; ++ki) {
            for (std::size_t kj = 0; kj < k_; ++kj) {
              acc += xin[(y0 * s_ + ki) * w + (x0 * s_ + kj)];
            }
          }
          y[p * oh * ow + y0 * ow + x0] = acc * inv;
        }
      }
    }
    in_shape_ = x.shape();
    has_cache_ = true;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    Tensor gx(in_shape_);
    const std::size_t bc = in_shape_[0] * in_shape_[1];
    const std::size_t h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = gy.dim(2), ow = gy.dim(3);
    const double inv = 1.0 / static_cast<double>(k_ * k_);
    for (std::size_t p = 0; p < bc; ++p) {
      double* gout = gx.ptr() + p * h * w;
      for (std::size_t y0 = 0; y0 < oh; ++y0) {
        for (std::size_t x0 = 0; x0 < ow; ++x0) {
          const double v = gy[p * oh * ow + y0 * ow + x0] * inv;
          for (std::size_t ki = 0; ki < k_; ++ki) {
            for (std::size_t kj = 0; kj < k_; ++kj) {
              gout[(y0 * s_ + ki) * w + (x0 * s_ + kj)] += v;
            }
          }
        }
      }
    }
    return gx;
  }

 private:
  std::size_t k_, s_;
  std::vector<std::size_t> in_shape_;
};

// Pools any (B,C,H,W) to (B,C,S,S) with the usual floor/ceil window split;
// upsamples by replication when H or W < S.
class AdaptiveAvgPoolLayer final : public Layer {
 public:
  AdaptiveAvgPoolLayer(const LayerSpec& spec, std::size_t index)
      : Layer(index), s_(spec.target_hw) {
    if (s_ == 0) fail("target size must be positive");
  }

  LayerType type() const override { return LayerType::AdaptiveAvgPool2d; }
  std::string describe() const override {
    return "adaptive_avg_pool2d " + std::to_string(s_) + "x" + std::to_string(s_);
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.size() != 4) fail("expected rank-4 input, got " + Tensor::shape_str(in));
    return {in[0], in[1], s_, s_};
  }

  Tensor forward(const Tensor& x) override {
    const auto os = output_shape(x.shape());
    Tensor y(os);
    const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    for (std::size_t p = 0; p < bc; ++p) {
      const double* xin = x.ptr() + p * h * w;
      for (std::size_t i = 0; i < s_; ++i) {
        const auto [h0, h1] = window(i, h);
        for (std::size_t j = 0; j < s_; ++j) {
          const auto [w0, w1] = window(j, w);
          double acc = 0.0;
          for (std::size_t yy = h0; yy < h1; ++yy) {
            for (std::size_t xx = w0; xx < w1; ++xx) acc += xin[yy * w + xx];
          }
          y[p * s_ * s_ + i * s_ + j] =
              acc / static_cast<double>((h1 - h0) * (w1 - w0));
        }
      }
    }
    in_shape_ = x.shape();
    has_cache_ = true;
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    Tensor gx(in_shape_);
    const std::size_t bc = in_shape_[0] * in_shape_[1];
    const std::size_t h = in_shape_[2], w = in_shape_[3];
    for (std::size_t p = 0; p < bc; ++p) {
      double* gout = gx.ptr() + p * h * w;
      for (std::size_t i = 0; i < s_; ++i) {
        const auto [h0, h1] = window(i, h);
        for (std::size_t j = 0; j < s_; ++j) {
          const auto [w0, w1] = window(j, w);
          const double v = gy[p * s_ * s_ + i * s_ + j] /
                           static_cast<double>((h1 - h0) * (w1 - w0));
          for (std::size_t yy = h0; yy < h1; ++yy) {
            for (std::size_t xx = w0; xx < w1; ++xx) gout[yy * w + xx] += v;
          }
        }
      }
    }
    return gx;
  }

 private:
  std::pair<std::size_t, std::size_t> window(std::size_t i, std::size_t in) const {
    const std::size_t lo = (i * in) / s_;
    const std::size_t hi = ((i + 1) * in + s_ - 1) / s_;
    return {lo, std::max(hi, lo + 1)};
  }

  std::size_t s_;
  std::vector<std::size_t> in_shape_;
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;

  LayerType type() const override { return LayerType::Flatten; }
  std::string describe() const override { return "flatten"; }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (in.empty()) fail("flatten needs at least rank 1");
    std::size_t rest = 1;
    for (std::size_t i = 1; i < in.size(); ++i) rest *= in[i];
    return {in[0], rest};
  }

  Tensor forward(const Tensor& x) override {
    in_shape_ = x.shape();
    has_cache_ = true;
    return x.reshaped(output_shape(x.shape()));
  }

  Tensor backward(const Tensor& gy) override {
    require_cache();
    has_cache_ = false;
    return gy.reshaped(in_shape_);
  }

 private:
  std::vector<std::size_t> in_shape_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, std::size_t index) {
  switch (spec.type) {
    case LayerType::Dense:
      return std::make_unique<DenseLayer>(spec, index);
    case LayerType::Conv2d:
      return std::make_unique<Conv2dLayer>(spec, index);
    case LayerType::ReLU:
      return std::make_unique<ReluLayer>(index);
    case LayerType::MaxPool2d:
      return std::make_unique<MaxPoolLayer>(spec, index);
    case LayerType::AvgPool2d:
      return std::make_unique<AvgPoolLayer>(spec, index);
    case LayerType::AdaptiveAvgPool2d:
      return std::make_unique<AdaptiveAvgPoolLayer>(spec, index);
    case LayerType::Flatten:
      return std::make_unique<FlattenLayer>(index);
    case LayerType::SoftmaxCrossEntropy:
      throw EngineError("softmax_cross_entropy is the loss head, not a layer");
  }
  throw EngineError("unknown layer type");
}

double SoftmaxCrossEntropy::forward(const Tensor& logits,
                                    std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw EngineError("loss head expects (B,C) logits, got " +
                      logits.shape_str());
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw EngineError("label count " + std::to_string(labels.size()) +
                      " does not match batch " + std::to_string(batch));
  }
  probs_ = Tensor({batch, classes});
  labels_.assign(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = logits.ptr() + b * classes;
    double m = row[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - m);
    const int label = labels_[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw EngineError("label " + std::to_string(label) + " out of range");
    }
    for (std::size_t c = 0; c < classes; ++c) {
      probs_[b * classes + c] = std::exp(row[c] - m) / denom;
    }
    loss -= (row[label] - m) - std::log(denom);
  }
  loss /= static_cast<double>(batch);
  if (!std::isfinite(loss)) throw EngineError("non-finite loss");
  has_cache_ = true;
  return loss;
}

Tensor SoftmaxCrossEntropy::backward() {
  if (!has_cache_) {
    throw EngineError("loss backward called without a matching forward");
  }
  has_cache_ = false;
  const std::size_t batch = probs_.dim(0), classes = probs_.dim(1);
  Tensor g(probs_.shape());
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < classes; ++c) {
      double v = probs_[b * classes + c];
      if (static_cast<std::size_t>(labels_[b]) == c) v -= 1.0;
      g[b * classes + c] = v * inv;
    }
  }
  return g;
}

}  // namespace gradpred
