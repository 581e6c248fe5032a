#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gradpred {

// Dense row-major tensor of 64-bit floats. Values are plain; all shape
// bookkeeping is explicit and there is no broadcasting.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  template <typename... Ix>
  double& at(Ix... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Ix>
  double at(Ix... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Same data, new shape; element counts must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  void fill(double value);
  bool all_finite() const;

  std::string shape_str() const;
  static std::string shape_str(const std::vector<std::size_t>& shape);

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws EngineError naming `what` if any element is NaN/Inf. Engine
// operations call this on their outputs.
void ensure_finite(const Tensor& t, const std::string& what);

void ensure_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

}  // namespace gradpred
