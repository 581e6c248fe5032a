#include "gradpred/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gradpred/errors.hpp"

namespace gradpred {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw EngineError("tensor dimension must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw EngineError("tensor shape " + shape_str() + " does not match " +
                      std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (product(shape) != data_.size()) {
    throw EngineError("cannot reshape " + shape_str() + " to " +
                      shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw EngineError("index rank " + std::to_string(idx.size()) +
                      " does not match tensor rank " +
                      std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  std::size_t d = 0;
  for (std::size_t i : idx) {
    if (i >= shape_[d]) {
      throw EngineError("index " + std::to_string(i) + " out of range for dim " +
                        std::to_string(d) + " of " + shape_str());
    }
    off = off * shape_[d] + i;
    ++d;
  }
  return off;
}

std::string Tensor::shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

void ensure_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) {
    throw EngineError("non-finite value produced by " + what);
  }
}

void ensure_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw EngineError(what + ": shape mismatch " + a.shape_str() + " vs " +
                      b.shape_str());
  }
}

}  // namespace gradpred
