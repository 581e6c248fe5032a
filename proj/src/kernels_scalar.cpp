#include <cmath>
#include <cstddef>

#include "gradpred/kernels.hpp"

// Reference kernels. Plain loops, no manual unrolling: these define the
// semantics the SIMD variants are tested against.

namespace gradpred::kernels {
namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy_s(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_s(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_s(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void relu_fw_s(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bw_s(const double* x, const double* gy, double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void matmul_nn_s(const double* A, const double* B, double* C, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m * n; ++i) C[i] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double a = A[i * k + l];
      const double* brow = B + l * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

void matmul_nt_s(const double* A, const double* B, double* C, std::size_t m,
                 std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      C[i * n + j] = dot_s(A + i * k, B + j * k, k);
    }
  }
}

void matmul_tn_acc_s(const double* A, const double* B, double* C, std::size_t m,
                     std::size_t p, std::size_t n) {
  for (std::size_t l = 0; l < m; ++l) {
    const double* brow = B + l * n;
    for (std::size_t i = 0; i < p; ++i) {
      const double a = A[l * p + i];
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

void sgd_momentum_s(double* p, double* v, const double* g, double lr, double mu,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

void adam_s(double* p, double* m, double* v, const double* g, double lr,
            double beta1, double beta2, double eps, double bc1, double bc2,
            std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",    add_s,    sub_s,          mul_s,          scale_s,
      axpy_s,      dot_s,    sum_s,          relu_fw_s,      relu_bw_s,
      matmul_nn_s, matmul_nt_s, matmul_tn_acc_s, sgd_momentum_s, adam_s,
  };
  return t;
}

}  // namespace gradpred::kernels
