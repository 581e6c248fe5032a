#pragma once

#include <cstddef>
#include <string>

namespace gradpred::kernels {

// The arithmetic inner loops of the engine live behind this table. A scalar
// reference implementation always exists; an AVX2 variant is selected at
// runtime when the CPU supports it. Elementwise kernels are bit-identical
// across backends; reduction kernels (dot/sum and matmul_nt, which reduces
// per output element) may differ by rounding and are equivalence-tested to
// tight tolerances instead.
struct KernelTable {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);

  void (*relu_fw)(const double* x, double* y, std::size_t n);
  // gx = gy where x > 0, else 0
  void (*relu_bw)(const double* x, const double* gy, double* gx, std::size_t n);

  // C[m,n] = A[m,k] * B[k,n]           (C overwritten)
  void (*matmul_nn)(const double* A, const double* B, double* C, std::size_t m,
                    std::size_t k, std::size_t n);
  // C[m,n] = A[m,k] * B[n,k]^T         (C overwritten)
  void (*matmul_nt)(const double* A, const double* B, double* C, std::size_t m,
                    std::size_t k, std::size_t n);
  // C[p,n] += A[m,p]^T * B[m,n]        (accumulating)
  void (*matmul_tn_acc)(const double* A, const double* B, double* C,
                        std::size_t m, std::size_t p, std::size_t n);

  // v = mu*v + g; p -= lr*v
  void (*sgd_momentum)(double* p, double* v, const double* g, double lr,
                       double mu, std::size_t n);
  // Bias-corrected Adam; bc1 = 1-beta1^t, bc2 = 1-beta2^t precomputed.
  void (*adam)(double* p, double* m, double* v, const double* g, double lr,
               double beta1, double beta2, double eps, double bc1, double bc2,
               std::size_t n);
};

enum class Backend { Scalar, Avx2 };

// Active table. Chosen once: AVX2 if compiled in and the CPU reports it,
// unless the GRADPRED_KERNELS env var ("scalar"/"avx2") overrides.
const KernelTable& active();
Backend backend();
std::string backend_name();

// For equivalence tests and benchmarks.
const KernelTable& table(Backend b);
bool avx2_available();
void force_backend(Backend b);  // throws if unavailable

}  // namespace gradpred::kernels
