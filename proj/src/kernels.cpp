#include "gradpred/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace gradpred::kernels {

const KernelTable& scalar_table();
#if GRADPRED_HAVE_AVX2
const KernelTable& avx2_table();
#endif

bool avx2_available() {
#if GRADPRED_HAVE_AVX2
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend pick_initial() {
  if (const char* env = std::getenv("GRADPRED_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2") {
      if (!avx2_available())
        throw std::runtime_error("GRADPRED_KERNELS=avx2 but AVX2 is unavailable");
      return Backend::Avx2;
    }
    throw std::runtime_error("unknown GRADPRED_KERNELS value: " + v);
  }
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

Backend& current() {
  static Backend b = pick_initial();
  return b;
}

}  // namespace

const KernelTable& table(Backend b) {
#if GRADPRED_HAVE_AVX2
  if (b == Backend::Avx2) return avx2_table();
#else
  if (b == Backend::Avx2)
    throw std::runtime_error("AVX2 kernels not compiled in");
#endif
  return scalar_table();
}

const KernelTable& active() { return table(current()); }

Backend backend() { return current(); }

std::string backend_name() { return active().name; }

void force_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_available())
    throw std::runtime_error("cannot force AVX2 backend: unavailable");
  current() = b;
}

}  // namespace gradpred::kernels
