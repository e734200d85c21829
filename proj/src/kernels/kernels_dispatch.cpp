#include <stdexcept>

#include "tp/kernels.hpp"

namespace tp::kernels {

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif

namespace {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() { return avx2_supported() ? Backend::kAvx2 : Backend::kScalar; }

Backend& current() {
  static Backend b = detect();
  return b;
}

}  // namespace

Backend active_backend() { return current(); }

const char* backend_name() {
  return current() == Backend::kAvx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported())
    throw std::runtime_error("avx2 backend not supported on this CPU");
  current() = b;
}

void reset_backend() { current() = detect(); }

const Ops& ops() {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::kAvx2) return avx2_ops();
#endif
  return scalar_ops();
}

}  // namespace tp::kernels
