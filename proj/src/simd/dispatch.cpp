#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "bysgnn/simd.hpp"

namespace bysgnn::simd {

#if defined(BYSGNN_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

bool cpu_supports_avx2() {
#if defined(BYSGNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
#if defined(BYSGNN_HAVE_AVX2)
  if (cpu_supports_avx2()) return &kAvx2Table;
#endif
  return nullptr;
}

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("BYSGNN_SIMD")) {
    if (std::string(env) == "scalar") return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void select_backend(Backend backend) {
  if (backend == Backend::scalar) {
    active().store(&scalar_kernels());
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) throw std::runtime_error("AVX2 kernels are not available on this build or CPU");
  active().store(t);
}

Backend active_backend() { return kernels().backend; }

std::string_view backend_name(Backend backend) { return backend == Backend::avx2 ? "avx2" : "scalar"; }

}  // namespace bysgnn::simd
