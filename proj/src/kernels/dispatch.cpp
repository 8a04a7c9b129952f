#include <cstdlib>
#include <string>

#include "abidnn/errors.hpp"
#include "abidnn/kernels.hpp"

namespace abidnn {

#ifdef ABIDNN_HAVE_AVX2
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#if defined(ABIDNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_kernels_impl() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels_by_name(std::string_view name) {
  if (name == "scalar") return scalar_kernels();
  if (name == "avx2") {
    if (const KernelTable* t = avx2_kernels()) return *t;
    throw ConfigurationError("AVX2 kernels requested but not available on this build or CPU");
  }
  if (name == "auto" || name.empty()) {
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }
  throw ConfigurationError("unknown kernel set '" + std::string(name) + "' (valid: scalar, avx2, auto)");
}

const KernelTable& kernels() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* env = std::getenv("ABIDNN_KERNELS");
    return kernels_by_name(env ? std::string_view(env) : std::string_view("auto"));
  }();
  return chosen;
}

}  // namespace abidnn
