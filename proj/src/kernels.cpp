#include "gognn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace gognn::kernels {

const Ops* avx2_ops_or_null();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect_backend() {
  if (const char* env = std::getenv("GOGNN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2_fma() &&
        avx2_ops_or_null() != nullptr) {
      return Backend::kAvx2;
    }
    return Backend::kScalar;
  }
  if (cpu_has_avx2_fma() && avx2_ops_or_null() != nullptr) return Backend::kAvx2;
  return Backend::kScalar;
}

struct State {
  std::atomic<const Ops*> table;
  std::atomic<Backend> backend;
  State() {
    Backend b = detect_backend();
    backend = b;
    table = b == Backend::kAvx2 ? avx2_ops_or_null() : &scalar_ops();
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

const Ops& active() { return *state().table.load(std::memory_order_acquire); }

Backend active_backend() {
  return state().backend.load(std::memory_order_acquire);
}

bool available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return cpu_has_avx2_fma() && avx2_ops_or_null() != nullptr;
  }
  return false;
}

bool select(Backend b) {
  if (!available(b)) return false;
  state().table.store(b == Backend::kAvx2 ? avx2_ops_or_null() : &scalar_ops(),
                      std::memory_order_release);
  state().backend.store(b, std::memory_order_release);
  return true;
}

std::string_view name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace gognn::kernels
