#pragma once

#include <cstddef>
#include <string_view>

namespace gognn::kernels {

enum class Backend { kScalar, kAvx2 };

/// Dense double-precision kernels over row-major storage. All tensor
/// arithmetic in the engine bottoms out here, so the dispatch table is the
/// only place where SIMD and scalar code paths diverge.
///
/// Accumulation order is fixed per kernel (k-major for the gemm family),
/// so results are deterministic within a backend. The AVX2 variants use FMA
/// and may differ from scalar results in the last few ulps; the equivalence
/// suite bounds that drift.
struct Ops {
  // c[m×n] = a[m×k] · b[k×n]            (+= when accumulate)
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  // c[m×n] = a[m×k] · b[n×k]ᵀ           (+= when accumulate)
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  // c[m×n] = a[k×m]ᵀ · b[k×n]           (+= when accumulate)
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // y += alpha · x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(const double* x, double alpha, double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
};

/// Reference implementation; always available.
const Ops& scalar_ops();

/// Table currently in use. Selected once on first call: AVX2+FMA when the
/// CPU supports it, scalar otherwise. The GOGNN_KERNELS environment variable
/// ("scalar" or "avx2") overrides detection.
const Ops& active();
Backend active_backend();

bool available(Backend b);

/// Switches the process-wide table. Returns false (leaving the current
/// table in place) when the backend is not usable on this CPU. Not safe to
/// call while other threads are evaluating.
bool select(Backend b);

std::string_view name(Backend b);

}  // namespace gognn::kernels
