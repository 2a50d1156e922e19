#pragma once

#include <cstddef>
#include <string>

namespace arvrm::kernels {

/// Dense double-precision inner loops shared by the forward and backward
/// passes. All matmul variants ACCUMULATE into the output buffer so gradient
/// sums compose without temporaries; callers zero the buffer when they want a
/// plain product.
///
/// Every entry point is deterministic for fixed inputs. The scalar table is
/// the reference; vector backends must match it within a small relative
/// tolerance (see tests/test_kernels.cpp) but are not required to be
/// bit-identical, since wide accumulators reorder the sums.
struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  void (*vadd)(const double* a, const double* b, double* out, std::size_t n);
  void (*vsub)(const double* a, const double* b, double* out, std::size_t n);
  void (*vmul)(const double* a, const double* b, double* out, std::size_t n);

  // C[m,n] += A[m,k] * B[k,n]
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // C[k,n] += A[m,k]^T * B[m,n]
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
};

enum class Backend { kAuto, kScalar, kAvx2 };

/// The currently selected kernel table.
const Ops& active();

/// Overrides backend selection. kAuto re-probes the CPU; requesting kAvx2 on
/// a CPU without AVX2+FMA falls back to scalar.
void set_backend(Backend backend);

/// Backend kAuto resolves to on this machine.
Backend detected_backend();

/// Reads ARVRM_KERNEL_BACKEND (scalar|avx2|auto) once at startup.
std::string backend_name();

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or unsupported

}  // namespace arvrm::kernels
