#pragma once
// Dense double-precision kernels used by the tensor tape.
//
// Every primitive has a scalar reference implementation and, where the CPU
// supports it, a vector variant (AVX2+FMA on x86-64, NEON on AArch64). The
// variant is picked once at startup; DINGDATE_SIMD=scalar|avx2|neon|auto
// overrides the choice. Vector variants reassociate sums, so results agree
// with the scalar path to rounding, not bit-for-bit. A given machine and
// setting is always deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace dingdate::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

/// True if `isa` can run on this CPU (Scalar always can).
bool isa_supported(Isa isa) noexcept;

/// Currently selected instruction set.
Isa active_isa() noexcept;

/// Selects the instruction set for subsequent calls; returns the previous one.
/// Throws std::invalid_argument if `isa` is not supported here.
Isa set_isa(Isa isa);

/// RAII override, used by the equivalence tests.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(set_isa(isa)) {}
  ~ScopedIsa() { set_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Row-major matrix products, all accumulating into `c`.
//   gemm_nn: c[m x n] += a[m x k] * b[k x n]
//   gemm_tn: c[k x n] += a[m x k]^T * b[m x n]
//   gemm_nt: c[m x k] += a[m x n] * b[k x n]^T
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

/// Pairwise (cascade) summation; fixed association order, scalar on every ISA.
double pairwise_sum(std::span<const double> values) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon

}  // namespace dingdate::kernels
