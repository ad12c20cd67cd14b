#pragma once

// Vector and operator kernels used by the Krylov solvers and the matrix-free
// benchmark operators.
//
// Two implementations are kept side by side:
//   serial::   straightforward loops, the reference the tests compare against;
//   parallel:: OpenMP loops. Reductions are computed over fixed-size blocks and
//              the block partials are summed in block order, so the result does
//              not depend on the number of threads.
//
// The unqualified functions in phs::kernels dispatch to parallel::.

#include <cstddef>
#include <span>

namespace phs::kernels {

/// Block length of the deterministic blocked reductions.
inline constexpr std::size_t kReductionBlock = 2048;
/// Vectors shorter than this are processed on the calling thread only.
inline constexpr std::size_t kParallelThreshold = 8192;

/// Compressed-row view of a sparse matrix (Eigen RowMajor layout).
struct CsrView {
    std::size_t rows = 0;
    std::span<const int> row_ptr;   // rows + 1 entries
    std::span<const int> col_idx;
    std::span<const double> values;
};

namespace serial {
double dot(std::span<const double> x, std::span<const double> y);
double nrm2(std::span<const double> x);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scal(double a, std::span<double> x);
void csr_matvec(const CsrView& A, std::span<const double> x, std::span<double> y);
/// y = S x for the skew tridiagonal S with superdiagonal `super` (length n-1)
/// and subdiagonal -super.
void skew_tridiag_apply(std::span<const double> super, std::span<const double> x,
                        std::span<double> y);
}  // namespace serial

namespace parallel {
double dot(std::span<const double> x, std::span<const double> y);
double nrm2(std::span<const double> x);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scal(double a, std::span<double> x);
void csr_matvec(const CsrView& A, std::span<const double> x, std::span<double> y);
void skew_tridiag_apply(std::span<const double> super, std::span<const double> x,
                        std::span<double> y);
}  // namespace parallel

inline double dot(std::span<const double> x, std::span<const double> y) { return parallel::dot(x, y); }
inline double nrm2(std::span<const double> x) { return parallel::nrm2(x); }
inline void axpy(double a, std::span<const double> x, std::span<double> y) { parallel::axpy(a, x, y); }
inline void scal(double a, std::span<double> x) { parallel::scal(a, x); }
inline void csr_matvec(const CsrView& A, std::span<const double> x, std::span<double> y) {
    parallel::csr_matvec(A, x, y);
}
inline void skew_tridiag_apply(std::span<const double> super, std::span<const double> x,
                               std::span<double> y) {
    parallel::skew_tridiag_apply(super, x, y);
}

/// True when the library was compiled with OpenMP.
bool openmp_enabled() noexcept;
/// Threads an OpenMP parallel region would use (1 without OpenMP).
int max_threads() noexcept;

}  // namespace phs::kernels
