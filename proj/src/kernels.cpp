#include "phs/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace phs::kernels {

namespace serial {

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double nrm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void scal(double a, std::span<double> x) {
    for (double& v : x) v *= a;
}

void csr_matvec(const CsrView& A, std::span<const double> x, std::span<double> y) {
    assert(y.size() == A.rows);
    for (std::size_t r = 0; r < A.rows; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.values[k] * x[A.col_idx[k]];
        y[r] = s;
    }
}

void skew_tridiag_apply(std::span<const double> super, std::span<const double> x,
                        std::span<double> y) {
    const std::size_t n = x.size();
    assert(y.size() == n);
    if (n == 0) return;
    assert(super.size() + 1 == n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        if (i + 1 < n) s += super[i] * x[i + 1];
        if (i > 0) s -= super[i - 1] * x[i - 1];
        y[i] = s;
    }
}

}  // namespace serial

namespace parallel {

namespace {

// Sum of f(i) over [0, n) with a thread-count independent summation order.
template <class Term>
double blocked_sum(std::size_t n, Term term) {
    const std::size_t nblocks = (n + kReductionBlock - 1) / kReductionBlock;
    if (nblocks <= 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += term(i);
        return s;
    }
    std::vector<double> partial(nblocks, 0.0);
    const auto nb = static_cast<std::ptrdiff_t>(nblocks);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kReductionBlock;
        const std::size_t hi = std::min(n, lo + kReductionBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<std::size_t>(b)] = s;
    }
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
}

}  // namespace

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return blocked_sum(x.size(), [&](std::size_t i) { return x[i] * y[i]; });
}

double nrm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (x.size() >= kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, std::span<double> x) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (x.size() >= kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) x[i] *= a;
}

void csr_matvec(const CsrView& A, std::span<const double> x, std::span<double> y) {
    assert(y.size() == A.rows);
    const auto rows = static_cast<std::ptrdiff_t>(A.rows);
#pragma omp parallel for schedule(static) if (A.rows >= kParallelThreshold)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.values[k] * x[A.col_idx[k]];
        y[r] = s;
    }
}

void skew_tridiag_apply(std::span<const double> super, std::span<const double> x,
                        std::span<double> y) {
    const std::size_t n = x.size();
    assert(y.size() == n);
    if (n == 0) return;
    assert(super.size() + 1 == n);
    if (n == 1) {
        y[0] = 0.0;
        return;
    }
    y[0] = super[0] * x[1];
    y[n - 1] = -super[n - 2] * x[n - 2];
    const auto last = static_cast<std::ptrdiff_t>(n - 1);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
    for (std::ptrdiff_t i = 1; i < last; ++i) y[i] = super[i] * x[i + 1] - super[i - 1] * x[i - 1];
}

}  // namespace parallel

bool openmp_enabled() noexcept {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace phs::kernels
