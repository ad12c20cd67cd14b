#pragma once

// Krylov solvers for the implicit-midpoint system of the conservative flow
//
//     (I - h/2 J~) x1 = (I + h/2 J~) x0,      J~ skew-symmetric.
//
// gmres() treats it as a general linear system. cayley_arnoldi() instead
// evaluates the Cayley map x1 = (I - h/2 J~)^{-1} (I + h/2 J~) x0 as a matrix
// function on the Krylov space K_k(J~, x0): the projected matrix is skew and
// tridiagonal (short recurrence), its Cayley map is orthogonal, and so every
// iterate has exactly the 2-norm of x0.

#include "phs/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace phs {

enum class OperatorProperty { general, skew_symmetric, symmetric_positive_definite };

/// Matrix-free linear operator v -> A v.
struct LinearOperator {
    Index dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> apply_fn;
    OperatorProperty property = OperatorProperty::general;

    void apply(const Vector& v, Vector& out) const;
    Vector operator()(const Vector& v) const;

    /// Shares ownership of a copy of A; the apply uses the CSR kernel.
    static LinearOperator from_sparse(SparseMatrix A, OperatorProperty property);
    static LinearOperator identity(Index n);
    /// v -> shift * v + scale * A v
    static LinearOperator shifted(const LinearOperator& A, double shift, double scale);
};

/// max over random probes of |A(a u + b v) - a A u - b A v| / (|a||Au| + |b||Av| + tiny).
double linearity_defect(const LinearOperator& A, int probes, std::uint64_t seed);

struct KrylovOptions {
    double tol = 1e-10;
    int maxit = 500;
    bool absolute_tol = false;     // residual <= tol instead of tol * |rhs|
    bool keep_iterates = false;
    bool reorthogonalize = true;   // cayley_arnoldi: one classical Gram-Schmidt pass per step
    bool keep_basis = false;       // cayley_arnoldi: store V_k in the report
};

struct KrylovReport {
    std::vector<Vector> iterates;        // only with keep_iterates
    std::vector<double> residual_norms;  // one entry per iterate
    std::vector<double> iterate_norms;
    std::vector<double> beta;            // cayley_arnoldi: subdiagonal of the projected matrix
    Matrix basis;                        // cayley_arnoldi with keep_basis
    double rhs_norm = 0.0;
    bool converged = false;
    bool breakdown = false;
    int iterations = 0;

    /// CSV with header "iteration,residual_norm,iterate_norm"; iteration counts from 1.
    void write_csv(std::ostream& os) const;
};

struct KrylovResult {
    Vector x;
    KrylovReport report;
};

/// Unrestarted GMRES with zero initial guess. Converged when |b - A x| <= tol |b|
/// (or <= tol with absolute_tol). Records the explicit residual and |x_k| per iteration.
KrylovResult gmres(const LinearOperator& A, const Vector& b, const KrylovOptions& opts = {});

/// Cayley-transform evaluation by the skew short-recurrence Arnoldi process.
/// The stopping test is on the residual of (I - h/2 J) x = (I + h/2 J) x0 relative to
/// |(I + h/2 J) x0| (or absolute). Breakdown means the current iterate is exact.
KrylovResult cayley_arnoldi(const LinearOperator& J, const Vector& x0, double h,
                            const KrylovOptions& opts = {});

/// |(I - h/2 J) x - (I + h/2 J) x0|_2
double residual_of_cayley_system(const LinearOperator& J, double h, const Vector& x, const Vector& x0);

/// Absolute residual threshold h^2 used for multistep runs of an order-2 scheme.
double stopping_rule_h2(double h);

/// Spectral radius of a skew operator from Lanczos on J^T J = -J^2 (seeded start
/// vector, no reorthogonalization; extreme Ritz value by Sturm bisection).
/// Iterates until the estimate changes by less than `rtol` over 100 steps.
double skew_spectral_radius_lanczos(const LinearOperator& J, std::uint64_t seed, int maxit = 4000,
                                    double rtol = 1e-10);

/// Largest eigenvalue of the symmetric tridiagonal matrix (diag, off).
double tridiagonal_max_eigenvalue(std::span<const double> diag, std::span<const double> off);

}  // namespace phs
