#include "phs/krylov.hpp"

#include "phs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace phs {

namespace {

std::span<const double> cspan(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> mspan(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double dot(const Vector& a, const Vector& b) { return kernels::dot(cspan(a), cspan(b)); }
double nrm2(const Vector& a) { return kernels::nrm2(cspan(a)); }
void axpy(double a, const Vector& x, Vector& y) { kernels::axpy(a, cspan(x), mspan(y)); }

// x = sum_j coeff(j) * basis[j]
Vector combine(const std::vector<Vector>& basis, const Vector& coeff, Index n) {
    Vector x = Vector::Zero(n);
    for (Index j = 0; j < coeff.size(); ++j) axpy(coeff(j), basis[static_cast<std::size_t>(j)], x);
    return x;
}

// Solve (I - a T) y = (I + a T) e1 * scale for the skew tridiagonal T with
// T(j+1, j) = beta[j], T(j, j+1) = -beta[j]. The matrix has identity symmetric
// part, so elimination without pivoting is safe.
Vector cayley_tridiagonal(std::span<const double> beta, std::size_t k, double a, double scale) {
    // sub/super diagonals of M = I - a T
    std::vector<double> lower(k > 0 ? k - 1 : 0), upper(k > 0 ? k - 1 : 0), diag(k, 1.0);
    for (std::size_t j = 0; j + 1 < k; ++j) {
        lower[j] = -a * beta[j];  // M(j+1, j)
        upper[j] = a * beta[j];   // M(j, j+1)
    }
    // rhs = (I + a T) e1 * scale
    Vector rhs = Vector::Zero(static_cast<Index>(k));
    rhs(0) = scale;
    if (k > 1) rhs(1) = a * beta[0] * scale;
    // Thomas algorithm
    for (std::size_t j = 1; j < k; ++j) {
        const double m = lower[j - 1] / diag[j - 1];
        diag[j] -= m * upper[j - 1];
        rhs(static_cast<Index>(j)) -= m * rhs(static_cast<Index>(j - 1));
    }
    Vector y(static_cast<Index>(k));
    for (std::size_t jj = k; jj-- > 0;) {
        double v = rhs(static_cast<Index>(jj));
        if (jj + 1 < k) v -= upper[jj] * y(static_cast<Index>(jj + 1));
        y(static_cast<Index>(jj)) = v / diag[jj];
    }
    return y;
}

// Number of eigenvalues of the symmetric tridiagonal matrix that are < x (Sturm count).
std::size_t sturm_count(std::span<const double> diag, std::span<const double> off, double x) {
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        const double e2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
        q = diag[i] - x - (i > 0 ? e2 / q : 0.0);
        if (q == 0.0) q = -std::numeric_limits<double>::epsilon() * (std::abs(x) + 1.0);
        if (q < 0.0) ++count;
    }
    return count;
}

}  // namespace

// ---------------------------------------------------------------------------

void LinearOperator::apply(const Vector& v, Vector& out) const {
    require_size(v, dim, "LinearOperator::apply");
    out.resize(dim);
    apply_fn(cspan(v), mspan(out));
}

Vector LinearOperator::operator()(const Vector& v) const {
    Vector out(dim);
    apply(v, out);
    return out;
}

LinearOperator LinearOperator::from_sparse(SparseMatrix A, OperatorProperty property) {
    if (A.rows() != A.cols()) throw DimensionError("LinearOperator::from_sparse: matrix must be square");
    A.makeCompressed();
    auto shared = std::make_shared<const SparseMatrix>(std::move(A));
    const Index n = shared->rows();
    return {n,
            [shared](std::span<const double> x, std::span<double> y) {
                const SparseMatrix& M = *shared;
                const kernels::CsrView view{
                    static_cast<std::size_t>(M.rows()),
                    {M.outerIndexPtr(), static_cast<std::size_t>(M.rows() + 1)},
                    {M.innerIndexPtr(), static_cast<std::size_t>(M.nonZeros())},
                    {M.valuePtr(), static_cast<std::size_t>(M.nonZeros())}};
                kernels::csr_matvec(view, x, y);
            },
            property};
}

LinearOperator LinearOperator::identity(Index n) {
    return {n, [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); },
            OperatorProperty::symmetric_positive_definite};
}

LinearOperator LinearOperator::shifted(const LinearOperator& A, double shift, double scale) {
    return {A.dim,
            [A, shift, scale](std::span<const double> x, std::span<double> y) {
                A.apply_fn(x, y);
                for (std::size_t i = 0; i < y.size(); ++i) y[i] = shift * x[i] + scale * y[i];
            },
            OperatorProperty::general};
}

double linearity_defect(const LinearOperator& A, int probes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto random_vector = [&] {
        Vector v(A.dim);
        for (Index i = 0; i < A.dim; ++i) v(i) = normal(rng);
        return v;
    };
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const Vector u = random_vector();
        const Vector v = random_vector();
        const double a = normal(rng);
        const double b = normal(rng);
        const Vector Au = A(u);
        const Vector Av = A(v);
        const Vector lhs = A(Vector(a * u + b * v));
        const double scale = std::abs(a) * Au.norm() + std::abs(b) * Av.norm() + 1e-300;
        worst = std::max(worst, (lhs - a * Au - b * Av).norm() / scale);
    }
    return worst;
}

void KrylovReport::write_csv(std::ostream& os) const {
    const auto old = os.precision(17);
    os << "iteration,residual_norm,iterate_norm\n";
    for (std::size_t k = 0; k < residual_norms.size(); ++k) {
        os << (k + 1) << ',' << residual_norms[k] << ',' << iterate_norms[k] << '\n';
    }
    os.precision(old);
}

// ---------------------------------------------------------------------------
// GMRES
// ---------------------------------------------------------------------------

KrylovResult gmres(const LinearOperator& A, const Vector& b, const KrylovOptions& opts) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("gmres: tol must be positive");
    require_size(b, A.dim, "gmres");
    const Index n = A.dim;
    KrylovResult result{Vector::Zero(n), {}};
    KrylovReport& rep = result.report;
    const double bnorm = nrm2(b);
    rep.rhs_norm = bnorm;
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * bnorm;
    if (bnorm == 0.0) {
        rep.converged = true;
        return result;
    }

    const int maxit = std::max(1, opts.maxit);
    std::vector<Vector> V;
    V.reserve(static_cast<std::size_t>(std::min<Index>(maxit + 1, n + 1)));
    V.push_back(b / bnorm);
    Matrix H = Matrix::Zero(maxit + 1, maxit);
    Vector g = Vector::Zero(maxit + 1);
    g(0) = bnorm;
    std::vector<double> cs(maxit), sn(maxit);
    Vector w(n), Ax(n);

    for (int k = 0; k < maxit; ++k) {
        A.apply(V[k], w);
        // modified Gram-Schmidt
        for (int i = 0; i <= k; ++i) {
            H(i, k) = dot(w, V[i]);
            axpy(-H(i, k), V[i], w);
        }
        const double hnext = nrm2(w);
        H(k + 1, k) = hnext;
        // previous rotations
        for (int i = 0; i < k; ++i) {
            const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
            H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
            H(i, k) = t;
        }
        const double r = std::hypot(H(k, k), H(k + 1, k));
        cs[k] = r == 0.0 ? 1.0 : H(k, k) / r;
        sn[k] = r == 0.0 ? 0.0 : H(k + 1, k) / r;
        H(k, k) = r;
        H(k + 1, k) = 0.0;
        g(k + 1) = -sn[k] * g(k);
        g(k) = cs[k] * g(k);

        const Vector y = H.topLeftCorner(k + 1, k + 1).triangularView<Eigen::Upper>().solve(g.head(k + 1));
        result.x = combine(V, y, n);
        A.apply(result.x, Ax);
        const double res = (b - Ax).norm();
        rep.residual_norms.push_back(res);
        rep.iterate_norms.push_back(nrm2(result.x));
        if (opts.keep_iterates) rep.iterates.push_back(result.x);
        rep.iterations = k + 1;

        if (res <= threshold) {
            rep.converged = true;
            break;
        }
        if (hnext <= 1e-14 * bnorm) {
            // Krylov space is invariant: x is the exact solution up to rounding
            rep.breakdown = true;
            rep.converged = res <= threshold;
            break;
        }
        V.push_back(w / hnext);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Cayley transform by skew Arnoldi (short recurrence)
// ---------------------------------------------------------------------------

KrylovResult cayley_arnoldi(const LinearOperator& J, const Vector& x0, double h, const KrylovOptions& opts) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("cayley_arnoldi: tol must be positive");
    require_size(x0, J.dim, "cayley_arnoldi");
    const Index n = J.dim;
    KrylovResult result{Vector::Zero(n), {}};
    KrylovReport& rep = result.report;
    const double x0norm = nrm2(x0);
    if (x0norm == 0.0) {
        rep.converged = true;
        return result;
    }
    const double a = 0.5 * h;
    const int maxit = std::max(1, opts.maxit);

    std::vector<Vector> V;
    V.push_back(x0 / x0norm);
    Vector Jv(n);
    J.apply(V[0], Jv);
    // rhs of the midpoint system, b = x0 + a J x0
    Vector b = x0;
    axpy(a * x0norm, Jv, b);
    const double bnorm = nrm2(b);
    rep.rhs_norm = bnorm;
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * bnorm;

    std::vector<double>& beta = rep.beta;
    Vector Jx(n), w(n);
    for (int k = 0; k < maxit; ++k) {
        const std::size_t dimK = static_cast<std::size_t>(k) + 1;
        const Vector y = cayley_tridiagonal(beta, dimK, a, x0norm);
        result.x = combine(V, y, n);

        J.apply(result.x, Jx);
        Vector r = result.x - b;
        axpy(-a, Jx, r);
        const double res = nrm2(r);
        rep.residual_norms.push_back(res);
        rep.iterate_norms.push_back(nrm2(result.x));
        if (opts.keep_iterates) rep.iterates.push_back(result.x);
        rep.iterations = k + 1;
        if (res <= threshold) {
            rep.converged = true;
            break;
        }
        if (k + 1 == maxit) break;

        // J v_k = beta_k v_{k+1} - beta_{k-1} v_{k-1}
        w = Jv;
        if (k > 0) axpy(beta[k - 1], V[k - 1], w);
        if (opts.reorthogonalize) {
            Vector coeff(static_cast<Index>(V.size()));
            for (std::size_t j = 0; j < V.size(); ++j) coeff(static_cast<Index>(j)) = dot(w, V[j]);
            for (std::size_t j = 0; j < V.size(); ++j) axpy(-coeff(static_cast<Index>(j)), V[j], w);
        }
        const double bk = nrm2(w);
        if (bk <= 1e-14 * std::max(1.0, nrm2(Jv))) {
            // invariant subspace: the current iterate is the exact Cayley image
            rep.breakdown = true;
            rep.converged = true;
            break;
        }
        beta.push_back(bk);
        V.push_back(w / bk);
        J.apply(V.back(), Jv);
    }
    if (opts.keep_basis) {
        rep.basis.resize(n, static_cast<Index>(V.size()));
        for (std::size_t j = 0; j < V.size(); ++j) rep.basis.col(static_cast<Index>(j)) = V[j];
    }
    return result;
}

double residual_of_cayley_system(const LinearOperator& J, double h, const Vector& x, const Vector& x0) {
    require_size(x, J.dim, "residual_of_cayley_system");
    require_size(x0, J.dim, "residual_of_cayley_system");
    const Vector r = (x - x0) - 0.5 * h * (J(x) + J(x0));
    return r.norm();
}

double stopping_rule_h2(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("stopping_rule_h2: h must be positive");
    return h * h;
}

// ---------------------------------------------------------------------------
// Spectral radius of a skew operator
// ---------------------------------------------------------------------------

double tridiagonal_max_eigenvalue(std::span<const double> diag, std::span<const double> off) {
    const std::size_t k = diag.size();
    if (k == 0) return 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < k ? std::abs(off[i]) : 0.0);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off, mid) == k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double skew_spectral_radius_lanczos(const LinearOperator& J, std::uint64_t seed, int maxit, double rtol) {
    const Index n = J.dim;
    if (n == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    v /= nrm2(v);
    Vector vprev = Vector::Zero(n);
    Vector t(n), w(n);
    std::vector<double> alpha, beta;
    double last_check = -1.0;
    double estimate = 0.0;
    const int limit = static_cast<int>(std::min<Index>(maxit, n));
    for (int k = 0; k < limit; ++k) {
        // w = -J^2 v = J^T J v
        J.apply(v, t);
        J.apply(t, w);
        w = -w;
        const double a = dot(w, v);
        alpha.push_back(a);
        axpy(-a, v, w);
        if (k > 0) axpy(-beta.back(), vprev, w);
        const double b = nrm2(w);
        const bool done = b <= 1e-14 * std::abs(a) || k + 1 == limit;
        if ((k + 1) % 100 == 0 || done) {
            estimate = tridiagonal_max_eigenvalue(alpha, beta);
            if (done || (last_check >= 0.0 && std::abs(estimate - last_check) <= rtol * estimate)) break;
            last_check = estimate;
        }
        beta.push_back(b);
        vprev = v;
        v = w / b;
    }
    return std::sqrt(std::max(estimate, 0.0));
}

}  // namespace phs
