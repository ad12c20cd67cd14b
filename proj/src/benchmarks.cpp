#include "phs/benchmarks.hpp"

#include "phs/expm.hpp"
#include "phs/kernels.hpp"
#include "phs/linear_flow.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

namespace phs {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(Index n, Index m, const std::vector<Triplet>& t) {
    SparseMatrix A(n, m);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

SparseMatrix diagonal(const Vector& d) {
    std::vector<Triplet> t;
    for (Index i = 0; i < d.size(); ++i) {
        if (d(i) != 0.0) t.emplace_back(i, i, d(i));
    }
    return from_triplets(d.size(), d.size(), t);
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------
// Two-mass oscillator
// ---------------------------------------------------------------------------

QuadraticPHSystem build_two_mass(const TwoMassParams& p) {
    require_positive(p.m1, "m1");
    require_positive(p.m2, "m2");
    require_positive(p.K1, "K1");
    require_positive(p.K2, "K2");
    require_positive(p.K, "K");
    if (!(p.r1 >= 0.0) || !(p.r2 >= 0.0)) throw std::invalid_argument("damping must be non-negative");

    Matrix J = Matrix::Zero(5, 5);
    J(0, 3) = 1.0;
    J(1, 3) = 1.0;
    J(1, 4) = -1.0;
    J(2, 4) = 1.0;
    J = (J - J.transpose()).eval();
    Vector r(5), q(5);
    r << 0.0, 0.0, 0.0, p.r1, p.r2;
    q << p.K1, p.K, p.K2, 1.0 / p.m1, 1.0 / p.m2;
    return QuadraticPHSystem(SparseMatrix(J.sparseView()), diagonal(r), Matrix(5, 0), diagonal(q));
}

Vector two_mass_default_x0() {
    Vector x0(5);
    x0 << 1.0, 0.99, 0.01, 0.0, 0.0;
    return x0;
}

// ---------------------------------------------------------------------------
// Mass-spring-damper chain
// ---------------------------------------------------------------------------

namespace {

void check_chain(const MsdChainParams& p) {
    if (p.n_cells < 1) throw std::invalid_argument("msd chain: n_cells must be >= 1");
    require_positive(p.mass, "mass");
    require_positive(p.stiffness, "stiffness");
    if (!(p.damping >= 0.0)) throw std::invalid_argument("msd chain: damping must be non-negative");
    if (p.input_ports < 0 || p.input_ports > p.n_cells) {
        throw std::invalid_argument("msd chain: input_ports must lie in [0, n_cells]");
    }
}

}  // namespace

QuadraticPHSystem build_msd_chain(const MsdChainParams& p) {
    check_chain(p);
    const Index N = 2 * p.n_cells;
    std::vector<Triplet> jt, rt, qt;
    jt.reserve(2 * N);
    for (Index j = 0; j + 1 < N; ++j) {
        // e_i' = p_i/m - p_{i-1}/m,  p_i' = -k e_i + k e_{i+1}
        jt.emplace_back(j, j + 1, 1.0);
        jt.emplace_back(j + 1, j, -1.0);
    }
    for (Index i = 0; i < p.n_cells; ++i) {
        qt.emplace_back(2 * i, 2 * i, p.stiffness);
        qt.emplace_back(2 * i + 1, 2 * i + 1, 1.0 / p.mass);
        if (p.damping > 0.0) rt.emplace_back(2 * i + 1, 2 * i + 1, p.damping);
    }
    Matrix B = Matrix::Zero(N, p.input_ports);
    for (Index j = 0; j < p.input_ports; ++j) B(2 * j + 1, j) = 1.0;
    return QuadraticPHSystem(from_triplets(N, N, jt), from_triplets(N, N, rt), std::move(B),
                             from_triplets(N, N, qt));
}

Vector msd_chain_transformed_superdiagonal(const MsdChainParams& p) {
    check_chain(p);
    const Index N = 2 * p.n_cells;
    // sqrt(Q_j Q_{j+1}) alternates sqrt(k/m) for every neighbouring pair
    return Vector::Constant(N - 1, std::sqrt(p.stiffness / p.mass));
}

LinearOperator msd_chain_transformed_operator(const MsdChainParams& p) {
    auto super = std::make_shared<const Vector>(msd_chain_transformed_superdiagonal(p));
    LinearOperator op;
    op.dim = 2 * p.n_cells;
    op.property = OperatorProperty::skew_symmetric;
    op.apply_fn = [super](std::span<const double> x, std::span<double> y) {
        kernels::skew_tridiag_apply(std::span<const double>(super->data(), static_cast<std::size_t>(super->size())), x, y);
    };
    return op;
}

// ---------------------------------------------------------------------------
// Spectral radius and calibration
// ---------------------------------------------------------------------------

double transformed_spectral_radius(const LinearOperator& Jt, std::uint64_t seed) {
    if (Jt.dim <= kDenseCheckLimit) {
        Matrix D(Jt.dim, Jt.dim);
        Vector e = Vector::Zero(Jt.dim);
        for (Index j = 0; j < Jt.dim; ++j) {
            e(j) = 1.0;
            D.col(j) = Jt(e);
            e(j) = 0.0;
        }
        const Matrix S = D.transpose() * D;
        if (Jt.dim == 0) return 0.0;
        Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
        return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
    }
    return skew_spectral_radius_lanczos(Jt, seed);
}

double transformed_spectral_radius(const QuadraticPHSystem& sys, std::uint64_t seed) {
    const TransformedSystem ts = transform_system(sys, congruence_from(sys.Q()));
    return transformed_spectral_radius(LinearOperator::from_sparse(ts.J, OperatorProperty::skew_symmetric), seed);
}

ScaledSystem scale_to_spectral_radius(const QuadraticPHSystem& sys, double target, std::uint64_t seed) {
    if (!(target > 0.0)) throw std::invalid_argument("scale_to_spectral_radius: target must be positive");
    const double rho = transformed_spectral_radius(sys, seed);
    if (!(rho > 0.0)) throw std::invalid_argument("scale_to_spectral_radius: J~ has zero spectral radius");
    const double s = target / rho;
    return {QuadraticPHSystem(sys.J(), sys.R(), sys.B(), SparseMatrix(s * sys.Q())), s};
}

MsdChainParams scale_to_spectral_radius(const MsdChainParams& p, double target, std::uint64_t seed) {
    if (!(target > 0.0)) throw std::invalid_argument("scale_to_spectral_radius: target must be positive");
    const double rho = transformed_spectral_radius(msd_chain_transformed_operator(p), seed);
    if (!(rho > 0.0)) throw std::invalid_argument("scale_to_spectral_radius: J~ has zero spectral radius");
    const double s = target / rho;
    MsdChainParams q = p;
    q.stiffness *= s;
    q.mass /= s;
    return q;
}

// ---------------------------------------------------------------------------
// Reference solution
// ---------------------------------------------------------------------------

Vector reference_solution(const QuadraticPHSystem& sys, const Vector& x0, double t_eval, const InputSignal& u,
                          double panel) {
    require_size(x0, sys.dim(), "reference_solution");
    if (sys.dim() > kDenseFlowLimit) {
        throw DimensionError("reference_solution: dimension " + std::to_string(sys.dim()) +
                             " exceeds the dense limit; use a fine-step implicit midpoint integration instead");
    }
    if (t_eval == 0.0) return x0;
    const Matrix A = (Matrix(sys.J()) - Matrix(sys.R())) * Matrix(sys.Q());
    const bool forced = sys.ports() > 0 && u.u_of && u(0.0).size() != 0;
    if (!forced) return matrix_exponential(t_eval * A) * x0;
    if (!(panel > 0.0)) throw std::invalid_argument("reference_solution: panel must be positive");
    const long panels = std::max(1L, static_cast<long>(std::ceil(std::abs(t_eval) / panel)));
    const double hp = t_eval / static_cast<double>(panels);
    const LinearFlowPropagator prop(A, sys.B(), hp);
    Vector x = x0;
    for (long k = 0; k < panels; ++k) x = prop.advance(x, static_cast<double>(k) * hp, u).x;
    return x;
}

Vector random_unit_vector(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v / v.norm();
}

}  // namespace phs
