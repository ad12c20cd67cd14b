#include "phs/system.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace phs {

namespace {

SparseMatrix to_sparse(const Matrix& M) {
    SparseMatrix S = M.sparseView();
    S.makeCompressed();
    return S;
}

bool is_diagonal(const SparseMatrix& A) {
    for (Index r = 0; r < A.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
            if (it.col() != r && it.value() != 0.0) return false;
        }
    }
    return true;
}

double max_abs(const SparseMatrix& A) {
    double m = 0.0;
    for (Index k = 0; k < A.nonZeros(); ++k) m = std::max(m, std::abs(A.valuePtr()[k]));
    return m;
}

void check_square(const SparseMatrix& A, Index n, const char* name) {
    if (A.rows() != n || A.cols() != n) {
        throw DimensionError(std::string("QuadraticPHSystem: ") + name + " must be " +
                             std::to_string(n) + "x" + std::to_string(n) + ", got " +
                             std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------

QuadraticPHSystem::QuadraticPHSystem(SparseMatrix J, SparseMatrix R, Matrix B, SparseMatrix Q)
    : n_(J.rows()), J_(std::move(J)), R_(std::move(R)), B_(std::move(B)), Q_(std::move(Q)) {
    check_square(J_, n_, "J");
    check_square(R_, n_, "R");
    check_square(Q_, n_, "Q");
    if (B_.rows() != n_ && !(B_.cols() == 0)) {
        throw DimensionError("QuadraticPHSystem: B must have " + std::to_string(n_) + " rows");
    }
    if (B_.cols() == 0) B_.resize(n_, 0);
    J_.makeCompressed();
    R_.makeCompressed();
    Q_.makeCompressed();
}

QuadraticPHSystem::QuadraticPHSystem(const Matrix& J, const Matrix& R, const Matrix& B,
                                     const Matrix& Q)
    : QuadraticPHSystem(to_sparse(J), to_sparse(R), B, to_sparse(Q)) {}

double QuadraticPHSystem::hamiltonian(const Vector& x) const {
    require_size(x, n_, "hamiltonian");
    return 0.5 * x.dot(Q_ * x);
}

Vector QuadraticPHSystem::gradient(const Vector& x) const {
    require_size(x, n_, "gradient");
    return Q_ * x;
}

Vector QuadraticPHSystem::apply_B(const Vector&, const Vector& u) const {
    if (B_.cols() == 0) return Vector::Zero(n_);
    return B_ * u;
}

Vector QuadraticPHSystem::apply_Bt(const Vector&, const Vector& v) const {
    return B_.transpose() * v;
}

double NonlinearPHSystem::hamiltonian(const Vector& x) const {
    require_size(x, n, "hamiltonian");
    return H_of(x);
}

Vector NonlinearPHSystem::gradient(const Vector& x) const {
    require_size(x, n, "gradient");
    return gradH_of(x);
}

Vector NonlinearPHSystem::apply_B(const Vector& at, const Vector& u) const {
    if (d == 0) return Vector::Zero(n);
    return B_of(at) * u;
}

Vector NonlinearPHSystem::apply_Bt(const Vector& at, const Vector& v) const {
    if (d == 0) return Vector::Zero(0);
    return B_of(at).transpose() * v;
}

// ---------------------------------------------------------------------------

InputSignal InputSignal::zero(Index d) {
    return {[d](double) { return Vector(Vector::Zero(d)); }, "zero"};
}

InputSignal InputSignal::constant(Vector value) {
    return {[value = std::move(value)](double) { return value; }, "constant"};
}

InputSignal InputSignal::sine(Index d, double amplitude, double frequency) {
    return {[=](double t) {
                return Vector(Vector::Constant(
                    d, amplitude * std::sin(2.0 * std::numbers::pi * frequency * t)));
            },
            "sine"};
}

// ---------------------------------------------------------------------------

double skewness_defect(const SparseMatrix& A) {
    const SparseMatrix S = A + SparseMatrix(A.transpose());
    return max_abs(S);
}

double symmetry_defect(const SparseMatrix& A) {
    const SparseMatrix S = A - SparseMatrix(A.transpose());
    return max_abs(S);
}

double smallest_eigenvalue_estimate(const SparseMatrix& A) {
    const Index n = A.rows();
    if (n == 0) return std::numeric_limits<double>::infinity();
    if (is_diagonal(A)) return A.diagonal().minCoeff();
    if (n <= kDenseCheckLimit) {
        const Matrix D = Matrix(A);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (D + D.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    // Shifted LDL^T probe: the smallest pivot of A + tau I (minus tau) has the
    // sign of the smallest eigenvalue of A; its magnitude is only indicative.
    const double tau = kStructureTol * std::max(1.0, A.norm());
    SparseMatrix I(n, n);
    I.setIdentity();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Eigen::SparseMatrix<double>(A + tau * I));
    if (ldlt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    return ldlt.vectorD().minCoeff() - tau;
}

namespace {

void check_skew(const SparseMatrix& J, const char* name, std::vector<StructureViolation>& out) {
    const double defect = skewness_defect(J);
    if (defect > kStructureTol * J.norm()) out.push_back({name, "skew-symmetry", defect});
}

void check_psd(const SparseMatrix& R, const char* name, std::vector<StructureViolation>& out) {
    const double scale = R.norm();
    const double sym = symmetry_defect(R);
    if (sym > kStructureTol * scale) out.push_back({name, "symmetry", sym});
    const double lmin = smallest_eigenvalue_estimate(R);
    if (lmin < -kStructureTol * scale) out.push_back({name, "positive semi-definiteness", -lmin});
}

void check_pd(const SparseMatrix& Q, const char* name, std::vector<StructureViolation>& out) {
    const double sym = symmetry_defect(Q);
    if (sym > kStructureTol * Q.norm()) out.push_back({name, "symmetry", sym});
    const double lmin = smallest_eigenvalue_estimate(Q);
    if (!(lmin > 0.0)) out.push_back({name, "positive definiteness", -lmin});
}

}  // namespace

std::vector<StructureViolation> validate_structure(const QuadraticPHSystem& sys) {
    const Index n = sys.dim();
    if (sys.J().rows() != n || sys.R().rows() != n || sys.Q().rows() != n || sys.B().rows() != n) {
        throw DimensionError("validate_structure: inconsistent dimensions");
    }
    std::vector<StructureViolation> out;
    check_skew(sys.J(), "J", out);
    check_psd(sys.R(), "R", out);
    check_pd(sys.Q(), "Q", out);
    return out;
}

std::vector<StructureViolation> validate_structure_at(const NonlinearPHSystem& sys, const Vector& x) {
    require_size(x, sys.n, "validate_structure_at");
    const Matrix J = sys.J_of(x);
    const Matrix R = sys.R_of(x);
    if (J.rows() != sys.n || J.cols() != sys.n || R.rows() != sys.n || R.cols() != sys.n) {
        throw DimensionError("validate_structure_at: J(x), R(x) must be n x n");
    }
    std::vector<StructureViolation> out;
    check_skew(to_sparse(J), "J", out);
    check_psd(to_sparse(R), "R", out);
    return out;
}

double gradient_consistency_defect(const NonlinearPHSystem& sys, const Vector& x) {
    require_size(x, sys.n, "gradient_consistency_defect");
    const double step = 1e-6 * (1.0 + x.norm());
    Vector fd(sys.n);
    Vector xp = x;
    for (Index i = 0; i < sys.n; ++i) {
        xp(i) = x(i) + step;
        const double hp = sys.H_of(xp);
        xp(i) = x(i) - step;
        const double hm = sys.H_of(xp);
        xp(i) = x(i);
        fd(i) = (hp - hm) / (2.0 * step);
    }
    const Vector g = sys.gradH_of(x);
    return (g - fd).norm() / std::max(g.norm(), std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------

double hamiltonian(const PhsModel& sys, const Vector& x) {
    require_size(x, sys.dim(), "hamiltonian");
    return sys.hamiltonian(x);
}

Vector output(const PhsModel& sys, const Vector& x) {
    require_size(x, sys.dim(), "output");
    return sys.output(x);
}

// ---------------------------------------------------------------------------

CongruenceTransform congruence_from(const SparseMatrix& Q) {
    if (Q.rows() != Q.cols()) throw DimensionError("congruence_from: Q must be square");
    const Index n = Q.rows();
    CongruenceTransform ct;
    if (is_diagonal(Q)) {
        const Vector d = Q.diagonal();
        const double dmin = n > 0 ? d.minCoeff() : 1.0;
        if (!(dmin > 0.0)) {
            throw DefinitenessError("congruence_from: Q is not positive definite (smallest eigenvalue " +
                                        std::to_string(dmin) + ")",
                                    dmin);
        }
        ct.provenance = CongruenceProvenance::diagonal;
        ct.Q_half = SparseMatrix(n, n);
        ct.Q_half_inv = SparseMatrix(n, n);
        std::vector<Eigen::Triplet<double>> a, b;
        a.reserve(n);
        b.reserve(n);
        for (Index i = 0; i < n; ++i) {
            const double r = std::sqrt(d(i));
            a.emplace_back(i, i, r);
            b.emplace_back(i, i, 1.0 / r);
        }
        ct.Q_half.setFromTriplets(a.begin(), a.end());
        ct.Q_half_inv.setFromTriplets(b.begin(), b.end());
        return ct;
    }
    if (symmetry_defect(Q) > kStructureTol * Q.norm()) {
        throw DefinitenessError("congruence_from: Q is not symmetric", std::nan(""));
    }
    const Matrix D = Matrix(Q);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (D + D.transpose()));
    const Vector lambda = es.eigenvalues();
    if (!(lambda.minCoeff() > 0.0)) {
        throw DefinitenessError("congruence_from: Q is not positive definite (smallest eigenvalue " +
                                    std::to_string(lambda.minCoeff()) + ")",
                                lambda.minCoeff());
    }
    const Matrix& V = es.eigenvectors();
    const Matrix half = V * lambda.cwiseSqrt().asDiagonal() * V.transpose();
    const Matrix half_inv = V * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    ct.provenance = CongruenceProvenance::eigendecomposition;
    ct.Q_half = to_sparse(0.5 * (half + half.transpose()));
    ct.Q_half_inv = to_sparse(0.5 * (half_inv + half_inv.transpose()));
    return ct;
}

TransformedSystem transform_system(const QuadraticPHSystem& sys, const CongruenceTransform& ct) {
    if (ct.Q_half.rows() != sys.dim()) throw DimensionError("transform_system: size mismatch");
    TransformedSystem t;
    t.J = ct.Q_half * sys.J() * ct.Q_half;
    t.R = ct.Q_half * sys.R() * ct.Q_half;
    t.B = ct.Q_half * sys.B();
    t.J.makeCompressed();
    t.R.makeCompressed();
    return t;
}

// ---------------------------------------------------------------------------

DissipativityLedger dissipativity_ledger(const PhsModel& sys, std::span<const StepResult> trajectory) {
    if (trajectory.empty()) throw std::invalid_argument("dissipativity_ledger: empty trajectory");
    DissipativityLedger ledger;
    ledger.lhs = sys.hamiltonian(trajectory.back().state.x) - sys.hamiltonian(trajectory.front().state.x);
    // the first entry is the initial state; its balance is zero by construction
    for (const auto& step : trajectory.subspan(1)) ledger.bound += step.energy_balance.supplied;
    ledger.satisfied = ledger.lhs <= ledger.bound + 1e-10 * (1.0 + std::abs(ledger.bound));
    return ledger;
}

}  // namespace phs
