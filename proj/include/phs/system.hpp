#pragma once

// Port-Hamiltonian system models
//
//     x' = (J(x) - R(x)) grad H(x) + B(x) u(t),      y = B(x)^T grad H(x)
//
// with J skew-symmetric, R symmetric positive semi-definite. The linear case
// uses H(x) = 1/2 x^T Q x with Q symmetric positive definite, so grad H = Q x.

#include "phs/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace phs {

/// Relative tolerance of all structural checks (skewness, semi-definiteness).
inline constexpr double kStructureTol = 1e-12;
/// Above this dimension eigenvalue-based checks give way to factorization probes.
inline constexpr Index kDenseCheckLimit = 2000;

/// Common evaluation interface of the linear and the nonlinear model.
class PhsModel {
public:
    virtual ~PhsModel() = default;

    virtual Index dim() const = 0;
    virtual Index ports() const = 0;
    virtual double hamiltonian(const Vector& x) const = 0;
    virtual Vector gradient(const Vector& x) const = 0;

    // Structure matrices evaluated at `at`, applied to a vector.
    virtual Vector apply_J(const Vector& at, const Vector& v) const = 0;
    virtual Vector apply_R(const Vector& at, const Vector& v) const = 0;
    virtual Vector apply_B(const Vector& at, const Vector& u) const = 0;
    virtual Vector apply_Bt(const Vector& at, const Vector& v) const = 0;

    /// y = B(x)^T grad H(x)
    Vector output(const Vector& x) const { return apply_Bt(x, gradient(x)); }
};

/// Linear system with constant J, R, B and quadratic Hamiltonian 1/2 x^T Q x.
class QuadraticPHSystem final : public PhsModel {
public:
    QuadraticPHSystem(SparseMatrix J, SparseMatrix R, Matrix B, SparseMatrix Q);
    QuadraticPHSystem(const Matrix& J, const Matrix& R, const Matrix& B, const Matrix& Q);

    Index dim() const override { return n_; }
    Index ports() const override { return B_.cols(); }
    double hamiltonian(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    Vector apply_J(const Vector&, const Vector& v) const override { return J_ * v; }
    Vector apply_R(const Vector&, const Vector& v) const override { return R_ * v; }
    Vector apply_B(const Vector&, const Vector& u) const override;
    Vector apply_Bt(const Vector&, const Vector& v) const override;

    const SparseMatrix& J() const noexcept { return J_; }
    const SparseMatrix& R() const noexcept { return R_; }
    const Matrix& B() const noexcept { return B_; }
    const SparseMatrix& Q() const noexcept { return Q_; }

private:
    Index n_;
    SparseMatrix J_, R_;
    Matrix B_;
    SparseMatrix Q_;
};

/// State-dependent system given by function handles.
struct NonlinearPHSystem final : PhsModel {
    Index n = 0;
    Index d = 0;
    std::function<Matrix(const Vector&)> J_of;
    std::function<Matrix(const Vector&)> R_of;
    std::function<Matrix(const Vector&)> B_of;  // n x d
    std::function<double(const Vector&)> H_of;
    std::function<Vector(const Vector&)> gradH_of;

    Index dim() const override { return n; }
    Index ports() const override { return d; }
    double hamiltonian(const Vector& x) const override;
    Vector gradient(const Vector& x) const override;
    Vector apply_J(const Vector& at, const Vector& v) const override { return J_of(at) * v; }
    Vector apply_R(const Vector& at, const Vector& v) const override { return R_of(at) * v; }
    Vector apply_B(const Vector& at, const Vector& u) const override;
    Vector apply_Bt(const Vector& at, const Vector& v) const override;
};

/// Input u : [t0, t_end] -> R^d.
struct InputSignal {
    std::function<Vector(double)> u_of;
    std::string description;

    Vector operator()(double t) const { return u_of(t); }

    static InputSignal zero(Index d);
    static InputSignal constant(Vector value);
    /// amplitude * sin(2 pi frequency t) on every port
    static InputSignal sine(Index d, double amplitude, double frequency);
};

// ---------------------------------------------------------------------------
// Structure validation
// ---------------------------------------------------------------------------

struct StructureViolation {
    std::string matrix;    // "J", "R" or "Q"
    std::string property;  // e.g. "skew-symmetry"
    double defect = 0.0;   // measured defect (absolute)
};

/// Empty iff J is skew, R symmetric PSD and Q symmetric PD (relative tolerance kStructureTol).
std::vector<StructureViolation> validate_structure(const QuadraticPHSystem& sys);
/// The same checks for J(x), R(x) of a nonlinear model at one point.
std::vector<StructureViolation> validate_structure_at(const NonlinearPHSystem& sys, const Vector& x);

/// Relative defect between gradH_of and central differences of H_of at x
/// (step 1e-6 (1 + |x|)).
double gradient_consistency_defect(const NonlinearPHSystem& sys, const Vector& x);

/// max |A + A^T|
double skewness_defect(const SparseMatrix& A);
/// max |A - A^T|
double symmetry_defect(const SparseMatrix& A);
/// Smallest eigenvalue of symmetric A (dense route up to kDenseCheckLimit); above
/// that a shifted LDL^T probe returns the smallest pivot instead.
double smallest_eigenvalue_estimate(const SparseMatrix& A);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double hamiltonian(const PhsModel& sys, const Vector& x);
Vector output(const PhsModel& sys, const Vector& x);

// ---------------------------------------------------------------------------
// Congruence transform x~ = Q^{1/2} x
// ---------------------------------------------------------------------------

enum class CongruenceProvenance { diagonal, eigendecomposition };

struct CongruenceTransform {
    SparseMatrix Q_half;      // symmetric principal square root
    SparseMatrix Q_half_inv;
    CongruenceProvenance provenance = CongruenceProvenance::diagonal;

    Vector to_transformed(const Vector& x) const { return Q_half * x; }
    Vector from_transformed(const Vector& xt) const { return Q_half_inv * xt; }
};

/// Throws DefinitenessError (carrying the smallest eigenvalue) if Q is not SPD.
CongruenceTransform congruence_from(const SparseMatrix& Q);

/// System in transformed coordinates: x~' = (J~ - R~) x~ + B~ u, H~ = 1/2 |x~|^2.
struct TransformedSystem {
    SparseMatrix J;  // Q^{1/2} J Q^{1/2}
    SparseMatrix R;  // Q^{1/2} R Q^{1/2}
    Matrix B;        // Q^{1/2} B

    Index dim() const { return J.rows(); }
    Index ports() const { return B.cols(); }
    static double hamiltonian(const Vector& xt) { return 0.5 * xt.squaredNorm(); }
};

TransformedSystem transform_system(const QuadraticPHSystem& sys, const CongruenceTransform& ct);

// ---------------------------------------------------------------------------
// Dissipativity ledger
// ---------------------------------------------------------------------------

struct DissipativityLedger {
    double lhs = 0.0;    // H(end) - H(start)
    double bound = 0.0;  // accumulated supplied energy
    bool satisfied = false;
};

/// Checks H(end) - H(start) <= supplied energy (+ 1e-10 (1 + |bound|)) over a trajectory.
DissipativityLedger dissipativity_ledger(const PhsModel& sys, std::span<const StepResult> trajectory);

}  // namespace phs
