#pragma once

// Substep integrators for the split flows.
//
// Discrete-gradient (average vector field) steps
//     (x1 - x0)/h = (J(xm) - R(xm)) dgH(x0, x1) + B(xm) ubar,   xm = (x0 + x1)/2,
//     ubar = (u(t0) + u(t0 + h))/2,   y1 = B(xm)^T dgH(x0, x1),
// which satisfy H(x1) - H(x0) = -h dgH^T R dgH + h y1^T ubar. For quadratic H
// they reduce to the implicit midpoint rule; in congruence coordinates the
// conservative step is the Cayley map of J~ and can be solved by any of the
// linear solvers in krylov.hpp.

#include "phs/krylov.hpp"
#include "phs/linear_flow.hpp"
#include "phs/system.hpp"

#include <array>
#include <memory>
#include <optional>

namespace phs {

struct DiscreteGradientStepConfig {
    std::optional<double> newton_tol;  // default 1e-12 (1 + |x0|)
    int newton_max_iter = 25;
    int quadrature_nodes = 3;          // AVF integral for non-quadratic H
};

/// Q (x0 + x1)/2; exact for quadratic H.
Vector avf_discrete_gradient(const QuadraticPHSystem& sys, const Vector& x0, const Vector& x1);
/// Gauss-Legendre approximation of int_0^1 grad H((1 - xi) x0 + xi x1) dxi.
Vector avf_discrete_gradient(const PhsModel& sys, const Vector& x0, const Vector& x1, int quadrature_nodes);

/// One discrete-gradient step of the chosen part from the clock value state.s.
/// The clock advances by h unless part == conservative. StepResult::y holds the
/// discrete output y1 and energy_balance the discrete ledger.
/// Throws std::invalid_argument for h <= 0 and StepFailure if Newton stalls.
StepResult discrete_gradient_step(const QuadraticPHSystem& sys, const TimeAugmentedState& state, double h,
                                  const InputSignal& u, const DiscreteGradientStepConfig& cfg = {},
                                  FlowPart part = FlowPart::full);
StepResult discrete_gradient_step(const NonlinearPHSystem& sys, const TimeAugmentedState& state, double h,
                                  const InputSignal& u, const DiscreteGradientStepConfig& cfg = {},
                                  FlowPart part = FlowPart::full);

// ---------------------------------------------------------------------------
// Linear steps in congruence coordinates
// ---------------------------------------------------------------------------

enum class LinearSolverKind { direct, gmres, cayley_arnoldi };

struct LinearSolverChoice {
    LinearSolverKind kind = LinearSolverKind::direct;
    double tol = 1e-10;
    int maxit = 500;
    bool absolute_tol = false;
};

/// x~1 = (I - h/2 J~)^{-1} (I + h/2 J~) x~0 for a fixed h; the direct variant
/// keeps a sparse LU factorization.
class CayleyStep {
public:
    CayleyStep(const SparseMatrix& Jt, double h, LinearSolverChoice solver = {});
    /// Matrix-free; solver must not be `direct`.
    CayleyStep(LinearOperator Jt, double h, LinearSolverChoice solver);

    Vector apply(const Vector& x0, KrylovReport* report = nullptr) const;
    double step() const noexcept { return h_; }

private:
    double h_;
    LinearSolverChoice solver_;
    LinearOperator op_;
    std::shared_ptr<const Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
    SparseMatrix rhs_;  // I + h/2 J~
};

Vector midpoint_conservative_linear(const TransformedSystem& sys, const Vector& x0, double h,
                                   const LinearSolverChoice& solver = {}, KrylovReport* report = nullptr);

/// (I + h_half/2 R~) x~1 = (I - h_half/2 R~) x~0 + h_half B~ (u0 + u1)/2 with a
/// cached sparse LDL^T factorization.
class DissipativeMidpointStep {
public:
    DissipativeMidpointStep(const SparseMatrix& Rt, const Matrix& Bt, double h_half);
    Vector apply(const Vector& x0, const Vector& u0, const Vector& u1) const;
    double step() const noexcept { return h_; }

private:
    double h_;
    Matrix B_;
    SparseMatrix rhs_;  // I - h/2 R~
    std::shared_ptr<const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

Vector midpoint_dissipative_linear(const TransformedSystem& sys, const Vector& x0, double h_half,
                                  const Vector& u0, const Vector& u1);

// ---------------------------------------------------------------------------
// Conservative multirate / higher-order stepping
// ---------------------------------------------------------------------------

enum class InnerScheme { discrete_gradient, exact, composition4 };

struct MultirateConfig {
    int m = 1;
    InnerScheme inner_scheme = InnerScheme::discrete_gradient;
};

/// Triple-jump weights {g1, g2, g1}, g1 = 1/(2 - 2^(1/3)), g2 = 1 - 2 g1 < 0.
std::array<double, 3> triple_jump_weights();

/// m consecutive inner steps of size h/m of the conservative flow of J~, with
/// the inner operators built once for the fixed h.
class ConservativeStepper {
public:
    ConservativeStepper(const SparseMatrix& Jt, double h, MultirateConfig cfg, LinearSolverChoice solver = {});
    ConservativeStepper(LinearOperator Jt, double h, MultirateConfig cfg, LinearSolverChoice solver);

    /// Krylov reports of the last call are appended to `reports` when given.
    Vector advance(const Vector& x0, std::vector<KrylovReport>* reports = nullptr) const;
    double step() const noexcept { return h_; }

private:
    double h_;
    MultirateConfig cfg_;
    std::vector<CayleyStep> cayley_;  // one (DG) or three (composition4) micro-step maps
    Matrix exact_;                    // e^{(h/m) J~} for the exact inner scheme
};

Vector nested_multirate_conservative(const TransformedSystem& sys, const Vector& x0, double h,
                                     const MultirateConfig& cfg, const LinearSolverChoice& solver = {});

/// Order-4 composition of three Cayley steps g1 h, g2 h, g1 h (g2 h < 0 is allowed
/// here because no dissipation is involved).
Vector composition4_conservative(const TransformedSystem& sys, const Vector& x0, double h,
                                 const LinearSolverChoice& solver = {});

}  // namespace phs
