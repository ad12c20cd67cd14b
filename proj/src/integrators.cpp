#include "phs/integrators.hpp"

#include "phs/expm.hpp"
#include "phs/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace phs {

namespace {

using ColSparse = Eigen::SparseMatrix<double>;

SparseMatrix sparse_identity(Index n) {
    SparseMatrix I(n, n);
    I.setIdentity();
    return I;
}

bool part_has_input(FlowPart part) { return part != FlowPart::conservative; }
bool part_has_J(FlowPart part) { return part != FlowPart::dissipative; }
bool part_has_R(FlowPart part) { return part != FlowPart::conservative; }

void require_positive_step(double h, const char* who) {
    if (!(h > 0.0)) throw std::invalid_argument(std::string(who) + ": step size must be positive");
}

Vector input_average(const PhsModel& sys, const InputSignal& u, double t0, double h, FlowPart part) {
    if (sys.ports() == 0 || !part_has_input(part)) return Vector::Zero(sys.ports());
    Vector ubar = 0.5 * (u(t0) + u(t0 + h));
    require_size(ubar, sys.ports(), "input signal");
    return ubar;
}

StepResult finish_step(const PhsModel& sys, const Vector& x0, Vector x1, const Vector& xm, const Vector& dg,
                       const Vector& ubar, double s0, double h, FlowPart part) {
    StepResult res;
    res.y = sys.apply_Bt(xm, dg);
    if (part_has_R(part)) res.energy_balance.dissipated = h * dg.dot(sys.apply_R(xm, dg));
    if (part_has_input(part) && sys.ports() > 0) res.energy_balance.supplied = h * res.y.dot(ubar);
    res.H_value = sys.hamiltonian(x1);
    res.state = State{std::move(x1), part == FlowPart::conservative ? s0 : s0 + h};
    (void)x0;
    return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// Discrete gradients
// ---------------------------------------------------------------------------

Vector avf_discrete_gradient(const QuadraticPHSystem& sys, const Vector& x0, const Vector& x1) {
    require_size(x0, sys.dim(), "avf_discrete_gradient");
    require_size(x1, sys.dim(), "avf_discrete_gradient");
    return sys.Q() * (0.5 * (x0 + x1));
}

Vector avf_discrete_gradient(const PhsModel& sys, const Vector& x0, const Vector& x1, int quadrature_nodes) {
    require_size(x0, sys.dim(), "avf_discrete_gradient");
    require_size(x1, sys.dim(), "avf_discrete_gradient");
    const QuadratureRule rule = gauss_legendre(quadrature_nodes);
    Vector g = Vector::Zero(sys.dim());
    const Vector dx = x1 - x0;
    for (std::size_t i = 0; i < rule.size(); ++i) g += rule.weights[i] * sys.gradient(x0 + rule.nodes[i] * dx);
    return g;
}

StepResult discrete_gradient_step(const QuadraticPHSystem& sys, const TimeAugmentedState& state, double h,
                                  const InputSignal& u, const DiscreteGradientStepConfig& cfg, FlowPart part) {
    require_positive_step(h, "discrete_gradient_step");
    const Index n = sys.dim();
    const Vector& x0 = state.x;
    require_size(x0, n, "discrete_gradient_step");
    const double tol = cfg.newton_tol.value_or(1e-12 * (1.0 + x0.norm()));

    SparseMatrix structure(n, n);
    if (part_has_J(part)) structure += sys.J();
    if (part_has_R(part)) structure -= sys.R();
    const SparseMatrix A = structure * sys.Q();
    const Vector ubar = input_average(sys, u, state.s, h, part);
    Vector forcing = Vector::Zero(n);
    if (part_has_input(part) && sys.ports() > 0) forcing = h * (sys.B() * ubar);

    auto residual = [&](const Vector& x1) -> Vector { return x1 - x0 - 0.5 * h * (A * (x0 + x1)) - forcing; };

    // F is affine: its Jacobian I - h/2 A is constant and Newton is exact after
    // one step up to rounding; further steps act as iterative refinement.
    Eigen::SparseLU<ColSparse> lu;
    lu.compute(ColSparse(sparse_identity(n) - 0.5 * h * A));
    if (lu.info() != Eigen::Success) throw StepFailure("discrete_gradient_step: singular Newton matrix");

    Vector x1 = x0;
    Vector r = residual(x1);
    double rnorm = r.norm();
    int iter = 0;
    while (rnorm > tol) {
        if (iter++ == cfg.newton_max_iter) {
            throw StepFailure("discrete_gradient_step: Newton did not converge", -1, rnorm);
        }
        x1 -= lu.solve(r);
        r = residual(x1);
        rnorm = r.norm();
    }
    const Vector xm = 0.5 * (x0 + x1);
    const Vector dg = sys.Q() * xm;
    return finish_step(sys, x0, std::move(x1), xm, dg, ubar, state.s, h, part);
}

StepResult discrete_gradient_step(const NonlinearPHSystem& sys, const TimeAugmentedState& state, double h,
                                  const InputSignal& u, const DiscreteGradientStepConfig& cfg, FlowPart part) {
    require_positive_step(h, "discrete_gradient_step");
    const Index n = sys.dim();
    const Vector& x0 = state.x;
    require_size(x0, n, "discrete_gradient_step");
    const double tol = cfg.newton_tol.value_or(1e-12 * (1.0 + x0.norm()));
    const Vector ubar = input_average(sys, u, state.s, h, part);

    auto residual = [&](const Vector& x1) -> Vector {
        const Vector xm = 0.5 * (x0 + x1);
        const Vector dg = avf_discrete_gradient(sys, x0, x1, cfg.quadrature_nodes);
        Vector rhs = Vector::Zero(n);
        if (part_has_J(part)) rhs += sys.apply_J(xm, dg);
        if (part_has_R(part)) rhs -= sys.apply_R(xm, dg);
        if (part_has_input(part) && sys.ports() > 0) rhs += sys.apply_B(xm, ubar);
        return x1 - x0 - h * rhs;
    };

    Vector x1 = x0;
    Vector r = residual(x1);
    double rnorm = r.norm();
    int iter = 0;
    Matrix jac(n, n);
    while (rnorm > tol) {
        if (iter++ == cfg.newton_max_iter) {
            throw StepFailure("discrete_gradient_step: Newton did not converge", -1, rnorm);
        }
        // forward-difference Jacobian
        Vector xp = x1;
        for (Index j = 0; j < n; ++j) {
            const double eps = 1e-7 * (1.0 + std::abs(x1(j)));
            xp(j) = x1(j) + eps;
            jac.col(j) = (residual(xp) - r) / eps;
            xp(j) = x1(j);
        }
        x1 -= jac.partialPivLu().solve(r);
        r = residual(x1);
        rnorm = r.norm();
        if (!std::isfinite(rnorm)) throw StepFailure("discrete_gradient_step: Newton diverged", -1, rnorm);
    }
    const Vector xm = 0.5 * (x0 + x1);
    const Vector dg = avf_discrete_gradient(sys, x0, x1, cfg.quadrature_nodes);
    return finish_step(sys, x0, std::move(x1), xm, dg, ubar, state.s, h, part);
}

// ---------------------------------------------------------------------------
// Cayley (conservative midpoint) step
// ---------------------------------------------------------------------------

CayleyStep::CayleyStep(const SparseMatrix& Jt, double h, LinearSolverChoice solver)
    : h_(h), solver_(solver), op_(LinearOperator::from_sparse(Jt, OperatorProperty::skew_symmetric)) {
    if (Jt.rows() != Jt.cols()) throw DimensionError("CayleyStep: J~ must be square");
    if (solver_.kind == LinearSolverKind::direct) {
        const Index n = Jt.rows();
        auto lu = std::make_shared<Eigen::SparseLU<ColSparse>>();
        lu->compute(ColSparse(sparse_identity(n) - 0.5 * h * Jt));
        if (lu->info() != Eigen::Success) throw StepFailure("CayleyStep: factorization failed");
        lu_ = std::move(lu);
        rhs_ = sparse_identity(n) + 0.5 * h * Jt;
    }
}

CayleyStep::CayleyStep(LinearOperator Jt, double h, LinearSolverChoice solver)
    : h_(h), solver_(solver), op_(std::move(Jt)) {
    if (solver_.kind == LinearSolverKind::direct) {
        throw std::invalid_argument("CayleyStep: a matrix-free operator needs an iterative solver");
    }
}

Vector CayleyStep::apply(const Vector& x0, KrylovReport* report) const {
    require_size(x0, op_.dim, "CayleyStep::apply");
    if (solver_.kind == LinearSolverKind::direct) return lu_->solve(Vector(rhs_ * x0));

    const KrylovOptions opts{.tol = solver_.tol, .maxit = solver_.maxit, .absolute_tol = solver_.absolute_tol};
    KrylovResult res;
    if (solver_.kind == LinearSolverKind::gmres) {
        const Vector b = x0 + 0.5 * h_ * op_(x0);
        res = gmres(LinearOperator::shifted(op_, 1.0, -0.5 * h_), b, opts);
    } else {
        res = cayley_arnoldi(op_, x0, h_, opts);
    }
    if (!res.report.converged) {
        const double last = res.report.residual_norms.empty() ? 0.0 : res.report.residual_norms.back();
        throw StepFailure("CayleyStep: Krylov solver did not converge", -1, last);
    }
    if (report) *report = std::move(res.report);
    return std::move(res.x);
}

Vector midpoint_conservative_linear(const TransformedSystem& sys, const Vector& x0, double h,
                                   const LinearSolverChoice& solver, KrylovReport* report) {
    require_size(x0, sys.dim(), "midpoint_conservative_linear");
    if (h == 0.0) return x0;
    return CayleyStep(sys.J, h, solver).apply(x0, report);
}

// ---------------------------------------------------------------------------
// Dissipative midpoint step
// ---------------------------------------------------------------------------

DissipativeMidpointStep::DissipativeMidpointStep(const SparseMatrix& Rt, const Matrix& Bt, double h_half)
    : h_(h_half), B_(Bt) {
    require_positive_step(h_half, "DissipativeMidpointStep");
    const Index n = Rt.rows();
    if (B_.cols() == 0) B_.resize(n, 0);
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<ColSparse>>();
    ldlt->compute(ColSparse(sparse_identity(n) + 0.5 * h_half * Rt));
    // I + h/2 R~ is SPD for PSD R~, so this only fails for an invalid R~
    if (ldlt->info() != Eigen::Success || (ldlt->vectorD().array() <= 0.0).any()) {
        throw DefinitenessError("DissipativeMidpointStep: I + h/2 R~ is not positive definite",
                                ldlt->info() == Eigen::Success ? ldlt->vectorD().minCoeff() : std::nan(""));
    }
    ldlt_ = std::move(ldlt);
    rhs_ = sparse_identity(n) - 0.5 * h_half * Rt;
}

Vector DissipativeMidpointStep::apply(const Vector& x0, const Vector& u0, const Vector& u1) const {
    require_size(x0, rhs_.rows(), "DissipativeMidpointStep::apply");
    Vector rhs = rhs_ * x0;
    if (B_.cols() > 0) {
        require_size(u0, B_.cols(), "DissipativeMidpointStep::apply");
        require_size(u1, B_.cols(), "DissipativeMidpointStep::apply");
        rhs += h_ * (B_ * (0.5 * (u0 + u1)));
    }
    return ldlt_->solve(rhs);
}

Vector midpoint_dissipative_linear(const TransformedSystem& sys, const Vector& x0, double h_half,
                                  const Vector& u0, const Vector& u1) {
    return DissipativeMidpointStep(sys.R, sys.B, h_half).apply(x0, u0, u1);
}

// ---------------------------------------------------------------------------
// Multirate / composition
// ---------------------------------------------------------------------------

std::array<double, 3> triple_jump_weights() {
    const double g1 = 1.0 / (2.0 - std::cbrt(2.0));
    const double g2 = 1.0 - 2.0 * g1;
    return {g1, g2, g1};
}

namespace {

void check_multirate(const MultirateConfig& cfg) {
    if (cfg.m < 1) throw std::invalid_argument("MultirateConfig: m must be >= 1");
}

}  // namespace

ConservativeStepper::ConservativeStepper(const SparseMatrix& Jt, double h, MultirateConfig cfg,
                                         LinearSolverChoice solver)
    : h_(h), cfg_(cfg) {
    check_multirate(cfg_);
    const double micro = h / cfg_.m;
    switch (cfg_.inner_scheme) {
        case InnerScheme::discrete_gradient:
            cayley_.emplace_back(Jt, micro, solver);
            break;
        case InnerScheme::composition4: {
            const auto g = triple_jump_weights();
            cayley_.emplace_back(Jt, g[0] * micro, solver);
            cayley_.emplace_back(Jt, g[1] * micro, solver);
            break;
        }
        case InnerScheme::exact:
            if (Jt.rows() > kDenseFlowLimit) throw DimensionError("ConservativeStepper: exact inner scheme needs n <= 2000");
            exact_ = matrix_exponential(micro * Matrix(Jt));
            break;
    }
}

ConservativeStepper::ConservativeStepper(LinearOperator Jt, double h, MultirateConfig cfg, LinearSolverChoice solver)
    : h_(h), cfg_(cfg) {
    check_multirate(cfg_);
    const double micro = h / cfg_.m;
    switch (cfg_.inner_scheme) {
        case InnerScheme::discrete_gradient:
            cayley_.emplace_back(Jt, micro, solver);
            break;
        case InnerScheme::composition4: {
            const auto g = triple_jump_weights();
            cayley_.emplace_back(Jt, g[0] * micro, solver);
            cayley_.emplace_back(Jt, g[1] * micro, solver);
            break;
        }
        case InnerScheme::exact:
            throw std::invalid_argument("ConservativeStepper: exact inner scheme needs an assembled matrix");
    }
}

Vector ConservativeStepper::advance(const Vector& x0, std::vector<KrylovReport>* reports) const {
    Vector x = x0;
    KrylovReport rep;
    auto cayley = [&](const CayleyStep& step) {
        x = step.apply(x, reports ? &rep : nullptr);
        if (reports) reports->push_back(std::move(rep));
    };
    for (int i = 0; i < cfg_.m; ++i) {
        switch (cfg_.inner_scheme) {
            case InnerScheme::discrete_gradient:
                cayley(cayley_[0]);
                break;
            case InnerScheme::composition4:
                cayley(cayley_[0]);
                cayley(cayley_[1]);
                cayley(cayley_[0]);
                break;
            case InnerScheme::exact:
                x = exact_ * x;
                break;
        }
    }
    return x;
}

Vector nested_multirate_conservative(const TransformedSystem& sys, const Vector& x0, double h,
                                     const MultirateConfig& cfg, const LinearSolverChoice& solver) {
    require_size(x0, sys.dim(), "nested_multirate_conservative");
    if (h == 0.0) return x0;
    return ConservativeStepper(sys.J, h, cfg, solver).advance(x0);
}

Vector composition4_conservative(const TransformedSystem& sys, const Vector& x0, double h,
                                 const LinearSolverChoice& solver) {
    return nested_multirate_conservative(sys, x0, h, {1, InnerScheme::composition4}, solver);
}

}  // namespace phs
