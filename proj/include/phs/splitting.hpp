#pragma once

// Strang splitting of a port-Hamiltonian system into the conservative flow
// f1 = J grad H and the dissipative flow f2 = -R grad H + B u, with the
// autonomization clock s advanced only by the dissipative flow.

#include "phs/integrators.hpp"
#include "phs/system.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace phs {

enum class SubflowKind { conservative, dissipative };

/// One split flow. advance(state, h, u) returns the substep result with
/// StepResult::state.t holding the clock value after the substep; conservative
/// solvers leave it unchanged, dissipative solvers add h.
struct SubflowSolver {
    SubflowKind kind = SubflowKind::conservative;
    std::string name;
    std::function<StepResult(const TimeAugmentedState&, double, const InputSignal&)> advance;
};

enum class SubstepOrder {
    dissipative_outer,   // D(h/2) C(h) D(h/2)
    conservative_outer,  // C(h/2) D(h) C(h/2)
};

struct StrangScheme {
    SubflowSolver dissipative;
    SubflowSolver conservative;
    SubstepOrder order = SubstepOrder::dissipative_outer;
};

// ---------------------------------------------------------------------------
// Substep solvers
// ---------------------------------------------------------------------------

/// exp(-h R~) plus the variation-of-constants input integral (Gauss-Legendre,
/// `quadrature_nodes` nodes). Supplied energy is integrated along the exact
/// flow; dissipated = supplied - (H(x1) - H(x0)). Dense, n <= 2000. Accepts h < 0.
SubflowSolver exact_dissipative_solver(const QuadraticPHSystem& sys, int quadrature_nodes = 6);
/// exp(h J~). Dense, n <= 2000. Accepts h < 0.
SubflowSolver exact_conservative_solver(const QuadraticPHSystem& sys);

/// Implicit midpoint for the dissipative part in congruence coordinates (the
/// linear discrete-gradient step) with the discrete ledger.
SubflowSolver midpoint_dissipative_solver(const QuadraticPHSystem& sys);
/// m inner steps of h/m of the conservative flow in congruence coordinates.
SubflowSolver conservative_solver(const QuadraticPHSystem& sys, MultirateConfig cfg = {},
                                  LinearSolverChoice solver = {});

/// Discrete-gradient step of one part, for any model.
SubflowSolver discrete_gradient_solver(const QuadraticPHSystem& sys, SubflowKind kind,
                                       DiscreteGradientStepConfig cfg = {});
SubflowSolver discrete_gradient_solver(const NonlinearPHSystem& sys, SubflowKind kind,
                                       DiscreteGradientStepConfig cfg = {});

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Outer(h/2), inner(h), outer(h/2). The result carries y = B^T grad H and H at
/// the final state and the summed ledger of the three substeps. A failing
/// substep is rethrown as StepFailure with its index (0, 1, 2).
StepResult strang_step(const StrangScheme& scheme, const PhsModel& sys, const TimeAugmentedState& state,
                       const InputSignal& u, double h);

struct Trajectory {
    std::vector<StepResult> steps;          // steps[0] is the initial state
    std::vector<EnergyBalance> cumulative;  // running sums of the step ledgers
};

class IntegrationFailure : public std::runtime_error {
public:
    IntegrationFailure(const StepFailure& cause, Trajectory partial)
        : std::runtime_error(cause.what()), cause_(cause), partial_(std::move(partial)) {}
    const StepFailure& cause() const noexcept { return cause_; }
    const Trajectory& partial() const noexcept { return partial_; }

private:
    StepFailure cause_;
    Trajectory partial_;
};

/// Repeated Strang steps from t0 to t_end. If h does not divide t_end - t0
/// (relative slack 1e-12) the last step is shortened; the final time is t_end
/// exactly. Throws IntegrationFailure with the steps completed so far.
Trajectory integrate(const StrangScheme& scheme, const PhsModel& sys, const Vector& x0, double t0, double t_end,
                     double h, const InputSignal& u);

/// f1 = J(x) grad H(x), f2 = -R(x) grad H(x) + B(x) u(t).
std::pair<Vector, Vector> split_rhs(const PhsModel& sys, const Vector& x, double t, const InputSignal& u);

// ---------------------------------------------------------------------------
// Named scheme variants
// ---------------------------------------------------------------------------

enum class VariantKind { exact_splitting, dg_splitting, multirate_nested, multirate_highorder };

struct SchemeVariant {
    VariantKind kind = VariantKind::exact_splitting;
    int m = 0;  // micro-steps; 0 selects the default (8 nested, 4 high order)

    int micro_steps() const;
    /// "exact_splitting", "dg_splitting", "multirate_nested{8}", "multirate_highorder{4}"
    std::string label() const;
    /// Accepts the labels above, with or without the {m} suffix.
    static SchemeVariant parse(const std::string& text);
};

/// exact_splitting: exact flows. dg_splitting: midpoint dissipative and one
/// Cayley step. multirate_nested: m Cayley micro-steps. multirate_highorder: m
/// composition4 micro-steps. `solver` selects the Cayley solver.
StrangScheme make_variant_scheme(const QuadraticPHSystem& sys, const SchemeVariant& variant,
                                 LinearSolverChoice solver = {});

}  // namespace phs
