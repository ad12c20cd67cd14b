#include "phs/splitting.hpp"

#include "phs/expm.hpp"
#include "phs/linear_flow.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace phs {

namespace {

// Operators built for one step size and reused for every later call with it.
template <class T>
class StepCache {
public:
    template <class Make>
    std::shared_ptr<const T> get(double h, Make&& make) {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(h);
        if (it == cache_.end()) it = cache_.emplace(h, std::make_shared<const T>(make())).first;
        return it->second;
    }

private:
    std::mutex mutex_;
    std::map<double, std::shared_ptr<const T>> cache_;
};

struct LinearContext {
    QuadraticPHSystem sys;
    CongruenceTransform ct;
    TransformedSystem ts;

    explicit LinearContext(const QuadraticPHSystem& s)
        : sys(s), ct(congruence_from(s.Q())), ts(transform_system(s, ct)) {}
};

std::shared_ptr<const LinearContext> make_context(const QuadraticPHSystem& sys) {
    return std::make_shared<const LinearContext>(sys);
}

StepResult conservative_result(const LinearContext& c, Vector xt, double s) {
    StepResult r;
    r.H_value = TransformedSystem::hamiltonian(xt);
    r.y = c.ts.B.transpose() * xt;
    r.state = State{c.ct.from_transformed(xt), s};
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Substep solvers
// ---------------------------------------------------------------------------

SubflowSolver exact_dissipative_solver(const QuadraticPHSystem& sys, int quadrature_nodes) {
    if (sys.dim() > kDenseFlowLimit) throw DimensionError("exact_dissipative_solver: dimension exceeds the dense limit");
    auto ctx = make_context(sys);
    auto cache = std::make_shared<StepCache<LinearFlowPropagator>>();
    const Matrix A = -Matrix(ctx->ts.R);
    SubflowSolver s;
    s.kind = SubflowKind::dissipative;
    s.name = "exact_dissipative";
    s.advance = [ctx, cache, A, quadrature_nodes](const TimeAugmentedState& st, double h, const InputSignal& u) {
        const Vector xt0 = ctx->ct.to_transformed(st.x);
        if (h == 0.0) return conservative_result(*ctx, xt0, st.s);
        const auto prop = cache->get(h, [&] { return LinearFlowPropagator(A, ctx->ts.B, h, quadrature_nodes, true); });
        auto out = prop->advance(xt0, st.s, u);
        StepResult r = conservative_result(*ctx, std::move(out.x), st.s + h);
        r.energy_balance.supplied = out.supplied;
        r.energy_balance.dissipated = out.supplied - (r.H_value - TransformedSystem::hamiltonian(xt0));
        return r;
    };
    return s;
}

SubflowSolver exact_conservative_solver(const QuadraticPHSystem& sys) {
    if (sys.dim() > kDenseFlowLimit) throw DimensionError("exact_conservative_solver: dimension exceeds the dense limit");
    auto ctx = make_context(sys);
    auto cache = std::make_shared<StepCache<Matrix>>();
    SubflowSolver s;
    s.kind = SubflowKind::conservative;
    s.name = "exact_conservative";
    s.advance = [ctx, cache](const TimeAugmentedState& st, double h, const InputSignal&) {
        const auto E = cache->get(h, [&] { return matrix_exponential(h * Matrix(ctx->ts.J)); });
        return conservative_result(*ctx, *E * ctx->ct.to_transformed(st.x), st.s);
    };
    return s;
}

SubflowSolver midpoint_dissipative_solver(const QuadraticPHSystem& sys) {
    auto ctx = make_context(sys);
    auto cache = std::make_shared<StepCache<DissipativeMidpointStep>>();
    SubflowSolver s;
    s.kind = SubflowKind::dissipative;
    s.name = "midpoint_dissipative";
    s.advance = [ctx, cache](const TimeAugmentedState& st, double h, const InputSignal& u) {
        if (!(h > 0.0)) throw std::invalid_argument("midpoint_dissipative_solver: step size must be positive");
        const Index d = ctx->ts.ports();
        const Vector u0 = d > 0 ? u(st.s) : Vector(Vector::Zero(0));
        const Vector u1 = d > 0 ? u(st.s + h) : Vector(Vector::Zero(0));
        const auto step = cache->get(h, [&] { return DissipativeMidpointStep(ctx->ts.R, ctx->ts.B, h); });
        const Vector xt0 = ctx->ct.to_transformed(st.x);
        Vector xt1 = step->apply(xt0, u0, u1);
        // discrete ledger; grad H~ is the identity so the discrete gradient is the midpoint
        const Vector xm = 0.5 * (xt0 + xt1);
        StepResult r;
        r.y = ctx->ts.B.transpose() * xm;
        r.energy_balance.dissipated = h * xm.dot(ctx->ts.R * xm);
        if (d > 0) r.energy_balance.supplied = h * r.y.dot(0.5 * (u0 + u1));
        r.H_value = TransformedSystem::hamiltonian(xt1);
        r.state = State{ctx->ct.from_transformed(xt1), st.s + h};
        return r;
    };
    return s;
}

SubflowSolver conservative_solver(const QuadraticPHSystem& sys, MultirateConfig cfg, LinearSolverChoice solver) {
    if (cfg.m < 1) throw std::invalid_argument("conservative_solver: m must be >= 1");
    auto ctx = make_context(sys);
    auto cache = std::make_shared<StepCache<ConservativeStepper>>();
    SubflowSolver s;
    s.kind = SubflowKind::conservative;
    s.name = "conservative_m" + std::to_string(cfg.m);
    s.advance = [ctx, cache, cfg, solver](const TimeAugmentedState& st, double h, const InputSignal&) {
        if (h == 0.0) return conservative_result(*ctx, ctx->ct.to_transformed(st.x), st.s);
        const auto stepper = cache->get(h, [&] { return ConservativeStepper(ctx->ts.J, h, cfg, solver); });
        return conservative_result(*ctx, stepper->advance(ctx->ct.to_transformed(st.x)), st.s);
    };
    return s;
}

namespace {

template <class Sys>
SubflowSolver dg_solver(const Sys& sys, SubflowKind kind, DiscreteGradientStepConfig cfg) {
    auto held = std::make_shared<const Sys>(sys);
    SubflowSolver s;
    s.kind = kind;
    s.name = kind == SubflowKind::conservative ? "dg_conservative" : "dg_dissipative";
    const FlowPart part = kind == SubflowKind::conservative ? FlowPart::conservative : FlowPart::dissipative;
    s.advance = [held, cfg, part](const TimeAugmentedState& st, double h, const InputSignal& u) {
        return discrete_gradient_step(*held, st, h, u, cfg, part);
    };
    return s;
}

}  // namespace

SubflowSolver discrete_gradient_solver(const QuadraticPHSystem& sys, SubflowKind kind,
                                       DiscreteGradientStepConfig cfg) {
    return dg_solver(sys, kind, cfg);
}

SubflowSolver discrete_gradient_solver(const NonlinearPHSystem& sys, SubflowKind kind,
                                       DiscreteGradientStepConfig cfg) {
    return dg_solver(sys, kind, cfg);
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

StepResult strang_step(const StrangScheme& scheme, const PhsModel& sys, const TimeAugmentedState& state,
                       const InputSignal& u, double h) {
    if (scheme.dissipative.kind != SubflowKind::dissipative || scheme.conservative.kind != SubflowKind::conservative) {
        throw std::invalid_argument("strang_step: substep solvers do not match their roles");
    }
    require_size(state.x, sys.dim(), "strang_step");
    const bool d_outer = scheme.order == SubstepOrder::dissipative_outer;
    const SubflowSolver& outer = d_outer ? scheme.dissipative : scheme.conservative;
    const SubflowSolver& inner = d_outer ? scheme.conservative : scheme.dissipative;
    const SubflowSolver* seq[3] = {&outer, &inner, &outer};
    const double len[3] = {0.5 * h, h, 0.5 * h};

    TimeAugmentedState cur = state;
    EnergyBalance ledger;
    for (int i = 0; i < 3; ++i) {
        StepResult sub;
        try {
            sub = seq[i]->advance(cur, len[i], u);
        } catch (const StepFailure& e) {
            throw StepFailure(std::string("substep ") + std::to_string(i) + " (" + seq[i]->name + "): " + e.what(), i,
                              e.last_residual());
        }
        ledger += sub.energy_balance;
        cur = TimeAugmentedState{std::move(sub.state.x), sub.state.t};
    }
    StepResult r;
    r.y = sys.output(cur.x);
    r.H_value = sys.hamiltonian(cur.x);
    r.energy_balance = ledger;
    r.state = State{std::move(cur.x), cur.s};
    return r;
}

Trajectory integrate(const StrangScheme& scheme, const PhsModel& sys, const Vector& x0, double t0, double t_end,
                     double h, const InputSignal& u) {
    require_size(x0, sys.dim(), "integrate");
    if (t_end < t0) throw std::invalid_argument("integrate: t_end must not precede t0");
    if (!(h > 0.0)) throw std::invalid_argument("integrate: step size must be positive");

    Trajectory traj;
    StepResult first;
    first.state = State{x0, t0};
    first.y = sys.output(x0);
    first.H_value = sys.hamiltonian(x0);
    traj.steps.push_back(first);
    traj.cumulative.emplace_back();

    const double span = t_end - t0;
    const double ratio = span / h;
    long n_full = static_cast<long>(std::floor(ratio));
    double last = span - static_cast<double>(n_full) * h;
    if (std::abs(ratio - std::round(ratio)) <= 1e-12 * std::max(1.0, ratio)) {
        n_full = std::lround(ratio);
        last = 0.0;
    }
    const long n_steps = n_full + (last > 0.0 ? 1 : 0);
    traj.steps.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.cumulative.reserve(static_cast<std::size_t>(n_steps) + 1);

    TimeAugmentedState cur{x0, t0};
    for (long k = 0; k < n_steps; ++k) {
        const double hk = k < n_full ? h : last;
        StepResult r;
        try {
            r = strang_step(scheme, sys, cur, u, hk);
        } catch (const StepFailure& e) {
            throw IntegrationFailure(e, std::move(traj));
        }
        // pin the clock to the grid so rounding does not accumulate
        r.state.t = k + 1 == n_steps ? t_end : t0 + static_cast<double>(k + 1) * h;
        cur = TimeAugmentedState{r.state.x, r.state.t};
        traj.cumulative.push_back(traj.cumulative.back() + r.energy_balance);
        traj.steps.push_back(std::move(r));
    }
    return traj;
}

std::pair<Vector, Vector> split_rhs(const PhsModel& sys, const Vector& x, double t, const InputSignal& u) {
    require_size(x, sys.dim(), "split_rhs");
    const Vector g = sys.gradient(x);
    Vector f1 = sys.apply_J(x, g);
    Vector f2 = -sys.apply_R(x, g);
    if (sys.ports() > 0) f2 += sys.apply_B(x, u(t));
    return {std::move(f1), std::move(f2)};
}

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

int SchemeVariant::micro_steps() const {
    if (m > 0) return m;
    switch (kind) {
        case VariantKind::multirate_nested: return 8;
        case VariantKind::multirate_highorder: return 4;
        default: return 1;
    }
}

std::string SchemeVariant::label() const {
    switch (kind) {
        case VariantKind::exact_splitting: return "exact_splitting";
        case VariantKind::dg_splitting: return "dg_splitting";
        case VariantKind::multirate_nested: return "multirate_nested{" + std::to_string(micro_steps()) + "}";
        case VariantKind::multirate_highorder: return "multirate_highorder{" + std::to_string(micro_steps()) + "}";
    }
    return {};
}

SchemeVariant SchemeVariant::parse(const std::string& text) {
    std::string name = text;
    int m = 0;
    if (const auto brace = text.find('{'); brace != std::string::npos) {
        if (text.back() != '}') throw std::invalid_argument("scheme variant: malformed '" + text + "'");
        name = text.substr(0, brace);
        const std::string digits = text.substr(brace + 1, text.size() - brace - 2);
        std::size_t used = 0;
        try {
            m = std::stoi(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != digits.size() || digits.empty() || m < 1) {
            throw std::invalid_argument("scheme variant: micro-step count must be a positive integer in '" + text + "'");
        }
    }
    SchemeVariant v;
    v.m = m;
    if (name == "exact_splitting") v.kind = VariantKind::exact_splitting;
    else if (name == "dg_splitting") v.kind = VariantKind::dg_splitting;
    else if (name == "multirate_nested") v.kind = VariantKind::multirate_nested;
    else if (name == "multirate_highorder") v.kind = VariantKind::multirate_highorder;
    else throw std::invalid_argument("scheme variant: unknown name '" + name + "'");
    if (m > 0 && (v.kind == VariantKind::exact_splitting || v.kind == VariantKind::dg_splitting) && m != 1) {
        throw std::invalid_argument("scheme variant: '" + name + "' takes no micro-step count");
    }
    return v;
}

StrangScheme make_variant_scheme(const QuadraticPHSystem& sys, const SchemeVariant& variant,
                                 LinearSolverChoice solver) {
    switch (variant.kind) {
        case VariantKind::exact_splitting:
            return {exact_dissipative_solver(sys), exact_conservative_solver(sys)};
        case VariantKind::dg_splitting:
            return {midpoint_dissipative_solver(sys), conservative_solver(sys, {1, InnerScheme::discrete_gradient}, solver)};
        case VariantKind::multirate_nested:
            return {midpoint_dissipative_solver(sys),
                    conservative_solver(sys, {variant.micro_steps(), InnerScheme::discrete_gradient}, solver)};
        case VariantKind::multirate_highorder:
            return {midpoint_dissipative_solver(sys),
                    conservative_solver(sys, {variant.micro_steps(), InnerScheme::composition4}, solver)};
    }
    throw std::invalid_argument("make_variant_scheme: unknown variant");
}

}  // namespace phs
