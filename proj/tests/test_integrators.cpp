#include "doctest.h"

#include "oracles/oracles.hpp"
#include "phs/integrators.hpp"
#include "phs/linear_flow.hpp"

#include <cmath>

using namespace phs;

namespace {

Matrix dense(const SparseMatrix& A) { return Matrix(A); }

// Quartic potential with state-dependent J and R. Gradients are polynomials of
// degree <= 3, so a 3-node Gauss rule makes the discrete gradient exact.
NonlinearPHSystem quartic_model() {
    NonlinearPHSystem s;
    s.n = 3;
    s.d = 1;
    s.H_of = [](const Vector& x) {
        return 0.5 * x(0) * x(0) + 0.25 * std::pow(x(0), 4) + 0.5 * x(1) * x(1) + 0.25 * std::pow(x(2), 4);
    };
    s.gradH_of = [](const Vector& x) {
        Vector g(3);
        g << x(0) + std::pow(x(0), 3), x(1), std::pow(x(2), 3);
        return g;
    };
    s.J_of = [](const Vector& x) {
        Matrix J = Matrix::Zero(3, 3);
        J(0, 1) = 1.0;
        J(1, 2) = 1.0 + 0.5 * x(0);
        return Matrix(J - J.transpose());
    };
    s.R_of = [](const Vector& x) {
        Matrix R = Matrix::Zero(3, 3);
        R(1, 1) = 0.2 + x(1) * x(1);
        return R;
    };
    s.B_of = [](const Vector&) {
        Matrix B = Matrix::Zero(3, 1);
        B(1, 0) = 1.0;
        return B;
    };
    return s;
}

TransformedSystem transformed(const QuadraticPHSystem& sys) { return transform_system(sys, congruence_from(sys.Q())); }

}  // namespace

TEST_CASE("avf discrete gradient") {
    const auto d = oracle::random_system(6, 2, 1);
    const auto sys = oracle::to_system(d);
    std::mt19937_64 rng(2);
    const Vector a = oracle::random_vector(6, rng), b = oracle::random_vector(6, rng);
    CHECK((avf_discrete_gradient(sys, a, b) - d.Q * (a + b) / 2).norm() <= 1e-14 * d.Q.norm() * (a + b).norm());
    // the generic quadrature route agrees for quadratic H
    CHECK((avf_discrete_gradient(static_cast<const PhsModel&>(sys), a, b, 3) - d.Q * (a + b) / 2).norm() <=
          1e-12 * (d.Q * (a + b)).norm());
    // discrete gradient property
    CHECK(avf_discrete_gradient(sys, a, b).dot(b - a) ==
          doctest::Approx(sys.hamiltonian(b) - sys.hamiltonian(a)).epsilon(1e-12));

    // x^4/4 with 3 nodes: int_0^1 ((1-s)a + s b)^3 ds = (b^4 - a^4) / (4 (b - a))
    const auto nl = quartic_model();
    Vector x0(3), x1(3);
    x0 << 0.1, 0.2, -0.7;
    x1 << 0.4, -0.3, 1.3;
    const Vector g = avf_discrete_gradient(nl, x0, x1, 3);
    CHECK(g(2) == doctest::Approx((std::pow(1.3, 4) - std::pow(-0.7, 4)) / (4 * 2.0)).epsilon(1e-14));
    CHECK(g.dot(x1 - x0) == doctest::Approx(nl.hamiltonian(x1) - nl.hamiltonian(x0)).epsilon(1e-13));
    // identical endpoints give the gradient itself
    CHECK((avf_discrete_gradient(nl, x0, x0, 3) - nl.gradient(x0)).norm() <= 1e-15);
}

TEST_CASE("discrete gradient step equals the dense implicit midpoint rule") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Index n = 2 + static_cast<Index>(seed % 9);
        const Index d = static_cast<Index>(seed % 3);
        const auto ds = oracle::random_system(n, d, seed, seed % 2 == 0);
        const auto sys = oracle::to_system(ds);
        std::mt19937_64 rng(seed + 1000);
        const Vector x0 = oracle::random_vector(n, rng);
        const Vector u0 = oracle::random_vector(d, rng), u1 = oracle::random_vector(d, rng);
        const double h = 0.05 + 0.01 * static_cast<double>(seed);
        const double s0 = 0.3;
        InputSignal u{[=](double t) { return Vector(u0 + (t - s0) / h * (u1 - u0)); }, "linear"};
        const StepResult r = discrete_gradient_step(sys, {x0, s0}, h, u);

        const Matrix A = (ds.J - ds.R) * ds.Q;
        const Vector ref = oracle::midpoint_step(A, ds.B, x0, h, 0.5 * (u0 + u1));
        CHECK((r.state.x - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
        CHECK(r.state.t == doctest::Approx(s0 + h));
        // discrete energy identity H1 - H0 = -dissipated + supplied
        const double H0 = sys.hamiltonian(x0);
        CHECK(std::abs(r.H_value - H0 + r.energy_balance.dissipated - r.energy_balance.supplied) <=
              1e-10 * (1.0 + std::abs(H0)));
        CHECK(r.energy_balance.dissipated >= 0.0);
        // discrete output at the midpoint
        const Vector dg = ds.Q * (x0 + r.state.x) / 2;
        CHECK((r.y - ds.B.transpose() * dg).norm() <= 1e-12 * (1.0 + dg.norm()));
    }
}

TEST_CASE("conservative part keeps H and the clock, dissipative part decreases H") {
    const auto ds = oracle::random_system(8, 2, 7);
    const auto sys = oracle::to_system(ds);
    std::mt19937_64 rng(8);
    const Vector x0 = oracle::random_vector(8, rng);
    const auto u = InputSignal::sine(2, 1.0, 0.5);
    const double H0 = sys.hamiltonian(x0);

    const auto c = discrete_gradient_step(sys, {x0, 1.5}, 0.2, u, {}, FlowPart::conservative);
    CHECK(c.state.t == 1.5);
    CHECK(std::abs(c.H_value - H0) <= 1e-12 * (1.0 + H0));
    CHECK(c.energy_balance.dissipated == 0.0);
    CHECK(c.energy_balance.supplied == 0.0);

    const QuadraticPHSystem unforced(ds.J, ds.R, Matrix(8, 0), ds.Q);
    const auto dsp = discrete_gradient_step(unforced, {x0, 1.5}, 0.2, InputSignal::zero(0), {}, FlowPart::dissipative);
    CHECK(dsp.state.t == doctest::Approx(1.7));
    CHECK(dsp.H_value <= H0);

    // R = 0: energy conserved by the full step
    const QuadraticPHSystem lossless(ds.J, Matrix::Zero(8, 8), Matrix(8, 0), ds.Q);
    const auto l = discrete_gradient_step(lossless, {x0, 0.0}, 0.7, InputSignal::zero(0));
    CHECK(std::abs(l.H_value - H0) <= 1e-12 * (1.0 + H0));

    // J = 0, no input: strictly dissipating when R Q x0 != 0
    const QuadraticPHSystem damped(Matrix::Zero(8, 8), ds.R, Matrix(8, 0), ds.Q);
    const auto dm = discrete_gradient_step(damped, {x0, 0.0}, 0.7, InputSignal::zero(0));
    CHECK(dm.H_value < H0);
}

TEST_CASE("discrete gradient step: argument and convergence errors") {
    const auto sys = oracle::to_system(oracle::random_system(4, 0, 3));
    const Vector x0 = Vector::Ones(4);
    CHECK_THROWS_AS(discrete_gradient_step(sys, {x0, 0.0}, -0.1, InputSignal::zero(0)), std::invalid_argument);
    CHECK_THROWS_AS(discrete_gradient_step(sys, {x0, 0.0}, 0.0, InputSignal::zero(0)), std::invalid_argument);
    CHECK_THROWS_AS(discrete_gradient_step(sys, {Vector::Ones(3), 0.0}, 0.1, InputSignal::zero(0)), DimensionError);

    const auto nl = quartic_model();
    Vector y0(3);
    y0 << 1.0, 0.5, -1.0;
    DiscreteGradientStepConfig cfg;
    cfg.newton_max_iter = 0;
    CHECK_THROWS_AS(discrete_gradient_step(nl, {y0, 0.0}, 0.1, InputSignal::zero(1), cfg), StepFailure);
}

TEST_CASE("nonlinear discrete gradient step satisfies the energy identity") {
    const auto nl = quartic_model();
    const auto u = InputSignal::sine(1, 0.8, 0.3);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x0 = oracle::random_vector(3, rng);
        const double H0 = nl.hamiltonian(x0);
        const auto r = discrete_gradient_step(nl, {x0, 0.1 * trial}, 0.05, u);
        CHECK(std::abs(r.H_value - H0 + r.energy_balance.dissipated - r.energy_balance.supplied) <=
              1e-10 * (1.0 + std::abs(H0)));
        const auto c = discrete_gradient_step(nl, {x0, 0.0}, 0.05, u, {}, FlowPart::conservative);
        CHECK(std::abs(c.H_value - H0) <= 1e-10 * (1.0 + std::abs(H0)));
    }
}

TEST_CASE("Cayley step rotates a planar generator by 2 atan(w h / 2)") {
    const double w = 2.5;
    const SparseMatrix J = oracle::rotation_generator(w).sparseView();
    Vector x0(2);
    x0 << 1.0, 0.0;
    for (double h : {0.01, 0.5, 3.0}) {
        const Vector ref = oracle::rotation(2.0 * std::atan(w * h / 2.0)) * x0;
        for (auto kind : {LinearSolverKind::direct, LinearSolverKind::gmres, LinearSolverKind::cayley_arnoldi}) {
            const CayleyStep step(J, h, {.kind = kind, .tol = 1e-14});
            CHECK((step.apply(x0) - ref).norm() <= 1e-13);
        }
    }
    CHECK_THROWS_AS(CayleyStep(LinearOperator::from_sparse(J, OperatorProperty::skew_symmetric), 0.1,
                               LinearSolverChoice{.kind = LinearSolverKind::direct}),
                    std::invalid_argument);
}

TEST_CASE("Cayley step: solvers agree with a dense oracle") {
    const auto ds = oracle::random_system(40, 0, 21);
    const auto ts = transformed(oracle::to_system(ds));
    std::mt19937_64 rng(22);
    const Vector x0 = oracle::random_vector(40, rng);
    const double h = 0.1;
    const Matrix Jt = dense(ts.J);
    const Matrix I = Matrix::Identity(40, 40);
    const Vector ref = (I - 0.5 * h * Jt).partialPivLu().solve((I + 0.5 * h * Jt) * x0);
    for (auto kind : {LinearSolverKind::direct, LinearSolverKind::gmres, LinearSolverKind::cayley_arnoldi}) {
        KrylovReport rep;
        const Vector x1 = midpoint_conservative_linear(ts, x0, h, {.kind = kind, .tol = 1e-13}, &rep);
        CHECK((x1 - ref).norm() <= 1e-10 * ref.norm());
        if (kind == LinearSolverKind::direct) CHECK(rep.iterations == 0);
        else CHECK(rep.iterations > 0);
    }
    // non-convergence surfaces as StepFailure
    CHECK_THROWS_AS(midpoint_conservative_linear(ts, x0, h, {.kind = LinearSolverKind::gmres, .tol = 1e-15, .maxit = 2}),
                    StepFailure);
}

TEST_CASE("dissipative midpoint step: closed form, contraction, definiteness") {
    // scalar R~ = r: x1 = (1 - h_half r / 2) / (1 + h_half r / 2) x0; with h_half = h / 2
    // this is (1 - h r / 4) / (1 + h r / 4)
    const double r = 3.0, h = 0.4;
    SparseMatrix R1(1, 1);
    R1.insert(0, 0) = r;
    const DissipativeMidpointStep step(R1, Matrix(1, 0), h / 2);
    Vector x0(1);
    x0 << 2.0;
    CHECK(step.apply(x0, Vector(0), Vector(0))(0) ==
          doctest::Approx(2.0 * (1 - h * r / 4) / (1 + h * r / 4)).epsilon(1e-15));

    const auto ds = oracle::random_system(12, 0, 31);
    const auto ts = transformed(oracle::to_system(ds));
    std::mt19937_64 rng(32);
    for (int k = 0; k < 10; ++k) {
        const Vector v = oracle::random_vector(12, rng);
        const double hh = 0.01 * std::pow(3.0, k);
        const Vector w = midpoint_dissipative_linear(ts, v, hh, Vector(0), Vector(0));
        CHECK(w.norm() <= v.norm() * (1 + 1e-14));
        const Matrix Rt = dense(ts.R);
        const Matrix I = Matrix::Identity(12, 12);
        const Vector ref = (I + 0.5 * hh * Rt).partialPivLu().solve((I - 0.5 * hh * Rt) * v);
        CHECK((w - ref).norm() <= 1e-12 * (1 + ref.norm()));
    }

    // forced: B~ (u0 + u1) / 2 enters with weight h_half
    SparseMatrix Z(1, 1);
    Matrix B1(1, 1);
    B1 << 1.0;
    const DissipativeMidpointStep forced(Z, B1, 0.3);
    CHECK(forced.apply(x0, Vector::Constant(1, 1.0), Vector::Constant(1, 3.0))(0) == doctest::Approx(2.0 + 0.3 * 2.0));

    SparseMatrix bad(1, 1);
    bad.insert(0, 0) = -100.0;
    CHECK_THROWS_AS(DissipativeMidpointStep(bad, Matrix(1, 0), 0.1), DefinitenessError);
}

TEST_CASE("exact linear flows against independent exponentials") {
    const auto ds = oracle::random_system(7, 2, 41);
    const auto sys = oracle::to_system(ds);
    const auto ts = transformed(sys);
    std::mt19937_64 rng(42);
    const Vector x0 = oracle::random_vector(7, rng);
    const Vector uc = oracle::random_vector(2, rng);
    const auto u = InputSignal::constant(uc);
    const double h = 0.37;

    const Matrix Jt = dense(ts.J), Rt = dense(ts.R);
    // the input integral is a Gauss rule; 12 nodes resolve it to rounding here
    CHECK((exact_linear_flow(ts, x0, h, FlowPart::full, u, 0.0, 12) -
           oracle::constant_input_flow(Jt - Rt, ts.B, uc, x0, h)).norm() <= 1e-12 * (1 + x0.norm()));
    CHECK((exact_linear_flow(ts, x0, h, FlowPart::full, u) -
           oracle::constant_input_flow(Jt - Rt, ts.B, uc, x0, h)).norm() <= 1e-8 * (1 + x0.norm()));
    CHECK((exact_linear_flow(ts, x0, h, FlowPart::dissipative, u) -
           oracle::constant_input_flow(-Rt, ts.B, uc, x0, h)).norm() <= 1e-12 * (1 + x0.norm()));
    const Vector c = exact_linear_flow(ts, x0, h, FlowPart::conservative, u);
    CHECK((c - oracle::expm(h * Jt) * x0).norm() <= 1e-12 * x0.norm());
    CHECK(c.norm() == doctest::Approx(x0.norm()).epsilon(1e-13));

    // original coordinates
    const Vector xo = exact_linear_flow(sys, x0, h, FlowPart::full, u, 0.0, 12);
    CHECK((xo - oracle::constant_input_flow((ds.J - ds.R) * ds.Q, ds.B, uc, x0, h)).norm() <= 1e-11 * (1 + x0.norm()));

    // negative h inverts the flow
    const Vector back = exact_linear_flow(ts, exact_linear_flow(ts, x0, h, FlowPart::dissipative, InputSignal::zero(2)),
                                          -h, FlowPart::dissipative, InputSignal::zero(2));
    CHECK((back - x0).norm() <= 1e-12 * x0.norm());

    // time-varying input against many fine midpoint steps
    const auto us = InputSignal::sine(2, 1.0, 0.7);
    const Vector fine_exact = exact_linear_flow(ts, x0, h, FlowPart::full, us, 0.2, 12);
    auto fine = [&](int steps) {
        Vector z = x0;
        const double dt = h / steps;
        for (int k = 0; k < steps; ++k) {
            const double t = 0.2 + k * dt;
            z = oracle::midpoint_step(Jt - Rt, ts.B, z, dt, 0.5 * (us(t) + us(t + dt)));
        }
        return z;
    };
    // Richardson extrapolation of the second-order midpoint rule
    const Vector z = (4.0 * fine(4000) - fine(2000)) / 3.0;
    CHECK((fine_exact - z).norm() <= 1e-9 * (1 + z.norm()));

    CHECK(flow_generator(ts, FlowPart::conservative).isApprox(Jt));
    CHECK(flow_generator(ts, FlowPart::dissipative).isApprox(-Rt));
}

TEST_CASE("triple-jump weights") {
    const auto g = triple_jump_weights();
    CHECK(g[0] + g[1] + g[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g[0] == g[2]);
    CHECK(g[1] < 0.0);
    CHECK(g[0] == doctest::Approx(1.0 / (2.0 - std::cbrt(2.0))).epsilon(1e-15));
    // order conditions: sum g^3 = 0
    CHECK(std::abs(2 * std::pow(g[0], 3) + std::pow(g[1], 3)) <= 1e-14);
}

TEST_CASE("nested multirate equals m successive Cayley steps") {
    const auto ds = oracle::random_system(10, 0, 51);
    const auto ts = transformed(oracle::to_system(ds));
    std::mt19937_64 rng(52);
    const Vector x0 = oracle::random_vector(10, rng);
    const double h = 0.8;
    const int m = 16;
    const Matrix Jt = dense(ts.J);
    const Matrix I = Matrix::Identity(10, 10);
    const double hm = h / m;
    const Matrix C = (I - 0.5 * hm * Jt).partialPivLu().solve(I + 0.5 * hm * Jt);
    Vector ref = x0;
    for (int k = 0; k < m; ++k) ref = C * ref;
    const Vector x1 = nested_multirate_conservative(ts, x0, h, {.m = m});
    CHECK((x1 - ref).norm() <= 1e-12 * x0.norm());
    CHECK(x1.norm() == doctest::Approx(x0.norm()).epsilon(1e-13));
    // m = 1 is a single Cayley step
    CHECK((nested_multirate_conservative(ts, x0, h, {.m = 1}) - midpoint_conservative_linear(ts, x0, h)).norm() <=
          1e-14 * x0.norm());
    // exact inner scheme
    CHECK((nested_multirate_conservative(ts, x0, h, {.m = 4, .inner_scheme = InnerScheme::exact}) -
           oracle::expm(h * Jt) * x0).norm() <= 1e-12 * x0.norm());
    CHECK_THROWS_AS(nested_multirate_conservative(ts, x0, h, {.m = 0}), std::invalid_argument);
}

TEST_CASE("composition4 is fourth order and norm preserving") {
    const Matrix J = oracle::rotation_generator(1.0);
    const QuadraticPHSystem sys(J, Matrix::Zero(2, 2), Matrix(2, 0), Matrix::Identity(2, 2));
    const auto ts = transformed(sys);
    Vector x0(2);
    x0 << 1.0, 0.0;
    const double T = 2.0;
    std::vector<double> hs, errs;
    for (int steps : {10, 20, 40, 80}) {
        const double h = T / steps;
        Vector x = x0;
        for (int k = 0; k < steps; ++k) x = composition4_conservative(ts, x, h);
        hs.push_back(h);
        errs.push_back((x - oracle::rotation(T) * x0).norm());
        CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
    const double p = oracle::slope(hs, errs);
    CHECK(p >= 3.8);
    CHECK(p <= 4.2);
}

TEST_CASE("ConservativeStepper matrix-free and assembled agree") {
    const auto ds = oracle::random_system(30, 0, 61);
    const auto ts = transformed(oracle::to_system(ds));
    std::mt19937_64 rng(62);
    const Vector x0 = oracle::random_vector(30, rng);
    const LinearSolverChoice arn{.kind = LinearSolverKind::cayley_arnoldi, .tol = 1e-13};
    for (auto inner : {InnerScheme::discrete_gradient, InnerScheme::composition4}) {
        const ConservativeStepper a(ts.J, 0.2, {.m = 3, .inner_scheme = inner});
        const ConservativeStepper b(LinearOperator::from_sparse(ts.J, OperatorProperty::skew_symmetric), 0.2,
                                    {.m = 3, .inner_scheme = inner}, arn);
        std::vector<KrylovReport> reps;
        const Vector xb = b.advance(x0, &reps);
        CHECK((a.advance(x0) - xb).norm() <= 1e-10 * x0.norm());
        CHECK(reps.size() == (inner == InnerScheme::composition4 ? 9u : 3u));
    }
    CHECK_THROWS_AS(ConservativeStepper(LinearOperator::from_sparse(ts.J, OperatorProperty::skew_symmetric), 0.2,
                                        {.m = 1, .inner_scheme = InnerScheme::exact}, arn),
                    std::invalid_argument);
}
