#include "doctest.h"

#include "oracles/oracles.hpp"
#include "phs/benchmarks.hpp"
#include "phs/splitting.hpp"
#include "phs/system.hpp"
#include "phs/system_io.hpp"

#include <cmath>

using namespace phs;

namespace {

Matrix mat2(double a, double b, double c, double d) {
    Matrix M(2, 2);
    M << a, b, c, d;
    return M;
}

NonlinearPHSystem pendulum_like() {
    // H = (1 - cos q) + p^2 / 2 + x3^4 / 4, state-dependent damping on p
    NonlinearPHSystem s;
    s.n = 3;
    s.d = 1;
    s.H_of = [](const Vector& x) { return 1.0 - std::cos(x(0)) + 0.5 * x(1) * x(1) + 0.25 * std::pow(x(2), 4); };
    s.gradH_of = [](const Vector& x) {
        Vector g(3);
        g << std::sin(x(0)), x(1), std::pow(x(2), 3);
        return g;
    };
    s.J_of = [](const Vector& x) {
        Matrix J = Matrix::Zero(3, 3);
        J(0, 1) = 1.0;
        J(1, 2) = x(0);
        return Matrix(J - J.transpose());
    };
    s.R_of = [](const Vector& x) {
        Matrix R = Matrix::Zero(3, 3);
        R(1, 1) = 0.1 + x(1) * x(1);
        return R;
    };
    s.B_of = [](const Vector&) {
        Matrix B = Matrix::Zero(3, 1);
        B(1, 0) = 1.0;
        return B;
    };
    return s;
}

}  // namespace

TEST_CASE("validate_structure: canonical cases") {
    const Matrix I = Matrix::Identity(2, 2);
    const Matrix Z = Matrix::Zero(2, 2);
    CHECK(validate_structure(QuadraticPHSystem(mat2(0, 1, -1, 0), Z, Matrix(2, 0), I)).empty());

    const auto v = validate_structure(QuadraticPHSystem(mat2(0, 1, 1, 0), Z, Matrix(2, 0), I));
    REQUIRE(v.size() == 1);
    CHECK(v[0].matrix == "J");
    CHECK(v[0].property == "skew-symmetry");
    CHECK(v[0].defect == doctest::Approx(2.0));

    CHECK(validate_structure(build_two_mass()).empty());
}

TEST_CASE("validate_structure flags indefinite R and Q") {
    const Matrix J = mat2(0, 1, -1, 0);
    auto v = validate_structure(QuadraticPHSystem(J, mat2(1, 0, 0, -0.5), Matrix(2, 0), Matrix::Identity(2, 2)));
    REQUIRE(v.size() == 1);
    CHECK(v[0].matrix == "R");
    CHECK(v[0].property == "positive semi-definiteness");
    CHECK(v[0].defect == doctest::Approx(0.5));

    v = validate_structure(QuadraticPHSystem(J, Matrix::Zero(2, 2), Matrix(2, 0), mat2(1, 0, 0, 0)));
    REQUIRE(v.size() == 1);
    CHECK(v[0].matrix == "Q");

    v = validate_structure(QuadraticPHSystem(J, mat2(1, 0.5, 0, 1), Matrix(2, 0), Matrix::Identity(2, 2)));
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].property == "symmetry");
}

TEST_CASE("dimension mismatches are errors, not violations") {
    CHECK_THROWS_AS(QuadraticPHSystem(Matrix::Zero(2, 2), Matrix::Zero(3, 3), Matrix(2, 0), Matrix::Identity(2, 2)),
                    DimensionError);
    CHECK_THROWS_AS(QuadraticPHSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Identity(2, 2)),
                    DimensionError);
    const QuadraticPHSystem s(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix(2, 0), Matrix::Identity(2, 2));
    CHECK_THROWS_AS(s.hamiltonian(Vector::Zero(3)), DimensionError);
}

TEST_CASE("large sparse systems use the factorization probe") {
    const auto chain = build_msd_chain({.n_cells = 1500});  // n = 3000 > dense limit
    CHECK(validate_structure(chain).empty());
    SparseMatrix Rbad = chain.R();
    Rbad.coeffRef(5, 5) = -1.0;
    const auto v = validate_structure(QuadraticPHSystem(chain.J(), Rbad, chain.B(), chain.Q()));
    REQUIRE(v.size() == 1);
    CHECK(v[0].matrix == "R");
    CHECK(smallest_eigenvalue_estimate(Rbad) < 0.0);
}

TEST_CASE("hamiltonian") {
    const QuadraticPHSystem s(mat2(0, 1, -1, 0), Matrix::Zero(2, 2), Matrix(2, 0), Matrix::Identity(2, 2));
    CHECK(hamiltonian(s, Vector::Zero(2)) == 0.0);
    CHECK(hamiltonian(s, Vector::Map(std::array<double, 2>{3, 4}.data(), 2)) == 12.5);
    Vector e3 = Vector::Zero(5);
    e3(2) = 1.0;
    CHECK(hamiltonian(build_two_mass(), e3) == doctest::Approx(500.0).epsilon(1e-15));
    const auto nl = pendulum_like();
    Vector x(3);
    x << 0.3, -0.2, 1.1;
    CHECK(hamiltonian(nl, x) == doctest::Approx(nl.H_of(x)));
}

TEST_CASE("output") {
    const QuadraticPHSystem zero_b(mat2(0, 1, -1, 0), Matrix::Zero(2, 2), Matrix::Zero(2, 3), Matrix::Identity(2, 2));
    CHECK(output(zero_b, Vector::Ones(2)) == Vector::Zero(3));

    const QuadraticPHSystem id(mat2(0, 1, -1, 0), Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector x(2);
    x << 0.7, -1.3;
    CHECK(output(id, x) == x);

    const auto d = oracle::random_system(5, 2, 11, true);
    const auto sys = oracle::to_system(d);
    std::mt19937_64 rng(12);
    const Vector xr = oracle::random_vector(5, rng);
    Vector ref = Vector::Zero(2);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 5; ++i) ref(j) += d.B(i, j) * d.Q(i, i) * xr(i);
    CHECK((output(sys, xr) - ref).norm() <= 1e-14 * ref.norm());
}

TEST_CASE("congruence_from: diagonal and dense routes") {
    const auto ct_i = congruence_from(SparseMatrix(Matrix::Identity(3, 3).sparseView()));
    CHECK(Matrix(ct_i.Q_half).isApprox(Matrix::Identity(3, 3), 0.0));
    CHECK(ct_i.provenance == CongruenceProvenance::diagonal);

    const auto ct_d = congruence_from(SparseMatrix(mat2(4, 0, 0, 9).sparseView()));
    CHECK(Matrix(ct_d.Q_half) == mat2(2, 0, 0, 3));

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto d = oracle::random_system(8, 0, seed);
        const auto ct = congruence_from(SparseMatrix(d.Q.sparseView()));
        CHECK(ct.provenance == CongruenceProvenance::eigendecomposition);
        const Matrix Qh = ct.Q_half, Qhi = ct.Q_half_inv;
        CHECK((Qh * Qh - d.Q).norm() <= 1e-10 * d.Q.norm());
        CHECK((Qh - Qh.transpose()).norm() <= 1e-14 * Qh.norm());
        CHECK((Qhi * Qh - Matrix::Identity(8, 8)).norm() <= 1e-10);
        CHECK((Qh - oracle::sqrtm_spd(d.Q)).norm() <= 1e-10 * Qh.norm());
    }
}

TEST_CASE("congruence_from rejects a non-SPD Q with its smallest eigenvalue") {
    try {
        congruence_from(SparseMatrix(mat2(2, 0, 0, -3).sparseView()));
        FAIL("expected DefinitenessError");
    } catch (const DefinitenessError& e) {
        CHECK(e.smallest_eigenvalue() == doctest::Approx(-3.0));
    }
    try {
        congruence_from(SparseMatrix(mat2(1, 2, 2, 1).sparseView()));
        FAIL("expected DefinitenessError");
    } catch (const DefinitenessError& e) {
        CHECK(e.smallest_eigenvalue() == doctest::Approx(-1.0));
    }
}

TEST_CASE("transform_system on the two-mass oscillator reproduces the displayed J~ and R~") {
    const TwoMassParams p;
    const auto sys = build_two_mass(p);
    const auto ts = transform_system(sys, congruence_from(sys.Q()));
    const Matrix Jt = ts.J;
    Matrix expect = Matrix::Zero(5, 5);
    expect(0, 3) = std::sqrt(p.K1 / p.m1);
    expect(1, 3) = std::sqrt(p.K / p.m1);
    expect(1, 4) = -std::sqrt(p.K / p.m2);
    expect(2, 4) = std::sqrt(p.K2 / p.m2);
    expect = (expect - expect.transpose()).eval();
    CHECK((Jt - expect).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(Jt(0, 3) == doctest::Approx(0.2236067977).epsilon(1e-9));
    Vector rdiag(5);
    rdiag << 0, 0, 0, p.r1 / p.m1, p.r2 / p.m2;
    CHECK((Matrix(ts.R) - Matrix(rdiag.asDiagonal())).cwiseAbs().maxCoeff() <= 1e-17);
    CHECK(ts.B.cols() == 0);
}

TEST_CASE("transform_system: identity congruence and random property checks") {
    const auto d0 = oracle::random_system(6, 2, 3);
    const QuadraticPHSystem s_id(d0.J, d0.R, d0.B, Matrix::Identity(6, 6));
    const auto ts_id = transform_system(s_id, congruence_from(s_id.Q()));
    CHECK(Matrix(ts_id.J) == d0.J);
    CHECK(Matrix(ts_id.R) == d0.R);
    CHECK(ts_id.B == d0.B);

    std::mt19937_64 rng(99);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto sys = oracle::to_system(oracle::random_system(10, 2, seed));
        const auto ct = congruence_from(sys.Q());
        const auto ts = transform_system(sys, ct);
        CHECK(skewness_defect(ts.J) <= 1e-12 * ts.J.norm());
        CHECK(smallest_eigenvalue_estimate(ts.R) >= -1e-12 * ts.R.norm());
        for (int k = 0; k < 5; ++k) {
            const Vector x = oracle::random_vector(10, rng);
            const double H = sys.hamiltonian(x);
            CHECK(TransformedSystem::hamiltonian(ct.to_transformed(x)) == doctest::Approx(H).epsilon(1e-10));
            CHECK((ct.from_transformed(ct.to_transformed(x)) - x).norm() <= 1e-10 * x.norm());
        }
    }
}

TEST_CASE("x^T J x vanishes for valid systems") {
    std::mt19937_64 rng(5);
    const auto sys = oracle::to_system(oracle::random_system(12, 0, 8));
    const double jn = Matrix(sys.J()).norm();
    for (int k = 0; k < 100; ++k) {
        const Vector x = oracle::random_vector(12, rng);
        CHECK(std::abs(x.dot(sys.J() * x)) <= 1e-12 * jn * x.squaredNorm());
    }
}

TEST_CASE("nonlinear model: structure and gradient checks") {
    const auto s = pendulum_like();
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
        const Vector x = oracle::random_vector(3, rng);
        CHECK(validate_structure_at(s, x).empty());
        CHECK(gradient_consistency_defect(s, x) <= 1e-6);
    }
    NonlinearPHSystem bad = s;
    bad.gradH_of = [](const Vector& x) { return Vector(2.0 * x); };
    CHECK(gradient_consistency_defect(bad, Vector::Ones(3)) > 1e-3);
    bad = s;
    bad.R_of = [](const Vector&) { return Matrix(-Matrix::Identity(3, 3)); };
    CHECK_FALSE(validate_structure_at(bad, Vector::Ones(3)).empty());
}

TEST_CASE("input signals") {
    CHECK(InputSignal::zero(3)(1.5) == Vector::Zero(3));
    Vector c(2);
    c << 1.0, -2.0;
    CHECK(InputSignal::constant(c)(7.0) == c);
    const auto s = InputSignal::sine(2, 3.0, 0.25);
    CHECK(s(1.0)(0) == doctest::Approx(3.0));
    CHECK(s(1.0)(1) == doctest::Approx(3.0));
    CHECK(s(0.0).norm() == 0.0);
}

TEST_CASE("dissipativity_ledger") {
    // exact conservative flow, no input
    const auto d = oracle::random_system(6, 0, 21);
    const QuadraticPHSystem cons(d.J, Matrix::Zero(6, 6), d.B, d.Q);
    auto scheme = StrangScheme{exact_dissipative_solver(cons), exact_conservative_solver(cons)};
    std::mt19937_64 rng(1);
    const Vector x0 = oracle::random_vector(6, rng);
    auto traj = integrate(scheme, cons, x0, 0.0, 2.0, 0.1, InputSignal::zero(0));
    auto led = dissipativity_ledger(cons, traj.steps);
    CHECK(std::abs(led.lhs) <= 1e-12 * cons.hamiltonian(x0));
    CHECK(led.bound == 0.0);
    CHECK(led.satisfied);

    // damped two-mass oscillator, reference-exact integration
    const auto tm = build_two_mass();
    scheme = make_variant_scheme(tm, {VariantKind::exact_splitting, 0});
    traj = integrate(scheme, tm, two_mass_default_x0(), 0.0, 10.0, 0.05, InputSignal::zero(0));
    led = dissipativity_ledger(tm, traj.steps);
    CHECK(led.lhs < 0.0);
    CHECK(led.bound == 0.0);
    CHECK(led.satisfied);

    CHECK_THROWS_AS(dissipativity_ledger(tm, std::span<const StepResult>{}), std::invalid_argument);
}

TEST_CASE("system JSON round trip and generators") {
    const auto sys = oracle::to_system(oracle::random_system(4, 2, 31));
    const auto back = system_from_json(system_to_json(sys));
    CHECK(Matrix(back.J()) == Matrix(sys.J()));
    CHECK(Matrix(back.R()) == Matrix(sys.R()));
    CHECK(back.B() == sys.B());
    CHECK(Matrix(back.Q()) == Matrix(sys.Q()));

    const auto gen = system_from_json(nlohmann::json::parse(R"({"generator": "two_mass", "params": {"r1": 0}})"));
    CHECK(gen.R().coeff(3, 3) == 0.0);
    CHECK(gen.R().coeff(4, 4) == 2.0);
    const auto chain = system_from_json(nlohmann::json::parse(R"({"generator": "msd_chain", "params": {"n_cells": 3}})"));
    CHECK(chain.dim() == 6);

    CHECK_THROWS_AS(system_from_json(nlohmann::json::parse(R"({"n": 2, "J": [[0, 1]], "R": [], "Q": []})")), ConfigError);
    CHECK_THROWS_AS(system_from_json(nlohmann::json::parse(R"({"generator": "nope"})")), ConfigError);
    CHECK_THROWS_AS(system_from_json(nlohmann::json::parse(R"({"generator": "two_mass", "params": {"m3": 1}})")),
                    ConfigError);
    CHECK_THROWS_AS(system_from_json(nlohmann::json::parse(R"({"generator": "two_mass", "params": {"m1": -1}})")),
                    ConfigError);
}
