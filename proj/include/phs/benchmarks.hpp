#pragma once

// Benchmark systems: the damped two-mass oscillator and a mass-spring-damper
// chain, plus the dense reference solution used as ground truth.

#include "phs/krylov.hpp"
#include "phs/system.hpp"

#include <cstdint>

namespace phs {

struct TwoMassParams {
    double m1 = 200.0, m2 = 200.0;
    double K1 = 10.0, K2 = 1000.0, K = 10.0;
    double r1 = 5.0, r2 = 2.0;
};

/// n = 5, x = (q1, q1 - q2, q2, p1, p2), R = diag(0, 0, 0, r1, r2),
/// Q = diag(K1, K, K2, 1/m1, 1/m2), no ports. Throws std::invalid_argument for
/// non-positive parameters (r1 = r2 = 0 is allowed).
QuadraticPHSystem build_two_mass(const TwoMassParams& p = {});

/// Initial state of the convergence study: both masses at rest, q1 = 1, q2 = 0.01.
Vector two_mass_default_x0();

/// Wall-anchored chain: spring i joins mass i to mass i-1 (the wall for i = 1),
/// damper i joins mass i to the ground. State (e1, p1, e2, p2, ...) with e_i the
/// elongation of spring i; H = sum k e_i^2 / 2 + p_i^2 / (2 m). Port j (j <
/// input_ports) is a force on mass j + 1.
struct MsdChainParams {
    Index n_cells = 500;
    double mass = 1.0;
    double stiffness = 1.0;
    double damping = 0.1;
    Index input_ports = 0;
};

QuadraticPHSystem build_msd_chain(const MsdChainParams& p = {});

/// Superdiagonal of the skew-tridiagonal J~ of the chain (length 2 n_cells - 1).
Vector msd_chain_transformed_superdiagonal(const MsdChainParams& p);
/// Matrix-free J~ of the chain (skew-tridiagonal kernel).
LinearOperator msd_chain_transformed_operator(const MsdChainParams& p);

/// rho(J~) for J~ = Q^{1/2} J Q^{1/2}: dense eigensolve up to kDenseCheckLimit,
/// Lanczos on -J~^2 above.
double transformed_spectral_radius(const QuadraticPHSystem& sys, std::uint64_t seed = 1);
double transformed_spectral_radius(const LinearOperator& Jt, std::uint64_t seed = 1);

struct ScaledSystem {
    QuadraticPHSystem system;
    double factor;  // Q -> factor * Q, so J~, R~ and all rates scale by factor
};

/// Rescales Q (stiffnesses times factor, masses divided by factor) so that
/// rho(J~) = target. Throws std::invalid_argument if target <= 0 or rho(J~) = 0.
ScaledSystem scale_to_spectral_radius(const QuadraticPHSystem& sys, double target, std::uint64_t seed = 1);
/// Same calibration expressed in chain parameters.
MsdChainParams scale_to_spectral_radius(const MsdChainParams& p, double target, std::uint64_t seed = 1);

/// exp(t (J - R) Q) x0 plus the input integral (Gauss-Legendre on panels of
/// length <= panel, 6 nodes each). Dense; throws DimensionError above 2000.
Vector reference_solution(const QuadraticPHSystem& sys, const Vector& x0, double t_eval,
                          const InputSignal& u = InputSignal::zero(0), double panel = 0.05);

/// Unit vector with independent normal entries from a seeded generator.
Vector random_unit_vector(Index n, std::uint64_t seed);

}  // namespace phs
