#pragma once

// Exact flows of linear port-Hamiltonian systems (dense matrix exponentials).

#include "phs/quadrature.hpp"
#include "phs/system.hpp"

namespace phs {

/// Dense exponentials are only formed up to this dimension.
inline constexpr Index kDenseFlowLimit = 2000;

/// Propagator of x' = A x + B u(t) over one step of fixed length h:
///     x(h) = e^{hA} x0 + int_0^h e^{(h - tau) A} B u(t0 + tau) dtau,
/// with the input integral by Gauss-Legendre quadrature. With
/// `track_supplied`, also integrates (B^T x(tau))^T u(t0 + tau), the supplied
/// port energy when A, B are in coordinates where grad H = x.
class LinearFlowPropagator {
public:
    LinearFlowPropagator(const Matrix& A, const Matrix& B, double h, int quadrature_nodes = 6,
                         bool track_supplied = false);

    struct Outcome {
        Vector x;
        double supplied = 0.0;
    };

    Outcome advance(const Vector& x0, double t0, const InputSignal& u) const;
    double step() const noexcept { return h_; }

private:
    double h_;
    bool has_input_;
    bool track_supplied_;
    QuadratureRule rule_;
    Matrix B_;
    Matrix E_;                         // e^{hA}
    std::vector<Matrix> F_;            // e^{(1 - c_j) h A} B
    std::vector<Matrix> G_;            // e^{c_i h A}
    std::vector<std::vector<Matrix>> K_;  // e^{c_i (1 - c_j) h A} B
};

/// Generator of the requested part in transformed coordinates: J~, -R~ or J~ - R~.
Matrix flow_generator(const TransformedSystem& sys, FlowPart part);

/// x~(h) of the exact flow of one part (conservative parts ignore u). h may be negative.
/// Throws DimensionError above kDenseFlowLimit.
Vector exact_linear_flow(const TransformedSystem& sys, const Vector& x0, double h, FlowPart part,
                         const InputSignal& u, double t0 = 0.0, int quadrature_nodes = 6);

/// Same in original coordinates; evaluated through the congruence transform.
Vector exact_linear_flow(const QuadraticPHSystem& sys, const Vector& x0, double h, FlowPart part,
                         const InputSignal& u, double t0 = 0.0, int quadrature_nodes = 6);

}  // namespace phs
