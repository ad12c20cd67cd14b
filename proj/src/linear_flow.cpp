#include "phs/linear_flow.hpp"

#include "phs/expm.hpp"

#include <algorithm>

namespace phs {

namespace {

void check_dense_limit(Index n) {
    if (n > kDenseFlowLimit) {
        throw DimensionError("exact linear flow: dimension " + std::to_string(n) + " exceeds the dense limit " +
                             std::to_string(kDenseFlowLimit) +
                             "; use a fine-step implicit midpoint integration instead");
    }
}

// e^{tA} for several t. A symmetric generator (the dissipative part) is
// diagonalized once; anything else goes through the Pade exponential.
class ExponentialFamily {
public:
    explicit ExponentialFamily(const Matrix& A) : A_(A) {
        const double scale = std::max(A.cwiseAbs().maxCoeff(), 1.0);
        symmetric_ = A.rows() > 0 && (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-15 * scale;
        if (symmetric_) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(A);
            symmetric_ = es.info() == Eigen::Success;
            V_ = es.eigenvectors();
            lambda_ = es.eigenvalues();
        }
    }

    Matrix at(double t) const {
        if (!symmetric_) return matrix_exponential(t * A_);
        return V_ * (t * lambda_).array().exp().matrix().asDiagonal() * V_.transpose();
    }

    /// e^{tA} B
    Matrix at(double t, const Matrix& B) const {
        if (!symmetric_) return matrix_exponential(t * A_) * B;
        return V_ * ((t * lambda_).array().exp().matrix().asDiagonal() * (V_.transpose() * B));
    }

private:
    Matrix A_;
    bool symmetric_ = false;
    Matrix V_;
    Vector lambda_;
};

}  // namespace

LinearFlowPropagator::LinearFlowPropagator(const Matrix& A, const Matrix& B, double h, int quadrature_nodes,
                                           bool track_supplied)
    : h_(h),
      has_input_(B.cols() > 0),
      track_supplied_(track_supplied && B.cols() > 0),
      rule_(gauss_legendre(quadrature_nodes)),
      B_(B) {
    if (A.rows() != A.cols()) throw DimensionError("LinearFlowPropagator: A must be square");
    check_dense_limit(A.rows());
    if (has_input_ && B.rows() != A.rows()) throw DimensionError("LinearFlowPropagator: B has wrong row count");
    if (!has_input_) {
        E_ = matrix_exponential(h * A);
        return;
    }
    const ExponentialFamily family(A);
    E_ = family.at(h);
    const auto q = rule_.size();
    F_.reserve(q);
    for (std::size_t j = 0; j < q; ++j) F_.push_back(family.at((1.0 - rule_.nodes[j]) * h, B));
    if (!track_supplied_) return;
    G_.reserve(q);
    K_.resize(q);
    for (std::size_t i = 0; i < q; ++i) {
        const double ci = rule_.nodes[i];
        G_.push_back(family.at(ci * h));
        for (std::size_t j = 0; j < q; ++j) K_[i].push_back(family.at(ci * (1.0 - rule_.nodes[j]) * h, B));
    }
}

LinearFlowPropagator::Outcome LinearFlowPropagator::advance(const Vector& x0, double t0,
                                                            const InputSignal& u) const {
    require_size(x0, E_.rows(), "LinearFlowPropagator::advance");
    Outcome out{E_ * x0, 0.0};
    if (!has_input_) return out;
    const auto q = rule_.size();
    std::vector<Vector> u_at(q);
    for (std::size_t j = 0; j < q; ++j) {
        u_at[j] = u(t0 + rule_.nodes[j] * h_);
        out.x += h_ * rule_.weights[j] * (F_[j] * u_at[j]);
    }
    if (!track_supplied_) return out;
    for (std::size_t i = 0; i < q; ++i) {
        const double ci = rule_.nodes[i];
        Vector xi = G_[i] * x0;
        for (std::size_t j = 0; j < q; ++j) {
            xi += ci * h_ * rule_.weights[j] * (K_[i][j] * u(t0 + ci * rule_.nodes[j] * h_));
        }
        out.supplied += h_ * rule_.weights[i] * (B_.transpose() * xi).dot(u_at[i]);
    }
    return out;
}

Matrix flow_generator(const TransformedSystem& sys, FlowPart part) {
    switch (part) {
        case FlowPart::conservative: return Matrix(sys.J);
        case FlowPart::dissipative: return -Matrix(sys.R);
        case FlowPart::full: break;
    }
    return Matrix(sys.J) - Matrix(sys.R);
}

Vector exact_linear_flow(const TransformedSystem& sys, const Vector& x0, double h, FlowPart part,
                         const InputSignal& u, double t0, int quadrature_nodes) {
    require_size(x0, sys.dim(), "exact_linear_flow");
    check_dense_limit(sys.dim());
    if (h == 0.0) return x0;
    const Matrix B = part == FlowPart::conservative ? Matrix(sys.dim(), 0) : sys.B;
    const LinearFlowPropagator prop(flow_generator(sys, part), B, h, quadrature_nodes);
    return prop.advance(x0, t0, u).x;
}

Vector exact_linear_flow(const QuadraticPHSystem& sys, const Vector& x0, double h, FlowPart part,
                         const InputSignal& u, double t0, int quadrature_nodes) {
    require_size(x0, sys.dim(), "exact_linear_flow");
    check_dense_limit(sys.dim());
    const CongruenceTransform ct = congruence_from(sys.Q());
    const TransformedSystem ts = transform_system(sys, ct);
    return ct.from_transformed(exact_linear_flow(ts, ct.to_transformed(x0), h, part, u, t0, quadrature_nodes));
}

}  // namespace phs
