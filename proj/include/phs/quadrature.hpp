#pragma once

#include <vector>

namespace phs {

/// Gauss-Legendre rule mapped to [0, 1]; exact for polynomials of degree 2n-1.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to 1

    std::size_t size() const noexcept { return nodes.size(); }
};

/// n-node Gauss-Legendre rule on [0, 1]. Throws std::invalid_argument for n < 1.
QuadratureRule gauss_legendre(int n);

}  // namespace phs
