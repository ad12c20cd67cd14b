#pragma once

#include "phs/types.hpp"

namespace phs {

/// exp(A) for a dense square matrix by scaling and squaring with diagonal
/// Pade approximants of degree 3..13 (Higham's 2005 parameter choice).
Matrix matrix_exponential(const Matrix& A);

}  // namespace phs
