#include "phs/expm.hpp"

#include <array>
#include <cmath>

namespace phs {

namespace {

double norm1(const Matrix& A) { return A.cwiseAbs().colwise().sum().maxCoeff(); }

// Solve (V - U) X = (V + U) for the [m/m] Pade approximant given U (odd part) and V (even part).
Matrix pade_quotient(const Matrix& U, const Matrix& V) {
    return (V - U).partialPivLu().solve(V + U);
}

Matrix pade_low(const Matrix& A, int m) {
    static constexpr std::array<double, 4> b3{120., 60., 12., 1.};
    static constexpr std::array<double, 6> b5{30240., 15120., 3360., 420., 30., 1.};
    static constexpr std::array<double, 8> b7{17297280., 8648640., 1995840., 277200.,
                                              25200.,    1512.,    56.,      1.};
    static constexpr std::array<double, 10> b9{17643225600., 8821612800., 2075673600., 302702400.,
                                               30270240.,    2162160.,    110880.,     3960.,
                                               90.,          1.};
    const double* b = m == 3 ? b3.data() : m == 5 ? b5.data() : m == 7 ? b7.data() : b9.data();

    const Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    Matrix power = I;  // A^(2k)
    Matrix odd = Matrix::Zero(n, n);
    Matrix even = Matrix::Zero(n, n);
    for (int k = 0; 2 * k <= m; ++k) {
        even += b[2 * k] * power;
        if (2 * k + 1 <= m) odd += b[2 * k + 1] * power;
        power = power * A2;
    }
    return pade_quotient(A * odd, even);
}

Matrix pade13(const Matrix& A) {
    static constexpr std::array<double, 14> b{
        64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
        129060195264000.,   10559470521600.,    670442572800.,     33522128640.,
        1323241920.,        40840800.,          960960.,           16380.,
        182.,               1.};
    const Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;
    const Matrix U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
                          b[3] * A2 + b[1] * I);
    const Matrix V =
        A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    return pade_quotient(U, V);
}

}  // namespace

Matrix matrix_exponential(const Matrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("matrix_exponential: matrix must be square");
    if (A.size() == 0) return A;

    static constexpr std::array<std::pair<int, double>, 4> low{
        {{3, 1.495585217958292e-2}, {5, 2.539398330063230e-1}, {7, 9.504178996162932e-1},
         {9, 2.097847961257068e0}}};
    constexpr double theta13 = 5.371920351148152;

    const double a1 = norm1(A);
    for (const auto& [m, theta] : low) {
        if (a1 <= theta) return pade_low(A, m);
    }
    int s = 0;
    if (a1 > theta13) s = static_cast<int>(std::ceil(std::log2(a1 / theta13)));
    Matrix X = pade13(A / std::ldexp(1.0, s));
    for (int i = 0; i < s; ++i) X = X * X;
    return X;
}

}  // namespace phs
