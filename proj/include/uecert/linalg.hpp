#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "uecert/errors.hpp"

namespace uecert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
    return r;
}

/// All k-subsets of {0,...,n-1} in lexicographic order. This fixes the basis
/// order of the k-th exterior power everywhere in the library.
inline std::vector<std::vector<int>> k_subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    if (k < 0 || k > n) return out;
    std::vector<int> cur(k);
    for (int i = 0; i < k; ++i) cur[i] = i;
    while (true) {
        out.push_back(cur);
        int i = k - 1;
        while (i >= 0 && cur[i] == n - k + i) --i;
        if (i < 0) break;
        ++cur[i];
        for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
    return out;
}

/// Matrix exponential by scaling-and-squaring with a Taylor kernel. After
/// scaling to ||B||_inf <= 1/2 the series is run to machine precision, which
/// is plenty at the small dense sizes used here.
inline Matrix matrix_exponential(const Matrix& M) {
    const Eigen::Index n = M.rows();
    if (M.cols() != n) throw ParameterError("matrix_exponential: square matrix required");
    if (!M.allFinite()) throw NumericalError("matrix_exponential: non-finite input");

    const double norm = n > 0 ? M.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const double scale = std::ldexp(1.0, -squarings);

    Matrix B = M * scale;
    Matrix term = Matrix::Identity(n, n);
    Matrix sum = Matrix::Identity(n, n);
    for (int k = 1; k <= 26; ++k) {
        term = (term * B / static_cast<double>(k)).eval();
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-300) break;
    }
    for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
    return sum;
}

/// V(Z) = sum_{m>=0} Z^m/(m+1)!, i.e. the integral of exp(sZ) over s in [0,1].
/// Read off the top-right block of exp([[Z, I], [0, 0]]).
inline Matrix phi1(const Matrix& Z) {
    const Eigen::Index n = Z.rows();
    Matrix H = Matrix::Zero(2 * n, 2 * n);
    H.topLeftCorner(n, n) = Z;
    H.topRightCorner(n, n) = Matrix::Identity(n, n);
    return matrix_exponential(H).topRightCorner(n, n);
}

struct ThinQR {
    Matrix Q; // same shape as the input, orthonormal columns
    Matrix R; // k x k upper triangular with non-negative diagonal
};

/// Thin QR with the sign of each R diagonal entry fixed to be non-negative.
/// Removes the gauge ambiguity so downstream logs and frames are reproducible.
inline ThinQR thin_qr_positive(const Matrix& A) {
    const Eigen::Index k = A.cols();
    Eigen::HouseholderQR<Matrix> qr(A);
    Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), k);
    Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (R(j, j) < 0.0) {
            Q.col(j) = -Q.col(j);
            R.row(j) = -R.row(j);
        }
    }
    return {std::move(Q), std::move(R)};
}

} // namespace uecert
