#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uecert/errors.hpp"
#include "uecert/linalg.hpp"
#include "uecert/rng.hpp"

namespace uecert {

/// A k-dimensional subspace of R^d held as a d x k orthonormal frame.
/// Two frames describe the same point iff their projectors F F^T agree.
class GrassmannPoint {
public:
    GrassmannPoint(int ambient_dim, int subspace_dim, Matrix frame)
        : d_(ambient_dim), k_(subspace_dim), frame_(std::move(frame)) {
        if (d_ < 2 || k_ < 1 || k_ > d_ - 1)
            throw ParameterError("GrassmannPoint: need 1 <= k <= d-1 with d >= 2");
        if (frame_.rows() != d_ || frame_.cols() != k_)
            throw ParameterError("GrassmannPoint: frame must be d x k");
        const Matrix gram = frame_.transpose() * frame_;
        if ((gram - Matrix::Identity(k_, k_)).cwiseAbs().maxCoeff() > 1e-12)
            throw ParameterError("GrassmannPoint: frame columns are not orthonormal");
    }

    int ambient_dim() const { return d_; }
    int subspace_dim() const { return k_; }
    const Matrix& frame() const { return frame_; }

    Matrix projector() const { return frame_ * frame_.transpose(); }

    /// Frobenius distance between projectors; frame-gauge invariant.
    double distance_to(const GrassmannPoint& other) const {
        return (projector() - other.projector()).norm();
    }

    static GrassmannPoint span_axis(int d, int axis) {
        Matrix f = Matrix::Zero(d, 1);
        f(axis, 0) = 1.0;
        return GrassmannPoint(d, 1, std::move(f));
    }

private:
    int d_;
    int k_;
    Matrix frame_;
};

/// k-th compound matrix: entry (I, J) is the k x k minor of M with rows I and
/// columns J, index sets enumerated lexicographically. Represents the induced
/// action of M on the k-th exterior power.
inline Matrix compound(const Matrix& M, int k) {
    const int d = static_cast<int>(M.rows());
    if (M.cols() != d) throw ParameterError("compound: square matrix required");
    if (k < 1 || k > d) throw ParameterError("compound: need 1 <= k <= d");
    const auto subsets = k_subsets(d, k);
    const auto n = static_cast<Eigen::Index>(subsets.size());
    Matrix C(n, n);
    Matrix minor(k, k);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) minor(i, j) = M(subsets[a][i], subsets[b][j]);
            C(a, b) = minor.determinant();
        }
    }
    return C;
}

namespace detail {

/// Half log-determinant of the Gram matrix of the columns of V.
/// Throws DegenerateVolumeError when the Gram matrix is not numerically
/// positive definite (linearly dependent columns), which callers must treat
/// as subspace collapse rather than noise.
inline double gram_log_volume_cols(const Matrix& V) {
    if (!V.allFinite()) throw NumericalError("gram_log_volume: non-finite input");
    const Matrix gram = V.transpose() * V;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success)
        throw DegenerateVolumeError("gram_log_volume: Gram matrix not positive definite");
    double acc = 0.0;
    const Matrix L = llt.matrixL();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        if (L(i, i) <= 1e-150)
            throw DegenerateVolumeError("gram_log_volume: volume collapsed");
        acc += std::log(L(i, i));
    }
    return acc;
}

} // namespace detail

/// Log of the k-volume of the parallelotope spanned by the given vectors,
/// computed as (1/2) log det of their Gram matrix.
inline double gram_log_volume(const std::vector<Vector>& vectors) {
    if (vectors.empty()) throw ParameterError("gram_log_volume: need at least one vector");
    const auto d = vectors.front().size();
    const auto k = static_cast<Eigen::Index>(vectors.size());
    if (k > d) throw ParameterError("gram_log_volume: more vectors than ambient dimension");
    Matrix V(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (vectors[j].size() != d)
            throw ParameterError("gram_log_volume: inconsistent vector dimensions");
        V.col(j) = vectors[j];
    }
    return detail::gram_log_volume_cols(V);
}

/// log ||M(v)|| for the unit decomposable k-vector v spanned by P's frame:
/// (1/2) log det(F^T M^T M F). Computed relative to the frame's own Gram
/// volume, which cancels the last-ulp normalization error of the frame and
/// makes the identity map give exactly zero.
inline double log_expansion(const Matrix& M, const GrassmannPoint& P) {
    if (M.rows() != P.ambient_dim() || M.cols() != P.ambient_dim())
        throw ParameterError("log_expansion: dimension mismatch");
    return detail::gram_log_volume_cols(M * P.frame()) -
           detail::gram_log_volume_cols(P.frame());
}

/// Image subspace M * P, re-orthonormalized by thin QR. The result does not
/// depend on the frame chosen for P (only on the subspace).
inline GrassmannPoint transport(const Matrix& M, const GrassmannPoint& P) {
    if (M.rows() != P.ambient_dim() || M.cols() != P.ambient_dim())
        throw ParameterError("transport: dimension mismatch");
    const Matrix image = M * P.frame();
    auto qr = thin_qr_positive(image);
    const double scale = image.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < qr.R.cols(); ++j) {
        if (qr.R(j, j) <= 1e-12 * (1.0 + scale))
            throw DegenerateVolumeError("transport: image subspace is rank deficient");
    }
    return GrassmannPoint(P.ambient_dim(), P.subspace_dim(), std::move(qr.Q));
}

/// Uniform (rotation-invariant) random subspace: thin QR of a d x k matrix of
/// independent standard normals.
inline GrassmannPoint random_grassmann(Rng& rng, int d, int k) {
    if (d < 2 || k < 1 || k > d - 1)
        throw ParameterError("random_grassmann: need 1 <= k <= d-1 with d >= 2");
    while (true) {
        Matrix G(d, k);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < k; ++j) G(i, j) = rng.normal();
        auto qr = thin_qr_positive(G);
        bool ok = true;
        for (int j = 0; j < k; ++j)
            if (qr.R(j, j) <= 1e-8) ok = false;
        if (ok) return GrassmannPoint(d, k, std::move(qr.Q));
    }
}

/// Pluecker coordinates of the frame: the C(d,k) ordered k x k row minors.
/// For an orthonormal frame the coordinate vector has unit norm.
inline Vector plucker_coordinates(const GrassmannPoint& P) {
    const int d = P.ambient_dim();
    const int k = P.subspace_dim();
    const auto subsets = k_subsets(d, k);
    Vector p(static_cast<Eigen::Index>(subsets.size()));
    Matrix minor(k, k);
    for (std::size_t a = 0; a < subsets.size(); ++a) {
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) minor(i, j) = P.frame()(subsets[a][i], j);
        p(static_cast<Eigen::Index>(a)) = minor.determinant();
    }
    return p;
}

} // namespace uecert
