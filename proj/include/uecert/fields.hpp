#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "uecert/errors.hpp"
#include "uecert/linalg.hpp"
#include "uecert/torus.hpp"

namespace uecert {

/// Smooth cutoff profile: f == 1 on [0, r_in], f == 0 on [r_out, inf),
/// f(r) = h(r_out - r) / (h(r_out - r) + h(r - r_in)) with h(t) = exp(-1/t).
/// The plateau and support branches are taken exactly, not asymptotically.
struct BumpProfile {
    double r_in = 1.25;
    double r_out = 2.0;

    struct Eval {
        double f;
        double df;
        double d2f;
    };

    BumpProfile() = default;
    BumpProfile(double rin, double rout) : r_in(rin), r_out(rout) {
        if (!(0.0 < rin && rin < rout))
            throw ParameterError("BumpProfile: need 0 < r_in < r_out");
    }

    Eval eval(double r) const {
        if (r <= r_in) return {1.0, 0.0, 0.0};
        if (r >= r_out) return {0.0, 0.0, 0.0};
        const double tu = r_out - r;
        const double tv = r - r_in;
        const double eu = std::exp(-1.0 / tu);
        const double ev = std::exp(-1.0 / tv);
        const double s = eu + ev;
        if (s == 0.0) return (tu >= tv) ? Eval{1.0, 0.0, 0.0} : Eval{0.0, 0.0, 0.0};
        const double up = -eu / (tu * tu);
        const double vp = ev / (tv * tv);
        const double upp = eu * (1.0 - 2.0 * tu) / (tu * tu * tu * tu);
        const double vpp = ev * (1.0 - 2.0 * tv) / (tv * tv * tv * tv);
        const double f = eu / s;
        const double w = up * ev - eu * vp;
        const double df = w / (s * s);
        const double d2f = ((upp * ev - eu * vpp) * s - 2.0 * w * (up + vp)) / (s * s * s);
        return {f, df, d2f};
    }
};

/// The parameter vector a = (a_1..a_d, a_{d+2}..a_{d^2+d}) together with the
/// derived trace-free matrix A'_a and translation b_a = (a_1..a_d). The top
/// left entry of A'_a is c_a = -sum of the remaining diagonal.
struct AffineGenerator {
    int d = 0;
    Vector a;       // length d^2 + d - 1
    Matrix A_prime; // d x d, ascending-index trace exactly zero
    Vector b;       // first d components of a
};

/// Trace accumulated in ascending diagonal order; the summation order the
/// exact-zero-trace construction targets.
inline double ascending_trace(const Matrix& M) {
    double t = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) t += M(i, i);
    return t;
}

inline AffineGenerator build_generator(int d, const Vector& a_in) {
    if (d < 2) throw ParameterError("build_generator: need d >= 2");
    const int dp = d * d + d - 1;
    if (a_in.size() != dp)
        throw ParameterError("build_generator: parameter vector must have length d^2+d-1");
    if (a_in.cwiseAbs().maxCoeff() >= 1.0)
        throw ParameterError("build_generator: parameters must satisfy |a_i| < 1");

    Vector a = a_in;
    Matrix A = Matrix::Zero(d, d);
    // abstract 1-based index i maps to storage a[i-1] for i <= d and a[i-2]
    // for i >= d+2 (index d+1 is the dependent entry c_a)
    const auto val = [&](int idx) { return idx <= d ? a[idx - 1] : a[idx - 2]; };
    for (int j = 1; j < d; ++j) A(0, j) = val(d + 1 + j);
    for (int r = 1; r < d; ++r) {
        const int row = r + 1; // 1-based row index in the coefficient layout
        for (int j = 0; j < d; ++j) A(r, j) = val(row * d + 1 + j);
    }

    double diag_sum = 0.0;
    for (int r = 1; r < d; ++r) diag_sum += A(r, r);
    A(0, 0) = -diag_sum;
    if (d > 2) {
        // Close the floating-point fold on the last diagonal entry (moves it
        // by at most a few ulp) so the ascending trace is exactly zero.
        double partial = A(0, 0);
        for (int r = 1; r + 1 < d; ++r) partial += A(r, r);
        A(d - 1, d - 1) = -partial;
        a[dp - 1] = A(d - 1, d - 1);
    }

    Vector b = a.head(d);
    return AffineGenerator{d, std::move(a), std::move(A), std::move(b)};
}

namespace detail {

/// Field evaluation kernel, usable with fixed compile-time dimension for the
/// flow integrator hot path and with Eigen::Dynamic for the public interface.
template <int D>
struct FieldCore {
    using Vec = Eigen::Matrix<double, D, 1>;
    using Mat = Eigen::Matrix<double, D, D>;

    /// Antisymmetric stream matrix with explicit row coefficients; the
    /// divergence identity requires ca = 1/d and cb = 1/(d-1).
    static Mat stream(const Mat& Ap, const Vec& bp, const Vec& z, double ca, double cb) {
        const Vec Az = Ap * z;
        return ca * (Az * z.transpose() - z * Az.transpose()) +
               cb * (bp * z.transpose() - z * bp.transpose());
    }

    static void value(const Mat& Ap, const Vec& bp, const BumpProfile& bump, const Vec& z,
                      Vec& Y) {
        const double r = z.norm();
        if (r <= bump.r_in) {
            Y = Ap * z + bp;
            return;
        }
        if (r >= bump.r_out) {
            Y = Vec::Zero(z.size());
            return;
        }
        const auto e = bump.eval(r);
        const auto d = z.size();
        const double ca = 1.0 / static_cast<double>(d);
        const double cb = 1.0 / static_cast<double>(d - 1);
        const Vec Az = Ap * z;
        const Mat S = ca * (Az * z.transpose() - z * Az.transpose()) +
                      cb * (bp * z.transpose() - z * bp.transpose());
        Y = e.f * (Az + bp) + (e.df / r) * (S * z);
    }

    static void value_jacobian(const Mat& Ap, const Vec& bp, const BumpProfile& bump,
                               const Vec& z, Vec& Y, Mat& DY) {
        const double r = z.norm();
        const auto d = z.size();
        if (r <= bump.r_in) {
            Y = Ap * z + bp;
            DY = Ap;
            return;
        }
        if (r >= bump.r_out) {
            Y = Vec::Zero(d);
            DY = Mat::Zero(d, d);
            return;
        }
        const auto e = bump.eval(r);
        const double ca = 1.0 / static_cast<double>(d);
        const double cb = 1.0 / static_cast<double>(d - 1);
        const Vec Az = Ap * z;
        const Vec X = Az + bp;
        const Mat S = ca * (Az * z.transpose() - z * Az.transpose()) +
                      cb * (bp * z.transpose() - z * bp.transpose());
        const double fr = e.df / r;
        const Vec g = fr * z;
        const Vec Sz = S * z;
        Y = e.f * X + fr * Sz;

        // d(S)/dz contracted with g, using g parallel to z
        const Vec Atz = Ap.transpose() * z;
        const double zAz = z.dot(Az);
        const double zbp = z.dot(bp);
        const Mat I = Mat::Identity(d, d);
        DY = X * g.transpose() + e.f * Ap +
             ca * (e.df * r * Ap + Az * g.transpose() - fr * z * Atz.transpose() - (fr * zAz) * I) +
             cb * (bp * g.transpose() - (fr * zbp) * I) +
             fr * S + ((e.d2f - fr) / (r * r)) * (Sz * z.transpose());
    }
};

} // namespace detail

/// Antisymmetric stream matrix S(z) whose row divergences recover the affine
/// field: sum_j d_j S_ij(z) = (A'z + b')_i.
inline Matrix stream_matrix(const AffineGenerator& gen, const Vector& b_prime, const Vector& z) {
    if (b_prime.size() != gen.d || z.size() != gen.d)
        throw ParameterError("stream_matrix: dimension mismatch");
    return detail::FieldCore<Eigen::Dynamic>::stream(gen.A_prime, b_prime, z, 1.0 / gen.d,
                                                     1.0 / (gen.d - 1));
}

/// The bump-interpolated divergence-free field and its analytic Jacobian:
/// Y(z) = f(|z|) (A'z + b') + S(z) grad f(|z|). Equals the affine field on
/// the plateau and vanishes outside the cutoff, both exactly.
inline std::pair<Vector, Matrix> bumped_field(const AffineGenerator& gen, const Vector& b_prime,
                                              const BumpProfile& bump, const Vector& z) {
    if (b_prime.size() != gen.d || z.size() != gen.d)
        throw ParameterError("bumped_field: dimension mismatch");
    Vector Y(gen.d);
    Matrix DY(gen.d, gen.d);
    detail::FieldCore<Eigen::Dynamic>::value_jacobian(gen.A_prime, b_prime, bump, z, Y, DY);
    return {std::move(Y), std::move(DY)};
}

} // namespace uecert
