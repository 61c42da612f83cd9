#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "uecert/errors.hpp"
#include "uecert/fields.hpp"
#include "uecert/linalg.hpp"
#include "uecert/torus.hpp"

namespace uecert {

/// Time-one map of the affine field z' = A'z + b'.
struct AffineMap {
    Matrix A;
    Vector b;

    Vector apply(const Vector& z) const { return A * z + b; }
};

/// exp of the homogeneous generator [[A', b'], [0, 0]]: A = exp(A') and
/// b = V(A') b' with V(Z) = sum Z^m/(m+1)!. Traceless A' gives det A = 1.
inline AffineMap affine_exp(const Matrix& A_prime, const Vector& b_prime) {
    const auto d = A_prime.rows();
    if (A_prime.cols() != d || b_prime.size() != d)
        throw ParameterError("affine_exp: dimension mismatch");
    Matrix H = Matrix::Zero(d + 1, d + 1);
    H.topLeftCorner(d, d) = A_prime;
    H.block(0, d, d, 1) = b_prime;
    const Matrix E = matrix_exponential(H);
    return {E.topLeftCorner(d, d), E.block(0, d, d, 1)};
}

/// Solve V(A') b' = b for the log-translation b'. The construction fixes the
/// time-one translation b and leaves the generator translation implicit; this
/// is that inversion.
inline Vector affine_exp_inverse_translation(const Matrix& A_prime, const Vector& b) {
    const auto d = A_prime.rows();
    if (A_prime.cols() != d || b.size() != d)
        throw ParameterError("affine_exp_inverse_translation: dimension mismatch");
    const Matrix V = phi1(A_prime);
    Eigen::FullPivLU<Matrix> lu(V);
    const Vector piv = lu.matrixLU().diagonal().cwiseAbs();
    if (!lu.isInvertible() || piv.minCoeff() <= 1e-12 * std::max(1.0, piv.maxCoeff()))
        throw IllConditionedGeneratorError(
            "affine_exp_inverse_translation: V(A') is near singular");
    return lu.solve(b);
}

namespace detail {

/// Classical RK4 over t in [0,1] with a fixed step count; the Jacobian runs
/// the variational equation alongside, which makes it the exact derivative of
/// the discrete step map.
template <int D>
struct FlowKernel {
    using Vec = Eigen::Matrix<double, D, 1>;
    using Mat = Eigen::Matrix<double, D, D>;
    using Core = FieldCore<D>;

    static double integrate(const Mat& Ap, const Vec& bp, const BumpProfile& bump, int steps,
                            Vec& z) {
        const double h = 1.0 / steps;
        double max_radius = z.norm();
        Vec k1(z.size()), k2(z.size()), k3(z.size()), k4(z.size()), zt(z.size());
        for (int s = 0; s < steps; ++s) {
            Core::value(Ap, bp, bump, z, k1);
            zt = z + (0.5 * h) * k1;
            Core::value(Ap, bp, bump, zt, k2);
            zt = z + (0.5 * h) * k2;
            Core::value(Ap, bp, bump, zt, k3);
            zt = z + h * k3;
            Core::value(Ap, bp, bump, zt, k4);
            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            max_radius = std::max(max_radius, z.norm());
        }
        if (!z.allFinite()) throw NumericalError("flow integrator produced non-finite state");
        return max_radius;
    }

    static double integrate_jacobian(const Mat& Ap, const Vec& bp, const BumpProfile& bump,
                                     int steps, Vec& z, Mat& J) {
        const double h = 1.0 / steps;
        const auto d = z.size();
        double max_radius = z.norm();
        Vec k1(d), k2(d), k3(d), k4(d), zt(d);
        Mat D1(d, d), D2(d, d), D3(d, d), D4(d, d);
        Mat K1(d, d), K2(d, d), K3(d, d), K4(d, d), Jt(d, d);
        for (int s = 0; s < steps; ++s) {
            Core::value_jacobian(Ap, bp, bump, z, k1, D1);
            K1.noalias() = D1 * J;
            zt = z + (0.5 * h) * k1;
            Core::value_jacobian(Ap, bp, bump, zt, k2, D2);
            Jt = J + (0.5 * h) * K1;
            K2.noalias() = D2 * Jt;
            zt = z + (0.5 * h) * k2;
            Core::value_jacobian(Ap, bp, bump, zt, k3, D3);
            Jt = J + (0.5 * h) * K2;
            K3.noalias() = D3 * Jt;
            zt = z + h * k3;
            Core::value_jacobian(Ap, bp, bump, zt, k4, D4);
            Jt = J + h * K3;
            K4.noalias() = D4 * Jt;
            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            J += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
            max_radius = std::max(max_radius, z.norm());
        }
        if (!z.allFinite() || !J.allFinite())
            throw NumericalError("flow integrator produced non-finite state");
        return max_radius;
    }
};

template <class Fn>
inline void dispatch_dim(int d, Fn&& fn) {
    switch (d) {
    case 2: fn(std::integral_constant<int, 2>{}); break;
    case 3: fn(std::integral_constant<int, 3>{}); break;
    case 4: fn(std::integral_constant<int, 4>{}); break;
    case 5: fn(std::integral_constant<int, 5>{}); break;
    case 6: fn(std::integral_constant<int, 6>{}); break;
    default: fn(std::integral_constant<int, Eigen::Dynamic>{}); break;
    }
}

} // namespace detail

/// Affine map of the torus induced by an integer matrix with |det| = 1 and a
/// translation. Identity and hyperbolic toral automorphisms both live here.
class AffineTorusMap {
public:
    AffineTorusMap(Matrix L, Vector t) : L_(std::move(L)), t_(std::move(t)) {
        const auto d = L_.rows();
        if (L_.cols() != d || t_.size() != d)
            throw ParameterError("AffineTorusMap: dimension mismatch");
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                if (std::abs(L_(i, j) - std::round(L_(i, j))) > 1e-9)
                    throw ParameterError("AffineTorusMap: matrix entries must be integers");
        L_ = L_.array().round().matrix();
        if (std::abs(std::abs(L_.determinant()) - 1.0) > 1e-9)
            throw ParameterError("AffineTorusMap: |det| must be 1 to induce a diffeomorphism");
    }

    static AffineTorusMap identity(int d) {
        return AffineTorusMap(Matrix::Identity(d, d), Vector::Zero(d));
    }

    int dim() const { return static_cast<int>(L_.rows()); }
    const Matrix& linear() const { return L_; }
    const Vector& translation() const { return t_; }

    bool is_identity() const {
        return L_.isIdentity(0.0) && t_.isZero(0.0);
    }

    TorusPoint apply(const TorusPoint& y) const { return TorusPoint(L_ * y.coords + t_); }

    std::pair<TorusPoint, Matrix> apply_with_jacobian(const TorusPoint& y) const {
        return {apply(y), L_};
    }

private:
    Matrix L_;
    Vector t_;
};

/// One localized map g_x^a: the bumped field flowed for unit time inside the
/// chart around x, the identity outside. Evaluation integrates the field with
/// RK4; the Jacobian integrates the variational equation. The chart scaling
/// conjugation cancels, so the chart-space Jacobian is the torus Jacobian.
class LocalizedDiffeo {
public:
    LocalizedDiffeo(ChartSpec chart, AffineGenerator gen, BumpProfile bump, int steps)
        : chart_(std::move(chart)), bump_(bump), steps_(steps), d_(gen.d),
          A_prime_(std::move(gen.A_prime)), b_(std::move(gen.b)), a_(std::move(gen.a)) {
        if (steps_ < 1) throw ParameterError("LocalizedDiffeo: integrator steps must be >= 1");
        if (chart_.center.dim() != d_)
            throw ParameterError("LocalizedDiffeo: chart dimension mismatch");
        b_prime_ = affine_exp_inverse_translation(A_prime_, b_);
    }

    int dim() const { return d_; }
    const ChartSpec& chart() const { return chart_; }
    const BumpProfile& bump() const { return bump_; }
    int integrator_steps() const { return steps_; }
    const Matrix& A_prime() const { return A_prime_; }
    const Vector& b_prime() const { return b_prime_; }
    const Vector& translation() const { return b_; }
    const Vector& parameters() const { return a_; }

    /// Closed-form affine map of the plateau region (test oracle; the main
    /// path always integrates).
    AffineMap affine_map() const { return affine_exp(A_prime_, b_prime_); }

    /// Conservative check that the affine image of the unit ball stays inside
    /// the chart ball: ||A_a||_2 + |b_a| < r_out.
    bool affine_containment_ok() const {
        const AffineMap m = affine_map();
        const double opnorm = m.A.jacobiSvd().singularValues()(0);
        return opnorm + m.b.norm() < bump_.r_out;
    }

    TorusPoint apply(const TorusPoint& y) const {
        Vector z = chart_.forward(y);
        if (z.norm() >= bump_.r_out) return y;
        detail::dispatch_dim(d_, [&](auto dc) {
            constexpr int D = decltype(dc)::value;
            typename detail::FlowKernel<D>::Vec zf = z;
            typename detail::FlowKernel<D>::Mat Ap = A_prime_;
            typename detail::FlowKernel<D>::Vec bp = b_prime_;
            detail::FlowKernel<D>::integrate(Ap, bp, bump_, steps_, zf);
            z = zf;
        });
        return map_back(z);
    }

    std::pair<TorusPoint, Matrix> apply_with_jacobian(const TorusPoint& y) const {
        auto t = apply_tracked(y);
        return {std::move(t.image), std::move(t.jacobian)};
    }

    struct Tracked {
        TorusPoint image;
        Matrix jacobian;
        double max_radius; // largest |z| seen along the chart-space trajectory
    };

    /// apply_with_jacobian plus the trajectory radius, which is how the
    /// plateau-agreement precondition is validated at runtime.
    Tracked apply_tracked(const TorusPoint& y) const {
        Vector z = chart_.forward(y);
        const double r0 = z.norm();
        if (r0 >= bump_.r_out) return {y, Matrix::Identity(d_, d_), r0};
        Matrix J = Matrix::Identity(d_, d_);
        double max_radius = r0;
        detail::dispatch_dim(d_, [&](auto dc) {
            constexpr int D = decltype(dc)::value;
            typename detail::FlowKernel<D>::Vec zf = z;
            typename detail::FlowKernel<D>::Mat Jf = J;
            typename detail::FlowKernel<D>::Mat Ap = A_prime_;
            typename detail::FlowKernel<D>::Vec bp = b_prime_;
            max_radius =
                detail::FlowKernel<D>::integrate_jacobian(Ap, bp, bump_, steps_, zf, Jf);
            z = zf;
            J = Jf;
        });
        return {map_back(z), std::move(J), max_radius};
    }

    /// Reverse-time flow of the same field; composition with the forward map
    /// is the identity up to integrator error. Test oracle.
    LocalizedDiffeo inverse() const {
        LocalizedDiffeo inv(*this);
        inv.A_prime_ = -A_prime_;
        inv.b_prime_ = -b_prime_;
        inv.b_ = affine_exp(inv.A_prime_, inv.b_prime_).b;
        inv.a_ = -a_;
        inv.a_.head(d_) = inv.b_;
        return inv;
    }

private:
    // The true trajectory cannot leave the ball where the field vanishes, but
    // a coarse integrator can overshoot the boundary by a little; map back
    // without the public chart precondition and only reject gross escapes.
    TorusPoint map_back(const Vector& z) const {
        if (z.norm() > 2.0 * bump_.r_out)
            throw NumericalError("LocalizedDiffeo: integrator escaped the chart ball");
        return TorusPoint(chart_.center.coords + chart_.scale * z);
    }

    ChartSpec chart_;
    BumpProfile bump_;
    int steps_;
    int d_;
    Matrix A_prime_;
    Vector b_;
    Vector a_;
    Vector b_prime_;
};

using MapFactor = std::variant<AffineTorusMap, LocalizedDiffeo>;

inline int factor_dim(const MapFactor& f) {
    return std::visit([](const auto& m) { return m.dim(); }, f);
}

inline TorusPoint factor_apply(const MapFactor& f, const TorusPoint& y) {
    return std::visit([&](const auto& m) { return m.apply(y); }, f);
}

inline std::pair<TorusPoint, Matrix> factor_apply_with_jacobian(const MapFactor& f,
                                                                const TorusPoint& y) {
    return std::visit([&](const auto& m) { return m.apply_with_jacobian(y); }, f);
}

/// Left-to-right composition: factors[0] acts first. The Jacobian is the
/// chain-rule product accumulated in matching order. An empty composition is
/// the identity.
class ComposedDiffeo {
public:
    ComposedDiffeo() = default;
    explicit ComposedDiffeo(std::vector<MapFactor> factors) : factors_(std::move(factors)) {
        for (std::size_t i = 1; i < factors_.size(); ++i)
            if (factor_dim(factors_[i]) != factor_dim(factors_[0]))
                throw ParameterError("ComposedDiffeo: inconsistent factor dimensions");
    }

    const std::vector<MapFactor>& factors() const { return factors_; }
    std::size_t size() const { return factors_.size(); }

    void append(MapFactor f) {
        if (!factors_.empty() && factor_dim(f) != factor_dim(factors_[0]))
            throw ParameterError("ComposedDiffeo: inconsistent factor dimensions");
        factors_.push_back(std::move(f));
    }

    void append_all(const ComposedDiffeo& other) {
        for (const auto& f : other.factors_) append(f);
    }

    TorusPoint apply(const TorusPoint& y) const {
        TorusPoint x = y;
        for (const auto& f : factors_) x = factor_apply(f, x);
        return x;
    }

    std::pair<TorusPoint, Matrix> apply_with_jacobian(const TorusPoint& y) const {
        TorusPoint x = y;
        Matrix J = Matrix::Identity(y.dim(), y.dim());
        for (const auto& f : factors_) {
            auto [x2, Jf] = factor_apply_with_jacobian(f, x);
            J = (Jf * J).eval();
            x = std::move(x2);
        }
        return {std::move(x), std::move(J)};
    }

private:
    std::vector<MapFactor> factors_;
};

inline ComposedDiffeo compose(std::vector<MapFactor> factors) {
    return ComposedDiffeo(std::move(factors));
}

} // namespace uecert
