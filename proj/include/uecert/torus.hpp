#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "uecert/errors.hpp"
#include "uecert/linalg.hpp"

namespace uecert {

inline double wrap01(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y -= 1.0; // guards against floor rounding at the seam
    return y;
}

/// A point of the unit torus T^d, each coordinate in [0, 1).
struct TorusPoint {
    Vector coords;

    TorusPoint() = default;
    explicit TorusPoint(Vector c) : coords(std::move(c)) {
        for (Eigen::Index i = 0; i < coords.size(); ++i) coords[i] = wrap01(coords[i]);
    }

    int dim() const { return static_cast<int>(coords.size()); }
};

/// Componentwise representative of x - y in [-1/2, 1/2).
inline Vector wrapped_diff(const TorusPoint& x, const TorusPoint& y) {
    Vector m = x.coords - y.coords;
    for (Eigen::Index i = 0; i < m.size(); ++i) m[i] -= std::floor(m[i] + 0.5);
    return m;
}

inline double torus_dist(const TorusPoint& x, const TorusPoint& y) {
    return wrapped_diff(x, y).norm();
}

/// Translation-and-scaling chart phi: a torus ball around `center` is mapped
/// onto B_R(0) by z = wrap(y - center) / scale. On the flat torus this is a
/// volume chart, so divergence-free fields stay divergence free.
struct ChartSpec {
    TorusPoint center;
    double scale;
    double outer_radius;

    ChartSpec(TorusPoint c, double s, double R)
        : center(std::move(c)), scale(s), outer_radius(R) {
        if (!(R > 1.0)) throw ParameterError("ChartSpec: outer radius must exceed 1");
        if (!(s > 0.0) || !(s * R < 0.5))
            throw ParameterError("ChartSpec: need scale * outer_radius < 1/2 for injectivity");
    }

    Vector forward(const TorusPoint& y) const { return wrapped_diff(y, center) / scale; }

    TorusPoint back(const Vector& z) const {
        if (z.norm() >= outer_radius)
            throw ParameterError("ChartSpec::back: point outside the chart ball");
        return TorusPoint(center.coords + scale * z);
    }
};

} // namespace uecert
