#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "uecert/errors.hpp"
#include "uecert/fields.hpp"
#include "uecert/flow.hpp"
#include "uecert/rng.hpp"
#include "uecert/torus.hpp"

namespace uecert {

/// Regular grid of chart base points whose scale/2 balls cover the torus:
/// spacing h = 1/m with m = ceil(sqrt(d)/s), so the covering radius
/// h*sqrt(d)/2 is at most s/2.
inline std::vector<TorusPoint> build_cover(int d, double chart_scale) {
    if (d < 2) throw ParameterError("build_cover: need d >= 2 (Grassmann range is empty below)");
    if (!(chart_scale > 0.0)) throw ParameterError("build_cover: chart scale must be positive");
    const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)) / chart_scale));
    std::vector<TorusPoint> points;
    std::vector<int> idx(d, 0);
    while (true) {
        Vector c(d);
        for (int i = 0; i < d; ++i) c[i] = static_cast<double>(idx[i]) / m;
        points.emplace_back(std::move(c));
        int i = d - 1;
        while (i >= 0 && ++idx[i] == m) idx[i--] = 0;
        if (i < 0) break;
    }
    return points;
}

struct WordSample {
    std::vector<ComposedDiffeo> factors; // the N independent draws, first applied first
    ComposedDiffeo composed;
};

/// The measure mu: with weight p_0 the base map f_0, else a localized map
/// g_{x_i}^a composed onto f_0, with a uniform on [-eps, eps]^{d'} (or on the
/// centered grid of atoms after discretization).
class WalkMeasure {
public:
    struct Params {
        int d = 2;
        std::optional<AffineTorusMap> f0; // absent = identity
        double epsilon = 0.4;
        double chart_scale = 0.2;
        BumpProfile bump{};
        int integrator_steps = 384;
        double p0 = -1.0; // negative = default 1/(j+1)
        std::uint64_t support_cap = 10'000'000;
    };

    static WalkMeasure build(const Params& p) {
        if (p.d < 2) throw ParameterError("WalkMeasure: need d >= 2");
        if (!(p.epsilon > 0.0 && p.epsilon < 0.5))
            throw ParameterError("WalkMeasure: epsilon must lie in (0, 1/2)");
        if (!(p.chart_scale * p.bump.r_out < 0.5))
            throw ParameterError("WalkMeasure: need chart_scale * r_out < 1/2");
        if (p.integrator_steps < 1)
            throw ParameterError("WalkMeasure: integrator steps must be >= 1");
        if (p.f0 && p.f0->dim() != p.d)
            throw ParameterError("WalkMeasure: f0 dimension mismatch");

        WalkMeasure m;
        m.d_ = p.d;
        m.f0_ = p.f0;
        m.epsilon_ = p.epsilon;
        m.chart_scale_ = p.chart_scale;
        m.bump_ = p.bump;
        m.steps_ = p.integrator_steps;
        m.support_cap_ = p.support_cap;
        m.base_points_ = build_cover(p.d, p.chart_scale);
        const auto j = m.base_points_.size();
        double p0 = p.p0 < 0.0 ? 1.0 / static_cast<double>(j + 1) : p.p0;
        // p0 = 1 gives the pure delta measure on f0, used as a test oracle
        if (!(p0 > 0.0 && p0 <= 1.0))
            throw ParameterError("WalkMeasure: p0 must lie in (0, 1]");
        m.weights_.assign(j + 1, (1.0 - p0) / static_cast<double>(j));
        m.weights_[0] = p0;
        return m;
    }

    int d() const { return d_; }
    int param_dim() const { return d_ * d_ + d_ - 1; }
    double epsilon() const { return epsilon_; }
    double chart_scale() const { return chart_scale_; }
    const BumpProfile& bump() const { return bump_; }
    int integrator_steps() const { return steps_; }
    const std::vector<TorusPoint>& base_points() const { return base_points_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::optional<AffineTorusMap>& f0() const { return f0_; }
    bool discretized() const { return grid_per_axis_ > 0; }
    int grid_per_axis() const { return grid_per_axis_; }

    AffineTorusMap f0_map() const { return f0_ ? *f0_ : AffineTorusMap::identity(d_); }

    /// Number of support atoms after discretization (j * m^{d'} + 1).
    std::uint64_t support_size() const {
        if (!discretized()) return 0;
        std::uint64_t atoms = 1;
        for (int i = 0; i < param_dim(); ++i) atoms *= static_cast<std::uint64_t>(grid_per_axis_);
        return static_cast<std::uint64_t>(base_points_.size()) * atoms + 1;
    }

    /// Replace each continuous parameter cube by the centered m^{d'} grid of
    /// equal-weight atoms. The discretized support is a subset of the cube.
    WalkMeasure discretize(int grid_per_axis) const {
        if (grid_per_axis < 1) throw ParameterError("discretize: grid_per_axis must be >= 1");
        WalkMeasure m = *this;
        m.grid_per_axis_ = grid_per_axis;
        const int dp = param_dim();
        long double atoms = 1.0L;
        for (int i = 0; i < dp; ++i) atoms *= grid_per_axis;
        const long double total =
            atoms * static_cast<long double>(base_points_.size()) + 1.0L;
        if (total > static_cast<long double>(support_cap_))
            throw BudgetError("discretize: support size exceeds the configured cap");
        return m;
    }

    /// Atom value on the centered per-axis grid: (2t + 1 - m)/m * epsilon.
    double atom_coordinate(int t) const {
        return epsilon_ * (2.0 * t + 1.0 - grid_per_axis_) / grid_per_axis_;
    }

    /// One draw from the measure. Factor structure is f_0 followed by the
    /// localized map, or f_0 alone on the p_0 branch.
    ComposedDiffeo sample(Rng& rng) const {
        const double u = rng.uniform01();
        std::vector<MapFactor> fs;
        fs.emplace_back(f0_map());
        if (u >= weights_[0]) {
            // pick a base point; weights beyond p0 are uniform
            const auto j = base_points_.size();
            std::size_t i = static_cast<std::size_t>(rng.below(j));
            Vector a(param_dim());
            if (!discretized()) {
                for (int c = 0; c < param_dim(); ++c) a[c] = rng.uniform(-epsilon_, epsilon_);
            } else {
                for (int c = 0; c < param_dim(); ++c)
                    a[c] = atom_coordinate(static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(grid_per_axis_))));
            }
            AffineGenerator gen = build_generator(d_, a);
            ChartSpec chart(base_points_[i], chart_scale_, bump_.r_out);
            fs.emplace_back(LocalizedDiffeo(std::move(chart), std::move(gen), bump_, steps_));
        }
        return ComposedDiffeo(std::move(fs));
    }

    /// N independent draws composed left to right (first drawn applied first).
    WordSample sample_word(int N, Rng& rng) const {
        if (N < 1) throw ParameterError("sample_word: need N >= 1");
        WordSample w;
        w.factors.reserve(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) {
            w.factors.push_back(sample(rng));
            w.composed.append_all(w.factors.back());
        }
        return w;
    }

private:
    int d_ = 2;
    std::optional<AffineTorusMap> f0_;
    double epsilon_ = 0.4;
    double chart_scale_ = 0.2;
    BumpProfile bump_{};
    int steps_ = 384;
    std::uint64_t support_cap_ = 10'000'000;
    std::vector<TorusPoint> base_points_;
    std::vector<double> weights_;
    int grid_per_axis_ = 0; // 0 = continuous support
};

} // namespace uecert
