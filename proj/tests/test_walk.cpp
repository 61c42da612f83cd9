#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

#include "uecert/walk.hpp"

using namespace uecert;

namespace {

WalkMeasure default_measure(int d = 2, int steps = 64) {
    WalkMeasure::Params p;
    p.d = d;
    p.integrator_steps = steps;
    return WalkMeasure::build(p);
}

} // namespace

TEST_CASE("cover grid size and covering radius for the d=2 defaults") {
    const auto cover = build_cover(2, 0.2);
    CHECK(cover.size() == 64); // spacing 1/8 from ceil(sqrt(2)/0.2) = 8

    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        Vector y(2);
        y << rng.uniform01(), rng.uniform01();
        const TorusPoint x(y);
        double best = 1.0;
        for (const auto& c : cover) best = std::min(best, torus_dist(x, c));
        worst = std::max(worst, best);
    }
    CHECK(worst <= 0.1); // s/2
}

TEST_CASE("cover rejects dimension one") {
    CHECK_THROWS_AS(build_cover(1, 0.2), ParameterError);
}

TEST_CASE("measure builder validates its ranges") {
    WalkMeasure::Params p;
    p.epsilon = 0.6;
    CHECK_THROWS_AS(WalkMeasure::build(p), ParameterError);
    p = {};
    p.chart_scale = 0.3; // 0.3 * 2.0 >= 1/2
    CHECK_THROWS_AS(WalkMeasure::build(p), ParameterError);
    p = {};
    p.d = 1;
    CHECK_THROWS_AS(WalkMeasure::build(p), ParameterError);
    p = {};
    CHECK_NOTHROW(WalkMeasure::build(p));
}

TEST_CASE("pure f0 measure always samples the base map") {
    WalkMeasure::Params p;
    p.d = 2;
    p.p0 = 1.0;
    const WalkMeasure mu = WalkMeasure::build(p);
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const ComposedDiffeo f = mu.sample(rng);
        REQUIRE(f.size() == 1);
    }
}

TEST_CASE("branch frequencies match the weights") {
    const WalkMeasure mu = default_measure();
    const double p0 = mu.weights()[0];
    CHECK(p0 == Catch::Approx(1.0 / 65.0).margin(1e-15));
    double total = 0.0;
    for (double w : mu.weights()) total += w;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));

    Rng rng(13);
    const int n = 100000;
    int base_hits = 0;
    std::vector<int> chart_hits(mu.base_points().size(), 0);
    for (int i = 0; i < n; ++i) {
        const ComposedDiffeo f = mu.sample(rng);
        if (f.size() == 1) {
            ++base_hits;
        } else {
            const auto& g = std::get<LocalizedDiffeo>(f.factors()[1]);
            // recover the branch from the chart center
            for (std::size_t b = 0; b < mu.base_points().size(); ++b)
                if (torus_dist(g.chart().center, mu.base_points()[b]) < 1e-12) {
                    ++chart_hits[b];
                    break;
                }
        }
    }
    const double se0 = std::sqrt(p0 * (1 - p0) / n);
    CHECK(std::abs(static_cast<double>(base_hits) / n - p0) <= 3.0 * se0);
    const double pi = mu.weights()[1];
    const double sei = std::sqrt(pi * (1 - pi) / n);
    for (std::size_t b = 0; b < chart_hits.size(); ++b)
        CHECK(std::abs(static_cast<double>(chart_hits[b]) / n - pi) <= 4.0 * sei);
}

TEST_CASE("sampled factors preserve volume") {
    WalkMeasure::Params p;
    p.d = 2;
    p.integrator_steps = 384;
    const WalkMeasure mu = WalkMeasure::build(p);
    Rng rng(17);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ComposedDiffeo f = mu.sample(rng);
        Vector y(2);
        y << rng.uniform01(), rng.uniform01();
        const Matrix J = f.apply_with_jacobian(TorusPoint(y)).second;
        worst = std::max(worst, std::abs(J.determinant() - 1.0));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("sampled parameters stay inside the cube") {
    const WalkMeasure mu = default_measure();
    Rng rng(19);
    for (int i = 0; i < 500; ++i) {
        const ComposedDiffeo f = mu.sample(rng);
        if (f.size() < 2) continue;
        const auto& g = std::get<LocalizedDiffeo>(f.factors()[1]);
        CHECK(g.parameters().cwiseAbs().maxCoeff() <= mu.epsilon());
    }
}

TEST_CASE("word sampling composes draws in order") {
    const WalkMeasure mu = default_measure(2, 48);
    Rng rng(23);

    const WordSample w1 = mu.sample_word(1, rng);
    CHECK(w1.factors.size() == 1);

    const WordSample w3 = mu.sample_word(3, rng);
    CHECK(w3.factors.size() == 3);
    Vector y(2);
    y << 0.41, 0.77;
    TorusPoint x(y);
    Matrix Jprod = Matrix::Identity(2, 2);
    TorusPoint cur = x;
    for (const auto& f : w3.factors) {
        auto [nxt, Jf] = f.apply_with_jacobian(cur);
        Jprod = (Jf * Jprod).eval();
        cur = nxt;
    }
    const auto [img, J] = w3.composed.apply_with_jacobian(x);
    CHECK(torus_dist(img, cur) == 0.0);
    CHECK((J - Jprod).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("identity-only measure words compose to the identity") {
    WalkMeasure::Params p;
    p.d = 2;
    p.p0 = 1.0;
    const WalkMeasure mu = WalkMeasure::build(p);
    Rng rng(29);
    const WordSample w = mu.sample_word(5, rng);
    Vector y(2);
    y << 0.123, 0.456;
    const auto [img, J] = w.composed.apply_with_jacobian(TorusPoint(y));
    CHECK(img.coords == Vector(y));
    CHECK(J.isIdentity(0.0));
}

TEST_CASE("discretization produces the centered atom grid") {
    const WalkMeasure mu = default_measure();

    const WalkMeasure m1 = mu.discretize(1);
    CHECK(m1.support_size() == 64 + 1);
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const ComposedDiffeo f = m1.sample(rng);
        if (f.size() < 2) continue;
        const auto& g = std::get<LocalizedDiffeo>(f.factors()[1]);
        CHECK(g.parameters().cwiseAbs().maxCoeff() == 0.0); // single atom at a = 0
    }

    const WalkMeasure m2 = mu.discretize(2);
    CHECK(m2.support_size() == 64ull * 32ull + 1ull); // 2049

    // centered grid values: (2t+1-m)/m * eps
    CHECK(m2.atom_coordinate(0) == Catch::Approx(-0.2).margin(1e-15));
    CHECK(m2.atom_coordinate(1) == Catch::Approx(0.2).margin(1e-15));
    const WalkMeasure m3 = mu.discretize(3);
    CHECK(m3.atom_coordinate(1) == 0.0);
    CHECK(m3.atom_coordinate(0) == Catch::Approx(-m3.atom_coordinate(2)).margin(1e-15));

    // atoms live inside the continuous cube, and each axis mean is zero
    for (int i = 0; i < 200; ++i) {
        const ComposedDiffeo f = m3.sample(rng);
        if (f.size() < 2) continue;
        const auto& g = std::get<LocalizedDiffeo>(f.factors()[1]);
        CHECK(g.parameters().cwiseAbs().maxCoeff() <= mu.epsilon());
    }
    double mean = 0.0;
    for (int t = 0; t < 3; ++t) mean += m3.atom_coordinate(t);
    CHECK(mean == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("discretization enforces the support budget") {
    WalkMeasure::Params p;
    p.d = 2;
    p.support_cap = 100000;
    const WalkMeasure mu = WalkMeasure::build(p);
    CHECK_NOTHROW(mu.discretize(3)); // 64 * 243 + 1
    CHECK_THROWS_AS(mu.discretize(5), BudgetError); // 64 * 5^5 + 1 = 200001
}

TEST_CASE("sampling is reproducible from the seed") {
    const WalkMeasure mu = default_measure();
    Rng r1(1234), r2(1234);
    for (int i = 0; i < 50; ++i) {
        const ComposedDiffeo a = mu.sample(r1);
        const ComposedDiffeo b = mu.sample(r2);
        REQUIRE(a.size() == b.size());
        if (a.size() == 2) {
            const auto& ga = std::get<LocalizedDiffeo>(a.factors()[1]);
            const auto& gb = std::get<LocalizedDiffeo>(b.factors()[1]);
            CHECK(ga.parameters() == gb.parameters());
            CHECK(ga.chart().center.coords == gb.chart().center.coords);
        }
    }
}
