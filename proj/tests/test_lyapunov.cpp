#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uecert/exterior.hpp"
#include "uecert/lyapunov.hpp"

using namespace uecert;

namespace {

// log of the leading eigenvalue (3 + sqrt(5))/2 of [[2,1],[1,1]]
const double kCatExponent = std::log((3.0 + std::sqrt(5.0)) / 2.0);

WalkMeasure delta_measure(Matrix L, int d) {
    WalkMeasure::Params p;
    p.d = d;
    p.p0 = 1.0;
    p.f0 = AffineTorusMap(std::move(L), Vector::Zero(d));
    return WalkMeasure::build(p);
}

WalkMeasure cat_measure() {
    Matrix L(2, 2);
    L << 2, 1, 1, 1;
    return delta_measure(std::move(L), 2);
}

WalkMeasure constructed_measure(int d = 2, int steps = 384) {
    WalkMeasure::Params p;
    p.d = d;
    p.integrator_steps = steps;
    return WalkMeasure::build(p);
}

TorusPoint point2(double a, double b) {
    Vector v(2);
    v << a, b;
    return TorusPoint(v);
}

} // namespace

TEST_CASE("cat map spectrum matches the eigenvalue logs") {
    Rng rng(41);
    const auto est =
        lyapunov_spectrum(cat_measure(), point2(0.317, 0.593), 10000, 100, rng);
    REQUIRE(est.spectrum.size() == 2);
    CHECK(est.spectrum[0] == Catch::Approx(kCatExponent).margin(1e-3));
    CHECK(est.spectrum[1] == Catch::Approx(-kCatExponent).margin(1e-3));
}

TEST_CASE("identity measure has an exactly zero spectrum") {
    WalkMeasure::Params p;
    p.d = 2;
    p.p0 = 1.0;
    Rng rng(43);
    const auto est =
        lyapunov_spectrum(WalkMeasure::build(p), point2(0.5, 0.25), 500, 50, rng);
    CHECK(est.spectrum.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constructed measure spectrum sums to zero within tolerance") {
    Rng rng(47);
    const auto est =
        lyapunov_spectrum(constructed_measure(), point2(0.317, 0.593), 10000, 100, rng);
    CHECK(std::abs(est.spectrum.sum()) <= 2e-3);
    CHECK(est.spectrum[0] >= est.spectrum[1]); // sorted descending
    // the constructed walk is visibly hyperbolic at these defaults
    CHECK(est.spectrum[0] > 0.1);
}

TEST_CASE("lyapunov spectrum is deterministic given the seed") {
    Rng r1(53), r2(53);
    const auto a = lyapunov_spectrum(constructed_measure(2, 48), point2(0.1, 0.9), 400, 40, r1);
    const auto b = lyapunov_spectrum(constructed_measure(2, 48), point2(0.1, 0.9), 400, 40, r2);
    CHECK(a.spectrum == b.spectrum);
}

TEST_CASE("lyapunov spectrum input validation") {
    Rng rng(57);
    CHECK_THROWS_AS(
        lyapunov_spectrum(constructed_measure(2, 16), point2(0.1, 0.2), 10, 10, rng),
        ParameterError);
}

TEST_CASE("top exponent partial sums") {
    LyapunovEstimate est;
    est.spectrum = Vector(3);
    est.spectrum << 0.7, 0.1, -0.8;
    CHECK(top_exponent_k(est, 1) == Catch::Approx(0.7));
    CHECK(top_exponent_k(est, 2) == Catch::Approx(0.8));
    CHECK_THROWS_AS(top_exponent_k(est, 4), ParameterError);

    // partial sums of a sorted spectrum are concave in k
    const double d1 = top_exponent_k(est, 2) - top_exponent_k(est, 1);
    const double d2 = top_exponent_k(est, 3) - top_exponent_k(est, 2);
    CHECK(d1 <= 0.7 + 1e-15);
    CHECK(d2 <= d1 + 1e-15);
}

TEST_CASE("compound cocycle reproduces the top-k exponent sum") {
    // one shared orbit, two estimates: QR on the base cocycle summed over the
    // top two exponents, and QR on the second compound matrices directly
    const int d = 3, k = 2, n = 4000, discard = 100;
    const WalkMeasure mu = constructed_measure(d, 96);
    Rng rng(61);
    TorusPoint x(Vector::Constant(d, 0.37));

    Matrix Q = Matrix::Identity(d, d);
    const auto dk = static_cast<Eigen::Index>(binomial(d, k));
    Matrix Qc = Matrix::Identity(dk, dk);
    Vector logsum = Vector::Zero(d);
    double logsum_c = 0.0;
    int kept = 0;
    for (int t = 0; t < n; ++t) {
        const ComposedDiffeo f = mu.sample(rng);
        auto [x2, J] = f.apply_with_jacobian(x);
        x = x2;
        auto qr = thin_qr_positive(J * Q);
        Q = qr.Q;
        auto qrc = thin_qr_positive(compound(J, k) * Qc);
        Qc = qrc.Q;
        if (t >= discard) {
            for (int i = 0; i < d; ++i) logsum[i] += std::log(qr.R(i, i));
            logsum_c += std::log(qrc.R(0, 0));
            ++kept;
        }
    }
    LyapunovEstimate est;
    est.spectrum = logsum / kept;
    std::sort(est.spectrum.data(), est.spectrum.data() + d, std::greater<double>());
    const double via_sum = top_exponent_k(est, k);
    const double via_compound = logsum_c / kept;
    CHECK(via_sum == Catch::Approx(via_compound).margin(1e-3));
}

TEST_CASE("expected log expansion of the identity measure is exactly zero") {
    WalkMeasure::Params p;
    p.d = 2;
    p.p0 = 1.0;
    const WalkMeasure mu = WalkMeasure::build(p);
    Rng rng(67);
    const GrassmannPoint P = GrassmannPoint::span_axis(2, 0);
    const auto est = expected_log_expansion(mu, point2(0.3, 0.8), P, 3, 16, rng);
    CHECK(est.mean == 0.0);
    CHECK(est.std_error == 0.0);
    CHECK(est.degenerate_count == 0);
}

TEST_CASE("deterministic cat measure gives the exact single-step expansion") {
    const WalkMeasure mu = cat_measure();
    Rng rng(71);
    const GrassmannPoint e1 = GrassmannPoint::span_axis(2, 0);
    const auto est = expected_log_expansion(mu, point2(0.25, 0.5), e1, 1, 8, rng);
    CHECK(est.mean == Catch::Approx(std::log(std::sqrt(5.0))).margin(1e-14));
    CHECK(est.std_error == 0.0);

    // N = 2 equals the expansion of the squared matrix
    Matrix L(2, 2);
    L << 2, 1, 1, 1;
    const auto est2 = expected_log_expansion(mu, point2(0.25, 0.5), e1, 2, 8, rng);
    CHECK(est2.mean == Catch::Approx(log_expansion(L * L, e1)).margin(1e-12));
}

TEST_CASE("expansion grows linearly in N for the deterministic toral map") {
    const WalkMeasure mu = cat_measure();
    Rng rng(73);
    Rng dir_rng(74);
    const GrassmannPoint P = random_grassmann(dir_rng, 2, 1);
    for (int N : {20, 40}) {
        const auto est = expected_log_expansion(mu, point2(0.11, 0.63), P, N, 4, rng);
        CHECK(std::abs(est.mean / N - kCatExponent) <= 0.05 * kCatExponent);
    }
}

TEST_CASE("expansion estimate is reproducible and thread-count independent") {
    const WalkMeasure mu = constructed_measure(2, 48);
    const GrassmannPoint P = GrassmannPoint::span_axis(2, 1);
    Rng r1(79), r2(79);
    const auto a = expected_log_expansion(mu, point2(0.4, 0.2), P, 2, 64, r1);

    setenv("UECERT_THREADS", "1", 1);
    const auto b = expected_log_expansion(mu, point2(0.4, 0.2), P, 2, 64, r2);
    unsetenv("UECERT_THREADS");

    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
}
