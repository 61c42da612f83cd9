#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uecert/exterior.hpp"

using namespace uecert;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) {
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = rng.uniform(-1.0, 1.0);
    return M;
}

} // namespace

TEST_CASE("first compound is the matrix itself") {
    Rng rng(11);
    const Matrix M = random_matrix(rng, 4, 4);
    CHECK((compound(M, 1) - M).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compound of the identity is the identity") {
    for (int d = 2; d <= 5; ++d)
        for (int k = 1; k <= d; ++k) CHECK(compound(Matrix::Identity(d, d), k).isIdentity(0.0));
}

TEST_CASE("compound of diag(1,2,3) at k=2 in lexicographic basis order") {
    Matrix D = Matrix::Zero(3, 3);
    D(0, 0) = 1.0;
    D(1, 1) = 2.0;
    D(2, 2) = 3.0;
    const Matrix C = compound(D, 2);
    // basis order e1^e2, e1^e3, e2^e3
    Matrix expect = Matrix::Zero(3, 3);
    expect(0, 0) = 2.0;
    expect(1, 1) = 3.0;
    expect(2, 2) = 6.0;
    CHECK((C - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("compound rejects out-of-range k") {
    const Matrix M = Matrix::Identity(3, 3);
    CHECK_THROWS_AS(compound(M, 0), ParameterError);
    CHECK_THROWS_AS(compound(M, 4), ParameterError);
}

TEST_CASE("compound is multiplicative on random 10x10 matrices") {
    Rng rng(22);
    for (int k : {1, 2, 5}) {
        const Matrix A = random_matrix(rng, 10, 10);
        const Matrix B = random_matrix(rng, 10, 10);
        const Matrix lhs = compound(A * B, k);
        const Matrix rhs = compound(A, k) * compound(B, k);
        const double rel =
            (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
        CHECK(rel < 1e-10);
    }
}

TEST_CASE("top compound recovers the determinant") {
    Rng rng(33);
    for (int d = 2; d <= 6; ++d) {
        const Matrix M = random_matrix(rng, d, d);
        const Matrix C = compound(M, d);
        REQUIRE(C.rows() == 1);
        CHECK(std::abs(C(0, 0) - M.determinant()) <
              1e-10 * std::max(1.0, std::abs(M.determinant())));
    }
}

TEST_CASE("gram log volume closed forms") {
    // orthonormal pair: unit square
    Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
    e1[0] = 1.0;
    e2[1] = 1.0;
    CHECK(gram_log_volume({e1, e2}) == Catch::Approx(0.0).margin(1e-14));

    // single vector: euclidean norm
    Vector v(3);
    v << 3.0, 4.0, 0.0;
    CHECK(gram_log_volume({v}) == Catch::Approx(std::log(5.0)).epsilon(1e-14));

    // det [[1,1],[1,2]] = 1
    Vector a(3), b(3);
    a << 1.0, 0.0, 0.0;
    b << 1.0, 1.0, 0.0;
    CHECK(gram_log_volume({a, b}) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("gram log volume signals degenerate input") {
    Vector a(3), b(3);
    a << 1.0, 2.0, 3.0;
    b = 2.0 * a;
    CHECK_THROWS_AS(gram_log_volume({a, b}), DegenerateVolumeError);
}

TEST_CASE("gram log volume is permutation invariant and scales by log|c|") {
    Rng rng(44);
    std::vector<Vector> vs;
    for (int i = 0; i < 3; ++i) {
        Vector v(5);
        for (int j = 0; j < 5; ++j) v[j] = rng.normal();
        vs.push_back(std::move(v));
    }
    const double base = gram_log_volume(vs);
    std::vector<Vector> perm{vs[2], vs[0], vs[1]};
    CHECK(gram_log_volume(perm) == Catch::Approx(base).margin(1e-12));

    const double c = -2.7;
    std::vector<Vector> scaled{vs[0], c * vs[1], vs[2]};
    CHECK(gram_log_volume(scaled) ==
          Catch::Approx(base + std::log(std::abs(c))).margin(1e-12));
}

TEST_CASE("log expansion closed forms") {
    const GrassmannPoint e1 = GrassmannPoint::span_axis(2, 0);
    const GrassmannPoint e2 = GrassmannPoint::span_axis(2, 1);
    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 2.0;
    D(1, 1) = 0.5;
    CHECK(log_expansion(Matrix::Identity(2, 2), e1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(log_expansion(D, e1) == Catch::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(log_expansion(D, e2) == Catch::Approx(-std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("log expansion agrees with the compound-matrix route") {
    Rng rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(5));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
        const Matrix M = random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
        const GrassmannPoint P = random_grassmann(rng, d, k);
        const double direct = log_expansion(M, P);
        const Vector image = compound(M, k) * plucker_coordinates(P);
        CHECK(direct == Catch::Approx(std::log(image.norm())).margin(1e-10));
    }
}

TEST_CASE("log expansion signals a collapsed image") {
    Rng rng(1);
    Matrix M = Matrix::Zero(3, 3);
    M(0, 0) = 1.0; // rank one kills any 2-plane
    const GrassmannPoint P = random_grassmann(rng, 3, 2);
    CHECK_THROWS_AS(log_expansion(M, P), DegenerateVolumeError);
    CHECK_THROWS_AS(transport(M, P), DegenerateVolumeError);
}

TEST_CASE("transport keeps invariant axes in place") {
    const GrassmannPoint e1 = GrassmannPoint::span_axis(2, 0);
    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 2.0;
    D(1, 1) = 1.0;
    CHECK(transport(D, e1).distance_to(e1) < 1e-14);
    CHECK(transport(Matrix::Identity(2, 2), e1).distance_to(e1) < 1e-14);
}

TEST_CASE("transport is frame-gauge invariant") {
    Rng rng(66);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(4));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
        const Matrix M = random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
        const GrassmannPoint P = random_grassmann(rng, d, k);
        const auto gauge = thin_qr_positive(random_matrix(rng, k, k));
        const GrassmannPoint P2(d, k, P.frame() * gauge.Q);
        CHECK(P.distance_to(P2) < 1e-12); // same subspace, different frame
        CHECK(transport(M, P).distance_to(transport(M, P2)) < 1e-9);
    }
}

TEST_CASE("additivity of log expansion along transport") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(5));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
        const Matrix A = random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
        const Matrix B = random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
        const GrassmannPoint P = random_grassmann(rng, d, k);
        CHECK(log_expansion(B * A, P) ==
              Catch::Approx(log_expansion(A, P) + log_expansion(B, transport(A, P)))
                  .margin(1e-10));
    }
}

TEST_CASE("area preservation for unimodular maps in the plane") {
    Rng rng(88);
    for (int trial = 0; trial < 30; ++trial) {
        Matrix M = random_matrix(rng, 2, 2) + 1.5 * Matrix::Identity(2, 2);
        M /= std::sqrt(std::abs(M.determinant()));
        const GrassmannPoint P = random_grassmann(rng, 2, 1);
        Vector perp(2);
        perp << -P.frame()(1, 0), P.frame()(0, 0);
        // expansion of the complement measured orthogonally to the transported
        // image of P (the second Benettin direction)
        const GrassmannPoint img = transport(M, P);
        const Vector w = M * perp;
        const double comp = std::log((w - img.frame() * (img.frame().transpose() * w)).norm());
        CHECK(log_expansion(M, P) + comp == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("random grassmann frames are orthonormal and uniform") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const GrassmannPoint P = random_grassmann(rng, 4, 2);
        CHECK((P.frame().transpose() * P.frame() - Matrix::Identity(2, 2))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }

    // chi-square uniformity of the line angle on [0, pi)
    const int bins = 16;
    const int n = 10000;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        const GrassmannPoint P = random_grassmann(rng, 2, 1);
        double theta = std::atan2(P.frame()(1, 0), P.frame()(0, 0));
        if (theta < 0.0) theta += M_PI;
        if (theta >= M_PI) theta -= M_PI;
        ++counts[std::min(bins - 1, static_cast<int>(theta / M_PI * bins))];
    }
    const double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 45.0); // chi2(15 dof) well past the p ~ 1e-4 tail

    // mean projector is (k/d) I within 3 standard errors, entrywise
    const int d = 3, k = 1, m = 100000;
    Matrix mean = Matrix::Zero(d, d);
    Matrix m2 = Matrix::Zero(d, d);
    for (int i = 0; i < m; ++i) {
        const Matrix pr = random_grassmann(rng, d, k).projector();
        mean += pr;
        m2 += pr.cwiseProduct(pr);
    }
    mean /= m;
    m2 /= m;
    const Matrix target = (static_cast<double>(k) / d) * Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double var = m2(i, j) - mean(i, j) * mean(i, j);
            const double se = std::sqrt(std::max(var, 1e-30) / m);
            CHECK(std::abs(mean(i, j) - target(i, j)) <= 3.0 * se + 1e-12);
        }
}

TEST_CASE("plucker coordinates of an orthonormal frame have unit norm") {
    Rng rng(111);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(5));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
        const GrassmannPoint P = random_grassmann(rng, d, k);
        CHECK(plucker_coordinates(P).norm() == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("grassmann point validates its invariants") {
    CHECK_THROWS_AS(GrassmannPoint(3, 1, Matrix::Ones(3, 1)), ParameterError);
    CHECK_THROWS_AS(GrassmannPoint(3, 3, Matrix::Identity(3, 3)), ParameterError);
    CHECK_THROWS_AS(GrassmannPoint(1, 1, Matrix::Identity(1, 1)), ParameterError);
}
