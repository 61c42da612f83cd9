#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "uecert/certify.hpp"
#include "uecert/exterior.hpp"
#include "uecert/fields.hpp"
#include "uecert/flow.hpp"
#include "uecert/lyapunov.hpp"
#include "uecert/walk.hpp"

namespace uecert {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;     // measured worst case
    double threshold = 0.0; // pass iff value <= threshold
};

struct SelfcheckSummary {
    std::vector<CheckResult> checks;
    int failures = 0;
    std::uint64_t seed = 0;
};

/// Test-only mutation hooks; selfcheck with a mutation enabled must fail the
/// corresponding check, which guards the checks themselves against rotting.
struct SelfcheckOptions {
    bool mutate_stream_coefficient = false; // divergence identity with 1/(d+1) instead of 1/d
    int integrator_steps_override = 0;      // 0 keeps the default
};

namespace detail {

inline Vector random_param_vector(Rng& rng, int d, double amp) {
    const int dp = d * d + d - 1;
    Vector a(dp);
    for (int i = 0; i < dp; ++i) a[i] = rng.uniform(-amp, amp);
    return a;
}

inline Matrix random_matrix(Rng& rng, int rows, int cols, double amp = 1.0) {
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = rng.uniform(-amp, amp);
    return M;
}

} // namespace detail

/// Runs the cross-module invariant battery at fixed derived seeds with
/// reduced budgets; the full-budget versions live in the test suites.
inline SelfcheckSummary selfcheck(std::uint64_t seed, const SelfcheckOptions& opt = {}) {
    SelfcheckSummary summary;
    summary.seed = seed;

    const auto add = [&](const std::string& name, double value, double threshold) {
        const bool ok = value <= threshold;
        summary.checks.push_back({name, ok, value, threshold});
        if (!ok) ++summary.failures;
    };

    // --- exterior -----------------------------------------------------------
    {
        Rng rng(derive_seed(seed, "sc-compound"));
        double worst = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            const Matrix A = detail::random_matrix(rng, 6, 6);
            const Matrix B = detail::random_matrix(rng, 6, 6);
            for (int k = 1; k <= 5; ++k) {
                const Matrix lhs = compound(A * B, k);
                const Matrix rhs = compound(A, k) * compound(B, k);
                worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() /
                                            std::max(1.0, rhs.cwiseAbs().maxCoeff()));
            }
        }
        add("compound-multiplicativity", worst, 1e-10);
    }
    {
        Rng rng(derive_seed(seed, "sc-compound-det"));
        double worst = 0.0;
        for (int trial = 0; trial < 8; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(4));
            const Matrix A = detail::random_matrix(rng, d, d);
            const Matrix c = compound(A, d);
            worst = std::max(worst, std::abs(c(0, 0) - A.determinant()) /
                                        std::max(1.0, std::abs(A.determinant())));
        }
        add("compound-determinant", worst, 1e-10);
    }
    {
        Rng rng(derive_seed(seed, "sc-additivity"));
        double worst = 0.0;
        for (int trial = 0; trial < 16; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(4));
            const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - 1)));
            const Matrix A =
                detail::random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
            const Matrix B =
                detail::random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
            const GrassmannPoint P = random_grassmann(rng, d, k);
            const double direct = log_expansion(B * A, P);
            const double chained = log_expansion(A, P) + log_expansion(B, transport(A, P));
            worst = std::max(worst, std::abs(direct - chained));
        }
        add("log-expansion-additivity", worst, 1e-10);
    }
    {
        Rng rng(derive_seed(seed, "sc-area"));
        double worst = 0.0;
        for (int trial = 0; trial < 16; ++trial) {
            Matrix M = detail::random_matrix(rng, 2, 2) + 1.5 * Matrix::Identity(2, 2);
            M /= std::sqrt(std::abs(M.determinant()));
            const GrassmannPoint P = random_grassmann(rng, 2, 1);
            // expansion of P-perp orthogonally to the transported image of P
            // (the second Benettin direction); the two must cancel for det 1
            Vector perp(2);
            perp << -P.frame()(1, 0), P.frame()(0, 0);
            const GrassmannPoint img = transport(M, P);
            const Vector w = M * perp;
            const double comp_exp =
                std::log((w - img.frame() * (img.frame().transpose() * w)).norm());
            worst = std::max(worst, std::abs(log_expansion(M, P) + comp_exp));
        }
        add("area-preservation-d2", worst, 1e-10);
    }
    {
        Rng rng(derive_seed(seed, "sc-transport"));
        double worst = 0.0;
        for (int trial = 0; trial < 16; ++trial) {
            const int d = 3;
            const int k = 1 + static_cast<int>(rng.below(2));
            const Matrix M =
                detail::random_matrix(rng, d, d) + 2.0 * Matrix::Identity(d, d);
            const GrassmannPoint P = random_grassmann(rng, d, k);
            // re-gauge the frame by a random rotation of its columns
            auto qr = thin_qr_positive(detail::random_matrix(rng, k, k));
            const GrassmannPoint P2(d, k, P.frame() * qr.Q);
            worst = std::max(worst, transport(M, P).distance_to(transport(M, P2)));
        }
        add("transport-frame-invariance", worst, 1e-9);
    }

    // --- fields --------------------------------------------------------------
    {
        Rng rng(derive_seed(seed, "sc-trace"));
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(5));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.99));
            worst = std::max(worst, std::abs(ascending_trace(gen.A_prime)));
        }
        add("generator-trace-zero", worst, 0.0);
    }
    {
        Rng rng(derive_seed(seed, "sc-antisym"));
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(4));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.9));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            Vector z(d);
            for (int i = 0; i < d; ++i) z[i] = rng.uniform(-2.0, 2.0);
            const Matrix S = stream_matrix(gen, bp, z);
            worst = std::max(worst, (S + S.transpose()).cwiseAbs().maxCoeff());
        }
        add("stream-antisymmetry", worst, 0.0);
    }
    {
        Rng rng(derive_seed(seed, "sc-divergence"));
        double worst = 0.0;
        const double fd = 1e-5;
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(3));
            const double ca = opt.mutate_stream_coefficient ? 1.0 / (d + 1) : 1.0 / d;
            const double cb = 1.0 / (d - 1);
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            Vector z(d);
            for (int i = 0; i < d; ++i) z[i] = rng.uniform(-2.0, 2.0);
            const Vector target = gen.A_prime * z + bp;
            for (int i = 0; i < d; ++i) {
                double div = 0.0;
                for (int j = 0; j < d; ++j) {
                    Vector zp = z, zm = z;
                    zp[j] += fd;
                    zm[j] -= fd;
                    const Matrix Sp = detail::FieldCore<Eigen::Dynamic>::stream(
                        gen.A_prime, bp, zp, ca, cb);
                    const Matrix Sm = detail::FieldCore<Eigen::Dynamic>::stream(
                        gen.A_prime, bp, zm, ca, cb);
                    div += (Sp(i, j) - Sm(i, j)) / (2.0 * fd);
                }
                worst = std::max(worst, std::abs(div - target[i]));
            }
        }
        add("stream-divergence-identity", worst, 1e-6);
    }
    {
        Rng rng(derive_seed(seed, "sc-bump"));
        const BumpProfile bump;
        double worst = 0.0;
        for (int trial = 0; trial < 40; ++trial) {
            const int d = 2;
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            Vector z(d);
            const double r = rng.uniform01() < 0.5 ? rng.uniform(0.0, bump.r_in)
                                                   : rng.uniform(bump.r_out, bump.r_out + 1.0);
            const double phi = rng.uniform(0.0, 2.0 * M_PI);
            z << r * std::cos(phi), r * std::sin(phi);
            const auto [Y, DY] = bumped_field(gen, bp, bump, z);
            if (r <= bump.r_in) {
                worst = std::max(worst,
                                 (Y - (gen.A_prime * z + bp)).cwiseAbs().maxCoeff());
                worst = std::max(worst, (DY - gen.A_prime).cwiseAbs().maxCoeff());
            } else {
                worst = std::max(worst, Y.cwiseAbs().maxCoeff());
                worst = std::max(worst, DY.cwiseAbs().maxCoeff());
            }
        }
        add("bump-plateau-support-exact", worst, 0.0);
    }
    {
        Rng rng(derive_seed(seed, "sc-field-div"));
        const BumpProfile bump;
        const double fd = 1e-5;
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(2));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            Vector z(d);
            for (int i = 0; i < d; ++i) z[i] = rng.uniform(-2.1, 2.1);
            double div = 0.0;
            for (int j = 0; j < d; ++j) {
                Vector zp = z, zm = z;
                zp[j] += fd;
                zm[j] -= fd;
                div += (bumped_field(gen, bp, bump, zp).first[j] -
                        bumped_field(gen, bp, bump, zm).first[j]) /
                       (2.0 * fd);
            }
            worst = std::max(worst, std::abs(div));
        }
        add("field-divergence-free", worst, 1e-6);
    }
    {
        Rng rng(derive_seed(seed, "sc-field-jac"));
        const BumpProfile bump;
        const double fd = 1e-5;
        double worst = 0.0;
        for (int trial = 0; trial < 40; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(2));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            Vector z(d);
            for (int i = 0; i < d; ++i) z[i] = rng.uniform(-2.1, 2.1);
            const Matrix DY = bumped_field(gen, bp, bump, z).second;
            for (int j = 0; j < d; ++j) {
                Vector zp = z, zm = z;
                zp[j] += fd;
                zm[j] -= fd;
                const Vector col = (bumped_field(gen, bp, bump, zp).first -
                                    bumped_field(gen, bp, bump, zm).first) /
                                   (2.0 * fd);
                worst = std::max(worst, (DY.col(j) - col).cwiseAbs().maxCoeff());
            }
        }
        add("field-jacobian-vs-fd", worst, 1e-5);
    }

    // --- flow ----------------------------------------------------------------
    {
        Rng rng(derive_seed(seed, "sc-expdet"));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(5));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.99));
            const AffineMap m = affine_exp(gen.A_prime, Vector::Zero(d));
            worst = std::max(worst, std::abs(m.A.determinant() - 1.0));
        }
        add("affine-exp-det-one", worst, 1e-12);
    }
    {
        Rng rng(derive_seed(seed, "sc-exp-roundtrip"));
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int d = 2 + static_cast<int>(rng.below(4));
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.9));
            const Vector bp = affine_exp_inverse_translation(gen.A_prime, gen.b);
            const AffineMap m = affine_exp(gen.A_prime, bp);
            worst = std::max(worst, (m.b - gen.b).cwiseAbs().maxCoeff());
        }
        add("affine-exp-translation-roundtrip", worst, 1e-10);
    }
    const int flow_steps = opt.integrator_steps_override > 0 ? opt.integrator_steps_override : 384;
    {
        Rng rng(derive_seed(seed, "sc-flow-det"));
        const BumpProfile bump;
        double worst = 0.0;
        for (int trial = 0; trial < 60; ++trial) {
            const int d = 2;
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            ChartSpec chart(TorusPoint(Vector::Constant(d, 0.5)), 0.2, bump.r_out);
            LocalizedDiffeo g(chart, gen, bump, flow_steps);
            Vector y(d);
            for (int i = 0; i < d; ++i) y[i] = rng.uniform01();
            const auto [img, J] = g.apply_with_jacobian(TorusPoint(y));
            (void)img;
            worst = std::max(worst, std::abs(J.determinant() - 1.0));
        }
        add("flow-det-jacobian", worst, 1e-8);
    }
    {
        Rng rng(derive_seed(seed, "sc-flow-plateau"));
        const BumpProfile bump;
        double worst = 0.0;
        int validated = 0;
        for (int trial = 0; trial < 40; ++trial) {
            const int d = 2;
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            ChartSpec chart(TorusPoint(Vector::Constant(d, 0.25)), 0.2, bump.r_out);
            LocalizedDiffeo g(chart, gen, bump, flow_steps);
            Vector z0(d);
            do {
                for (int i = 0; i < d; ++i) z0[i] = rng.uniform(-1.0, 1.0);
            } while (z0.norm() > 1.0);
            const TorusPoint y = chart.back(z0);
            const auto t = g.apply_tracked(y);
            if (t.max_radius > bump.r_in) continue; // escapes the plateau: config-level case
            ++validated;
            const AffineMap m = g.affine_map();
            worst = std::max(
                worst, (chart.forward(t.image) - m.apply(chart.forward(y))).cwiseAbs().maxCoeff());
        }
        add("flow-plateau-agreement", validated > 0 ? worst : 1.0, 1e-8);
    }
    {
        Rng rng(derive_seed(seed, "sc-flow-jac"));
        const BumpProfile bump;
        const double fd = 2e-6;
        double worst = 0.0;
        for (int trial = 0; trial < 8; ++trial) {
            const int d = 2;
            const AffineGenerator gen =
                build_generator(d, detail::random_param_vector(rng, d, 0.4));
            ChartSpec chart(TorusPoint(Vector::Constant(d, 0.5)), 0.2, bump.r_out);
            LocalizedDiffeo g(chart, gen, bump, flow_steps);
            Vector y(d);
            for (int i = 0; i < d; ++i) y[i] = rng.uniform(0.3, 0.7);
            const TorusPoint yp(y);
            const Matrix J = g.apply_with_jacobian(yp).second;
            for (int j = 0; j < d; ++j) {
                Vector up = y, um = y;
                up[j] += fd;
                um[j] -= fd;
                const Vector col = wrapped_diff(g.apply(TorusPoint(up)), g.apply(TorusPoint(um))) /
                                   (2.0 * fd);
                worst = std::max(worst, (J.col(j) - col).cwiseAbs().maxCoeff());
            }
        }
        add("flow-jacobian-vs-fd", worst, 1e-5);
    }
    {
        Rng rng(derive_seed(seed, "sc-chain"));
        const BumpProfile bump;
        double worst = 0.0;
        for (int trial = 0; trial < 6; ++trial) {
            const int d = 2;
            WalkMeasure::Params params;
            params.d = d;
            params.integrator_steps = flow_steps;
            const WalkMeasure mu = WalkMeasure::build(params);
            const WordSample w = mu.sample_word(3, rng);
            Vector y(d);
            for (int i = 0; i < d; ++i) y[i] = rng.uniform01();
            TorusPoint x(y);
            const Matrix J = w.composed.apply_with_jacobian(x).second;
            Matrix Jprod = Matrix::Identity(d, d);
            TorusPoint cur = x;
            for (const auto& f : w.composed.factors()) {
                auto [nxt, Jf] = factor_apply_with_jacobian(f, cur);
                Jprod = (Jf * Jprod).eval();
                cur = nxt;
            }
            worst = std::max(worst, (J - Jprod).cwiseAbs().maxCoeff());
        }
        add("composition-chain-rule", worst, 1e-10);
    }

    // --- walk / lyapunov -------------------------------------------------------
    {
        Rng rng(derive_seed(seed, "sc-cover"));
        const auto cover = build_cover(2, 0.2);
        double worst = 0.0;
        for (int trial = 0; trial < 2000; ++trial) {
            Vector y(2);
            y << rng.uniform01(), rng.uniform01();
            const TorusPoint x(y);
            double best = 1.0;
            for (const auto& c : cover) best = std::min(best, torus_dist(x, c));
            worst = std::max(worst, best);
        }
        add("cover-radius", worst, 0.1 + 1e-12);
    }
    {
        Rng rng(derive_seed(seed, "sc-freq"));
        WalkMeasure::Params params;
        params.d = 2;
        params.integrator_steps = 8;
        const WalkMeasure mu = WalkMeasure::build(params);
        const int n = 20000;
        int f0_only = 0;
        for (int i = 0; i < n; ++i)
            if (mu.sample(rng).size() == 1) ++f0_only;
        const double p0 = mu.weights()[0];
        const double se = std::sqrt(p0 * (1.0 - p0) / n);
        add("sample-branch-frequency",
            std::abs(static_cast<double>(f0_only) / n - p0), 3.0 * se);
    }
    {
        Rng rng(derive_seed(seed, "sc-spectrum-id"));
        WalkMeasure::Params params;
        params.d = 2;
        params.p0 = 1.0;
        const WalkMeasure mu = WalkMeasure::build(params);
        const auto est = lyapunov_spectrum(mu, TorusPoint(Vector::Constant(2, 0.3)), 200, 10, rng);
        add("spectrum-identity-measure", est.spectrum.cwiseAbs().maxCoeff(), 0.0);
    }
    {
        Rng rng(derive_seed(seed, "sc-spectrum-sum"));
        WalkMeasure::Params params;
        params.d = 2;
        params.integrator_steps = flow_steps;
        const WalkMeasure mu = WalkMeasure::build(params);
        const auto est =
            lyapunov_spectrum(mu, TorusPoint(Vector::Constant(2, 0.37)), 2000, 100, rng);
        add("spectrum-volume-sum", std::abs(est.spectrum.sum()), 2e-3);
    }

    return summary;
}

} // namespace uecert
