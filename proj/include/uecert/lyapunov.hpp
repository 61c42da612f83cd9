#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "uecert/errors.hpp"
#include "uecert/exterior.hpp"
#include "uecert/parallel.hpp"
#include "uecert/rng.hpp"
#include "uecert/walk.hpp"

namespace uecert {

struct LyapunovEstimate {
    Vector spectrum; // sorted descending
    int n_steps = 0;
    int transient_discard = 0;
    std::uint64_t seed = 0;
};

/// QR (Benettin) estimate of the Lyapunov spectrum along one random orbit.
/// Each step multiplies the factor Jacobian onto an orthonormal frame and
/// re-orthonormalizes; the exponents are the averaged logs of the R diagonal
/// (sign fixed positive) over the kept steps.
inline LyapunovEstimate lyapunov_spectrum(
    const WalkMeasure& measure, const TorusPoint& x0, int n_steps, int discard, Rng& rng,
    const std::function<void(int, const Vector&)>& checkpoint = {}) {
    if (x0.dim() != measure.d()) throw ParameterError("lyapunov_spectrum: dimension mismatch");
    if (!(n_steps > discard && discard >= 0))
        throw ParameterError("lyapunov_spectrum: need n_steps > discard >= 0");

    const int d = measure.d();
    const std::uint64_t base = rng.next_u64();
    Rng orbit(derive_seed(base, "lyapunov-orbit"));

    TorusPoint x = x0;
    Matrix Q = Matrix::Identity(d, d);
    Vector logsum = Vector::Zero(d);
    int kept = 0;
    for (int t = 0; t < n_steps; ++t) {
        const ComposedDiffeo f = measure.sample(orbit);
        auto [x2, J] = f.apply_with_jacobian(x);
        x = std::move(x2);
        auto qr = thin_qr_positive(J * Q);
        Q = std::move(qr.Q);
        if (t >= discard) {
            for (int i = 0; i < d; ++i) {
                const double rii = qr.R(i, i);
                if (!(rii > 1e-300))
                    throw NumericalError("lyapunov_spectrum: QR diagonal collapsed");
                logsum[i] += std::log(rii);
            }
            ++kept;
            if (checkpoint) checkpoint(t + 1, Vector(logsum / kept));
        }
    }

    LyapunovEstimate est;
    est.spectrum = logsum / kept;
    std::sort(est.spectrum.data(), est.spectrum.data() + d, std::greater<double>());
    est.n_steps = n_steps;
    est.transient_discard = discard;
    est.seed = base;
    return est;
}

/// Top Lyapunov exponent of the k-th exterior cocycle: the sum of the top k
/// exponents of the base cocycle.
inline double top_exponent_k(const LyapunovEstimate& est, int k) {
    if (k < 1 || k > est.spectrum.size())
        throw ParameterError("top_exponent_k: k out of range");
    return est.spectrum.head(k).sum();
}

struct ExpansionEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
    int N = 0;
    TorusPoint point;
    GrassmannPoint subspace;
    int degenerate_count = 0;
};

/// Monte-Carlo estimate of the expected log expansion of the subspace P at x
/// after N random steps: mean over words w ~ mu^(N) of log ||D_x w (v_P)||.
/// Samples run concurrently on index-derived RNG streams, so the estimate is
/// reproducible for any worker count. Degenerate-volume samples are counted
/// and excluded.
inline ExpansionEstimate expected_log_expansion(const WalkMeasure& measure, const TorusPoint& x,
                                                const GrassmannPoint& P, int N, int n_samples,
                                                Rng& rng) {
    if (x.dim() != measure.d() || P.ambient_dim() != measure.d())
        throw ParameterError("expected_log_expansion: dimension mismatch");
    if (N < 1) throw ParameterError("expected_log_expansion: need N >= 1");
    if (n_samples < 2) throw ParameterError("expected_log_expansion: need n_samples >= 2");

    const std::uint64_t base = rng.next_u64();
    std::vector<double> values(static_cast<std::size_t>(n_samples));
    std::vector<char> degenerate(static_cast<std::size_t>(n_samples), 0);

    parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
        Rng stream(derive_seed(base, "expansion-word", i));
        const WordSample w = measure.sample_word(N, stream);
        try {
            auto [img, J] = w.composed.apply_with_jacobian(x);
            (void)img;
            values[i] = log_expansion(J, P);
        } catch (const DegenerateVolumeError&) {
            degenerate[i] = 1;
            values[i] = 0.0;
        }
    });

    // Welford reduction in index order: deterministic, and exactly zero
    // variance when every sample has the same value (delta measures)
    double mean = 0.0, m2 = 0.0;
    int kept = 0, bad = 0;
    for (int i = 0; i < n_samples; ++i) {
        if (degenerate[static_cast<std::size_t>(i)]) {
            ++bad;
            continue;
        }
        const double v = values[static_cast<std::size_t>(i)];
        ++kept;
        const double d1 = v - mean;
        mean += d1 / kept;
        m2 += d1 * (v - mean);
    }
    if (kept < 2)
        throw NumericalError("expected_log_expansion: too many degenerate samples");
    const double sd = std::sqrt(std::max(0.0, m2) / (kept - 1));

    ExpansionEstimate est{mean, sd / std::sqrt(static_cast<double>(kept)),
                          n_samples, N, x, P, bad};
    return est;
}

} // namespace uecert
