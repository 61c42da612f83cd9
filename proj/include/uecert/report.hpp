#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uecert/certify.hpp"
#include "uecert/errors.hpp"
#include "uecert/flow.hpp"
#include "uecert/lyapunov.hpp"
#include "uecert/selfcheck.hpp"
#include "uecert/walk.hpp"

namespace uecert {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

/// Full experiment configuration. Every range constraint from the library is
/// re-validated at parse time; an invalid value reports the violated
/// constraint by name. Unknown keys in a config file are errors.
struct RunConfig {
    int d = 2;
    std::string f0_type = "identity"; // "identity" | "toral_automorphism"
    std::vector<std::vector<double>> f0_matrix;
    std::vector<double> f0_translation;
    double epsilon = 0.4;
    double chart_scale = 0.2;
    double bump_r_in = 1.25;
    double bump_r_out = 2.0;
    int integrator_steps = 384;
    std::string weights_policy = "uniform";
    double p0 = -1.0; // negative = 1/(j+1)
    std::optional<int> discretize_grid;
    int sweep_size = 512;
    int mc_samples = 256;
    int refine_iters = 6;
    int n_steps = 10000;
    int discard = 100;
    std::vector<int> N_schedule = {1, 2, 4, 8, 16, 32};
    std::uint64_t seed = 42;
    std::string out_path = "uecert_report";
    int boxes_per_axis = 16;
    int rank_trials = 20;
    double rank_fd_step = 1e-4;
    std::vector<double> x0; // empty = library default

    json to_json() const {
        json j;
        j["d"] = d;
        json f0;
        f0["type"] = f0_type;
        if (f0_type == "toral_automorphism") {
            f0["matrix"] = f0_matrix;
            f0["translation"] = f0_translation;
        }
        j["f0"] = f0;
        j["epsilon"] = epsilon;
        j["chart_scale"] = chart_scale;
        j["bump"] = {{"r_in", bump_r_in}, {"r_out", bump_r_out}};
        j["integrator_steps"] = integrator_steps;
        json w;
        w["policy"] = weights_policy;
        if (p0 >= 0.0) w["p0"] = p0;
        j["weights"] = w;
        if (discretize_grid) j["discretize"] = {{"grid_per_axis", *discretize_grid}};
        j["budgets"] = {{"sweep_size", sweep_size},
                        {"mc_samples", mc_samples},
                        {"refine_iters", refine_iters},
                        {"n_steps", n_steps},
                        {"discard", discard}};
        j["N_schedule"] = N_schedule;
        j["seed"] = seed;
        j["out_path"] = out_path;
        j["boxes_per_axis"] = boxes_per_axis;
        j["rank_trials"] = rank_trials;
        j["rank_fd_step"] = rank_fd_step;
        if (!x0.empty()) j["x0"] = x0;
        return j;
    }
};

namespace detail {

inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) ok = true;
        if (!ok)
            throw ParameterError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
inline void read_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
    RunConfig c;
    detail::require_keys(
        j,
        {"d", "f0", "epsilon", "chart_scale", "bump", "integrator_steps", "weights",
         "discretize", "budgets", "N_schedule", "seed", "out_path", "boxes_per_axis",
         "rank_trials", "rank_fd_step", "x0"},
        "top level");
    detail::read_to(j, "d", c.d);
    if (j.contains("f0")) {
        const auto& f0 = j.at("f0");
        detail::require_keys(f0, {"type", "matrix", "translation"}, "f0");
        detail::read_to(f0, "type", c.f0_type);
        detail::read_to(f0, "matrix", c.f0_matrix);
        detail::read_to(f0, "translation", c.f0_translation);
    }
    detail::read_to(j, "epsilon", c.epsilon);
    detail::read_to(j, "chart_scale", c.chart_scale);
    if (j.contains("bump")) {
        const auto& b = j.at("bump");
        detail::require_keys(b, {"r_in", "r_out"}, "bump");
        detail::read_to(b, "r_in", c.bump_r_in);
        detail::read_to(b, "r_out", c.bump_r_out);
    }
    detail::read_to(j, "integrator_steps", c.integrator_steps);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        detail::require_keys(w, {"policy", "p0"}, "weights");
        detail::read_to(w, "policy", c.weights_policy);
        detail::read_to(w, "p0", c.p0);
    }
    if (j.contains("discretize")) {
        const auto& dd = j.at("discretize");
        detail::require_keys(dd, {"grid_per_axis"}, "discretize");
        int g = 0;
        detail::read_to(dd, "grid_per_axis", g);
        c.discretize_grid = g;
    }
    if (j.contains("budgets")) {
        const auto& b = j.at("budgets");
        detail::require_keys(b, {"sweep_size", "mc_samples", "refine_iters", "n_steps", "discard"},
                             "budgets");
        detail::read_to(b, "sweep_size", c.sweep_size);
        detail::read_to(b, "mc_samples", c.mc_samples);
        detail::read_to(b, "refine_iters", c.refine_iters);
        detail::read_to(b, "n_steps", c.n_steps);
        detail::read_to(b, "discard", c.discard);
    }
    detail::read_to(j, "N_schedule", c.N_schedule);
    detail::read_to(j, "seed", c.seed);
    detail::read_to(j, "out_path", c.out_path);
    detail::read_to(j, "boxes_per_axis", c.boxes_per_axis);
    detail::read_to(j, "rank_trials", c.rank_trials);
    detail::read_to(j, "rank_fd_step", c.rank_fd_step);
    detail::read_to(j, "x0", c.x0);
    return c;
}

/// Re-validates every range constraint owned by the library modules so that a
/// bad config fails here with a named constraint instead of deep inside a run.
inline void validate_config(const RunConfig& c) {
    if (c.d < 2) throw ParameterError("config: d must be >= 2");
    if (c.f0_type != "identity" && c.f0_type != "toral_automorphism")
        throw ParameterError("config: f0.type must be identity or toral_automorphism");
    if (!(c.epsilon > 0.0 && c.epsilon < 0.5))
        throw ParameterError("config: epsilon must lie in (0, 1/2)");
    if (!(c.chart_scale > 0.0))
        throw ParameterError("config: chart_scale must be positive");
    if (!(0.0 < c.bump_r_in && c.bump_r_in < c.bump_r_out))
        throw ParameterError("config: bump must satisfy 0 < r_in < r_out");
    if (!(c.chart_scale * c.bump_r_out < 0.5))
        throw ParameterError("config: need chart_scale * bump.r_out < 1/2");
    if (c.integrator_steps < 1)
        throw ParameterError("config: integrator_steps must be >= 1");
    if (c.weights_policy != "uniform")
        throw ParameterError("config: weights.policy must be uniform");
    if (c.p0 >= 0.0 && !(c.p0 > 0.0 && c.p0 <= 1.0))
        throw ParameterError("config: weights.p0 must lie in (0, 1]");
    if (c.discretize_grid && *c.discretize_grid < 1)
        throw ParameterError("config: discretize.grid_per_axis must be >= 1");
    if (c.sweep_size < 1 || c.mc_samples < 2 || c.refine_iters < 0)
        throw ParameterError("config: budgets must be positive (mc_samples >= 2)");
    if (c.n_steps <= c.discard || c.discard < 0)
        throw ParameterError("config: need n_steps > discard >= 0");
    if (c.N_schedule.empty())
        throw ParameterError("config: N_schedule must be non-empty");
    for (int n : c.N_schedule)
        if (n < 1) throw ParameterError("config: N_schedule entries must be >= 1");
    if (c.boxes_per_axis < 2)
        throw ParameterError("config: boxes_per_axis must be >= 2");
    if (c.rank_trials < 1)
        throw ParameterError("config: rank_trials must be >= 1");
    if (!(c.rank_fd_step > 0.0))
        throw ParameterError("config: rank_fd_step must be positive");
    if (!c.x0.empty() && static_cast<int>(c.x0.size()) != c.d)
        throw ParameterError("config: x0 must have d components");
}

inline WalkMeasure make_measure(const RunConfig& c) {
    WalkMeasure::Params p;
    p.d = c.d;
    p.epsilon = c.epsilon;
    p.chart_scale = c.chart_scale;
    p.bump = BumpProfile(c.bump_r_in, c.bump_r_out);
    p.integrator_steps = c.integrator_steps;
    p.p0 = c.p0;
    if (c.f0_type == "toral_automorphism") {
        const auto rows = c.f0_matrix.size();
        if (rows != static_cast<std::size_t>(c.d))
            throw ParameterError("config: f0.matrix must be d x d");
        Matrix L(c.d, c.d);
        for (int i = 0; i < c.d; ++i) {
            if (c.f0_matrix[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(c.d))
                throw ParameterError("config: f0.matrix must be d x d");
            for (int jj = 0; jj < c.d; ++jj)
                L(i, jj) = c.f0_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(jj)];
        }
        Vector t = Vector::Zero(c.d);
        for (std::size_t i = 0; i < c.f0_translation.size() && i < static_cast<std::size_t>(c.d);
             ++i)
            t[static_cast<Eigen::Index>(i)] = c.f0_translation[i];
        p.f0 = AffineTorusMap(std::move(L), std::move(t));
    }
    WalkMeasure m = WalkMeasure::build(p);
    if (c.discretize_grid) m = m.discretize(*c.discretize_grid);
    return m;
}

inline TorusPoint default_x0(const RunConfig& c) {
    if (!c.x0.empty()) {
        Vector v(c.d);
        for (int i = 0; i < c.d; ++i) v[i] = c.x0[static_cast<std::size_t>(i)];
        return TorusPoint(std::move(v));
    }
    Vector v(c.d);
    for (int i = 0; i < c.d; ++i) v[i] = wrap01(0.31 + 0.17 * i);
    return TorusPoint(std::move(v));
}

/// One emitted report document. Serialized as versioned JSON; parse of a
/// serialized record reproduces the record. The timestamp is only present
/// when explicitly requested, keeping default reports byte-reproducible.
struct ReportRecord {
    int schema_version = kSchemaVersion;
    std::string command;
    json config;
    std::uint64_t seed = 0;
    json payload;
    std::optional<std::string> timestamp;

    bool operator==(const ReportRecord&) const = default;

    json to_json() const {
        json j;
        j["schema_version"] = schema_version;
        j["command"] = command;
        j["config"] = config;
        j["seed"] = seed;
        j["payload"] = payload;
        if (timestamp) j["timestamp"] = *timestamp;
        return j;
    }

    std::string serialize() const { return to_json().dump(2) + "\n"; }

    static ReportRecord from_json(const json& j) {
        ReportRecord r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kSchemaVersion)
            throw ParameterError("report: unsupported schema_version");
        r.command = j.at("command").get<std::string>();
        r.config = j.at("config");
        r.seed = j.at("seed").get<std::uint64_t>();
        r.payload = j.at("payload");
        if (j.contains("timestamp")) r.timestamp = j.at("timestamp").get<std::string>();
        return r;
    }

    static ReportRecord parse(const std::string& text) {
        return from_json(json::parse(text));
    }
};

// ---- payload builders -------------------------------------------------------

inline json to_json(const CertificateReport& r) {
    json j;
    j["k"] = r.k;
    j["N"] = r.N;
    j["C_estimate"] = r.C_estimate;
    j["std_error"] = r.std_error;
    j["margin"] = r.margin;
    j["certified"] = r.certified;
    j["worst_point"] = std::vector<double>(r.worst_point.coords.data(),
                                           r.worst_point.coords.data() +
                                               r.worst_point.coords.size());
    if (r.worst_subspace) {
        std::vector<std::vector<double>> frame;
        const Matrix& F = r.worst_subspace->frame();
        for (Eigen::Index i = 0; i < F.rows(); ++i) {
            std::vector<double> row;
            for (Eigen::Index jj = 0; jj < F.cols(); ++jj) row.push_back(F(i, jj));
            frame.push_back(std::move(row));
        }
        j["worst_frame"] = frame;
    }
    j["sweep_size"] = r.sweep_size;
    j["mc_samples_per_site"] = r.mc_samples_per_site;
    j["refinement_iters"] = r.refinement_iters;
    j["confidence_note"] = r.confidence_note;
    j["seed"] = r.seed;
    return j;
}

inline json to_json(const RankCheckReport& r) {
    json j;
    j["numerical_rank"] = r.numerical_rank;
    j["expected_rank"] = r.expected_rank;
    j["param_dim"] = r.param_dim;
    j["singular_values"] = r.singular_values;
    j["point"] = std::vector<double>(r.point.coords.data(),
                                     r.point.coords.data() + r.point.coords.size());
    return j;
}

inline json to_json(const DiscrepancyReport& r) {
    json j;
    j["boxes_per_axis"] = r.boxes_per_axis;
    j["n_steps"] = r.n_steps;
    json cps = json::array();
    for (const auto& c : r.checkpoints)
        cps.push_back({{"step", c.step}, {"max_dev", c.max_dev}, {"mean_dev", c.mean_dev}});
    j["checkpoints"] = cps;
    return j;
}

inline json to_json(const SelfcheckSummary& s) {
    json j;
    json checks = json::array();
    for (const auto& c : s.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"value", c.value},
                          {"threshold", c.threshold}});
    j["checks"] = checks;
    j["failures"] = s.failures;
    return j;
}

// ---- CSV --------------------------------------------------------------------

/// Writes rows of doubles with a header line; numbers use %.17g so a reload
/// reproduces the values exactly.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open CSV output file: " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open output file: " + path);
    out << text;
}

} // namespace uecert
