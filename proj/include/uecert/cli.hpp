#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uecert/report.hpp"

namespace uecert {

// Exit codes: 0 success, 1 certification failure, 2 config error, 3 numerical failure.
enum ExitCode : int {
    kExitOk = 0,
    kExitCertificationFailed = 1,
    kExitConfigError = 2,
    kExitNumericalError = 3,
};

namespace cli_detail {

inline std::string iso_timestamp_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void emit(const RunConfig& cfg, const std::string& command, json payload,
                 bool stamp) {
    ReportRecord rec;
    rec.command = command;
    rec.config = cfg.to_json();
    rec.seed = cfg.seed;
    rec.payload = std::move(payload);
    if (stamp) rec.timestamp = iso_timestamp_now();
    write_text_file(cfg.out_path + ".json", rec.serialize());
}

inline int run_certify(const RunConfig& cfg, bool discretized, bool stamp) {
    RunConfig effective = cfg;
    if (discretized && !effective.discretize_grid)
        throw ParameterError("discretize-certify: config needs discretize.grid_per_axis");
    if (!discretized) effective.discretize_grid.reset();

    const WalkMeasure measure = make_measure(effective);
    CertifyBudgets budgets{effective.sweep_size, effective.mc_samples, effective.refine_iters};
    Rng rng(derive_seed(effective.seed, discretized ? "discretize-certify" : "certify"));
    const CertifyAllResult res =
        certify_all_dimensions(measure, effective.N_schedule, budgets, rng);

    json payload;
    json reports = json::array();
    bool all_ok = true;
    for (const auto& r : res.reports) {
        reports.push_back(to_json(r));
        all_ok = all_ok && r.certified;
    }
    payload["reports"] = reports;
    payload["warnings"] = res.warnings;
    payload["all_certified"] = all_ok;
    if (discretized) payload["support_size"] = measure.support_size();
    emit(effective, discretized ? "discretize-certify" : "certify", payload, stamp);

    std::vector<std::vector<double>> rows;
    for (const auto& r : res.scan)
        rows.push_back({static_cast<double>(r.k), static_cast<double>(r.N), r.C_estimate,
                        r.std_error, r.margin, r.certified ? 1.0 : 0.0});
    write_csv(effective.out_path + "_nscan.csv",
              {"k", "N", "C_estimate", "std_error", "margin", "certified"}, rows);

    for (const auto& r : res.reports)
        std::cout << "k=" << r.k << " N=" << r.N << " C=" << r.C_estimate
                  << " se=" << r.std_error << (r.certified ? " CERTIFIED" : " NOT-CERTIFIED")
                  << "\n";
    return all_ok ? kExitOk : kExitCertificationFailed;
}

inline int run_lyapunov(const RunConfig& cfg, bool stamp) {
    const WalkMeasure measure = make_measure(cfg);
    Rng rng(derive_seed(cfg.seed, "lyapunov"));
    const TorusPoint x0 = default_x0(cfg);

    std::vector<std::vector<double>> rows;
    const int stride = std::max(1, (cfg.n_steps - cfg.discard) / 200);
    const auto est = lyapunov_spectrum(
        measure, x0, cfg.n_steps, cfg.discard, rng,
        [&](int step, const Vector& partial) {
            if (step % stride == 0 || step == cfg.n_steps) {
                std::vector<double> row{static_cast<double>(step)};
                for (Eigen::Index i = 0; i < partial.size(); ++i) row.push_back(partial[i]);
                rows.push_back(std::move(row));
            }
        });

    json payload;
    payload["spectrum"] =
        std::vector<double>(est.spectrum.data(), est.spectrum.data() + est.spectrum.size());
    payload["spectrum_sum"] = est.spectrum.sum();
    payload["n_steps"] = est.n_steps;
    payload["transient_discard"] = est.transient_discard;
    payload["x0"] = std::vector<double>(x0.coords.data(), x0.coords.data() + x0.coords.size());
    emit(cfg, "lyapunov", payload, stamp);

    std::vector<std::string> header{"step"};
    for (int i = 1; i <= measure.d(); ++i) header.push_back("lambda_" + std::to_string(i));
    write_csv(cfg.out_path + "_spectrum.csv", header, rows);

    std::cout << "spectrum:";
    for (Eigen::Index i = 0; i < est.spectrum.size(); ++i) std::cout << " " << est.spectrum[i];
    std::cout << "  (sum " << est.spectrum.sum() << ")\n";
    return kExitOk;
}

inline int run_orbit(const RunConfig& cfg, bool stamp) {
    const WalkMeasure measure = make_measure(cfg);
    Rng rng(derive_seed(cfg.seed, "orbit"));
    const TorusPoint x0 = default_x0(cfg);
    const DiscrepancyReport rep =
        equidistribution_test(measure, x0, cfg.n_steps, cfg.boxes_per_axis, rng);

    emit(cfg, "orbit", to_json(rep), stamp);
    std::vector<std::vector<double>> rows;
    for (const auto& c : rep.checkpoints)
        rows.push_back({static_cast<double>(c.step), c.max_dev, c.mean_dev});
    write_csv(cfg.out_path + "_discrepancy.csv", {"step", "max_dev", "mean_dev"}, rows);

    for (const auto& c : rep.checkpoints)
        std::cout << "step " << c.step << ": max_dev " << c.max_dev << ", mean_dev " << c.mean_dev
                  << "\n";
    return kExitOk;
}

inline int run_rankcheck(const RunConfig& cfg, bool stamp) {
    Rng rng(derive_seed(cfg.seed, "rankcheck"));
    const BumpProfile bump(cfg.bump_r_in, cfg.bump_r_out);
    const ChartSpec chart(TorusPoint(Vector::Constant(cfg.d, 0.5)), cfg.chart_scale,
                          cfg.bump_r_out);

    json results = json::array();
    bool all_ok = true;
    for (int k = 1; k <= cfg.d - 1; ++k) {
        json trials = json::array();
        for (int t = 0; t < cfg.rank_trials; ++t) {
            // y strictly inside the chart preimage of B_1/2
            Vector z(cfg.d);
            do {
                for (int i = 0; i < cfg.d; ++i) z[i] = rng.uniform(-0.45, 0.45);
            } while (z.norm() >= 0.45);
            const TorusPoint y = chart.back(z);
            const GrassmannPoint P = random_grassmann(rng, cfg.d, k);
            const RankCheckReport rep =
                transitivity_rank_check(chart, y, P, cfg.rank_fd_step, bump, 64);
            const bool ok = rep.numerical_rank == rep.expected_rank;
            all_ok = all_ok && ok;
            json jt = to_json(rep);
            jt["k"] = k;
            jt["ok"] = ok;
            trials.push_back(std::move(jt));
        }
        results.push_back({{"k", k}, {"trials", trials}});
    }
    json payload;
    payload["results"] = results;
    payload["all_ok"] = all_ok;
    emit(cfg, "rankcheck", payload, stamp);
    std::cout << (all_ok ? "rank check passed" : "rank check FAILED") << "\n";
    return all_ok ? kExitOk : kExitCertificationFailed;
}

inline int run_selfcheck(const RunConfig& cfg, bool stamp) {
    const SelfcheckSummary s = selfcheck(cfg.seed);
    emit(cfg, "selfcheck", to_json(s), stamp);
    for (const auto& c : s.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (value " << c.value
                  << ", threshold " << c.threshold << ")\n";
    std::cout << s.failures << " failure(s) out of " << s.checks.size() << " checks\n";
    return s.failures == 0 ? kExitOk : kExitNumericalError;
}

} // namespace cli_detail

/// Entry point shared by the binary and the end-to-end tests.
inline int run(const std::vector<std::string>& args) {
    CLI::App app{"torus random-walk construction and uniform-expansion certification"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

    // flag overrides; flag wins over UECERT_SEED which wins over the file
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "master seed");
    int d_flag = 0;
    auto* d_opt = app.add_option("--d", d_flag, "torus dimension");
    std::string f0_flag;
    auto* f0_opt = app.add_option(
        "--f0", f0_flag, "base map: identity | cat (the [[2,1],[1,1]] automorphism)");
    double eps_flag = 0.0;
    auto* eps_opt = app.add_option("--epsilon", eps_flag, "parameter cube half-width");
    std::string out_flag;
    auto* out_opt = app.add_option("--out", out_flag, "output path prefix");
    int steps_flag = 0;
    auto* steps_opt = app.add_option("--steps", steps_flag, "RK4 steps per unit time");
    int nsteps_flag = 0;
    auto* nsteps_opt = app.add_option("--n-steps", nsteps_flag, "orbit length");
    int grid_flag = 0;
    auto* grid_opt =
        app.add_option("--grid-per-axis", grid_flag, "discretization atoms per parameter axis");
    int sweep_flag = 0;
    auto* sweep_opt = app.add_option("--sweep", sweep_flag, "certification sweep sites");
    int mc_flag = 0;
    auto* mc_opt = app.add_option("--mc", mc_flag, "Monte-Carlo words per site");
    int refine_flag = 0;
    auto* refine_opt = app.add_option("--refine", refine_flag, "pattern-search rounds");
    bool stamp = false;
    app.add_flag("--timestamp", stamp,
                 "record the wall-clock time in the report (breaks byte reproducibility)");

    auto* cmd_certify = app.add_subcommand("certify", "certify uniform expansion for all k");
    auto* cmd_dcert = app.add_subcommand("discretize-certify",
                                         "certify the finitely supported discretization");
    auto* cmd_lyap = app.add_subcommand("lyapunov", "QR Lyapunov spectrum along a random orbit");
    auto* cmd_orbit = app.add_subcommand("orbit", "box-counting equidistribution diagnostic");
    auto* cmd_rank = app.add_subcommand("rankcheck", "parameter-map surjectivity rank check");
    auto* cmd_self = app.add_subcommand("selfcheck", "run the cross-module invariant battery");
    for (auto* sub : {cmd_certify, cmd_dcert, cmd_lyap, cmd_orbit, cmd_rank, cmd_self})
        sub->fallthrough();

    std::vector<const char*> argv;
    argv.push_back("uecert");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            std::stringstream ss;
            ss << in.rdbuf();
            json j;
            try {
                j = json::parse(ss.str());
            } catch (const json::parse_error& e) {
                throw ParameterError(std::string("config: invalid JSON: ") + e.what());
            }
            cfg = parse_config(j);
        }
        if (const char* env = std::getenv("UECERT_SEED")) {
            cfg.seed = std::strtoull(env, nullptr, 10);
        }
        if (seed_opt->count()) cfg.seed = seed_flag;
        if (d_opt->count()) cfg.d = d_flag;
        if (f0_opt->count()) {
            if (f0_flag == "identity") {
                cfg.f0_type = "identity";
            } else if (f0_flag == "cat") {
                cfg.f0_type = "toral_automorphism";
                cfg.f0_matrix = {{2, 1}, {1, 1}};
                cfg.f0_translation = {0, 0};
            } else {
                throw ParameterError("config: --f0 must be identity or cat");
            }
        }
        if (eps_opt->count()) cfg.epsilon = eps_flag;
        if (out_opt->count()) cfg.out_path = out_flag;
        if (steps_opt->count()) cfg.integrator_steps = steps_flag;
        if (nsteps_opt->count()) cfg.n_steps = nsteps_flag;
        if (grid_opt->count()) cfg.discretize_grid = grid_flag;
        if (sweep_opt->count()) cfg.sweep_size = sweep_flag;
        if (mc_opt->count()) cfg.mc_samples = mc_flag;
        if (refine_opt->count()) cfg.refine_iters = refine_flag;
        validate_config(cfg);

        if (cmd_certify->parsed()) return cli_detail::run_certify(cfg, false, stamp);
        if (cmd_dcert->parsed()) return cli_detail::run_certify(cfg, true, stamp);
        if (cmd_lyap->parsed()) return cli_detail::run_lyapunov(cfg, stamp);
        if (cmd_orbit->parsed()) return cli_detail::run_orbit(cfg, stamp);
        if (cmd_rank->parsed()) return cli_detail::run_rankcheck(cfg, stamp);
        if (cmd_self->parsed()) return cli_detail::run_selfcheck(cfg, stamp);
        std::cerr << "config error: no subcommand\n";
        return kExitConfigError;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const BudgetError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
}

} // namespace uecert
