#include "zoneliq/cli.hpp"

#include "zoneliq/branching.hpp"
#include "zoneliq/config.hpp"
#include "zoneliq/lattice.hpp"
#include "zoneliq/parallel.hpp"
#include "zoneliq/paths.hpp"
#include "zoneliq/strategy.hpp"
#include "zoneliq/value.hpp"
#include "zoneliq/xmath.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace zoneliq {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "zoneliq 0.1.0";

struct Check {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = true;
};

struct Report {
    std::string command;
    RunConfig cfg;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

void write_report(const Report& rep, const fs::path& out_dir) {
    json j;
    j["command"] = rep.command;
    j["version"] = kVersion;
    j["problem_hash"] = problem_hash(rep.cfg);
    j["config"] = json::parse(canonical_config(rep.cfg));
    j["seed"] = rep.cfg.rng.seed;
    j["stream_id"] = rep.cfg.rng.stream_id;
    const auto dt = std::chrono::steady_clock::now() - rep.t0;
    j["wall_clock_sec"] = std::chrono::duration<double>(dt).count();
    j["checks"] = json::array();
    for (const auto& c : rep.checks)
        j["checks"].push_back({{"name", c.name},
                               {"statistic", c.statistic},
                               {"threshold", c.threshold},
                               {"pass", c.pass}});
    j["artifacts"] = rep.artifacts;
    std::ofstream os(out_dir / "report.json");
    if (!os) throw std::ios_base::failure("cannot write report.json");
    os << j.dump(2) << "\n";
}

fs::path prepare_out(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::ios_base::failure("cannot create output directory " + out);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::ios_base::failure("cannot write " + p.string());
    return os;
}

struct Stats {
    double mean = 0.0, var = 0.0, se = 0.0;
};

Stats stats_of(const std::vector<double>& v) {
    Stats s;
    const double n = static_cast<double>(v.size());
    for (double x : v) s.mean += x;
    s.mean /= n;
    for (double x : v) s.var += (x - s.mean) * (x - s.mean);
    s.var = v.size() > 1 ? s.var / (n - 1.0) : 0.0;
    s.se = std::sqrt(s.var / n);
    return s;
}

Policy parse_policy(const std::string& text) {
    if (text == "optimal") return Policy::optimal();
    if (text.rfind("scaled:", 0) == 0)
        return Policy::scaled_optimal(std::stod(text.substr(7)));
    if (text.rfind("constant:", 0) == 0)
        return Policy::constant_rate(std::stod(text.substr(9)));
    throw ValidationError("unknown policy \"" + text +
                          "\"; expected optimal, scaled:F, or constant:R");
}

int cmd_simulate(const RunConfig& cfg, int npaths, int steps, const std::string& out, int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "simulate";
    rep.cfg = cfg;
    const ValidatedProblem vp = validate(cfg.model, cfg.cost);
    const double T = vp.cost.horizon;

    std::vector<double> st(static_cast<std::size_t>(npaths)), lt(st.size());
    std::vector<PathBundle> bundles(st.size());
    parallel_for(st.size(), threads, [&](std::size_t i) {
        RngSpec rs{cfg.rng.seed, cfg.rng.stream_id + i};
        bundles[i] = simulate(cfg.model, T, steps, rs);
        st[i] = bundles[i].prices.back();
        lt[i] = bundles[i].loctime.back();
    });
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "path_%04zu.csv", i);
        auto os = open_out(dir / name);
        write_path_csv(os, bundles[i]);
        rep.artifacts.push_back(name);
    }

    const Stats ss = stats_of(st), sl = stats_of(lt);
    double flux_integral = 0.0;
    {
        // int_0^T rho_s(z0) ds via the exact kernel moment
        const ReducedFrame frame = reduce(cfg.model);
        flux_integral = frame.ell_scale * expected_pushing(T, frame.a0, frame.mu);
    }
    json summary;
    summary["n_paths"] = npaths;
    summary["steps"] = steps;
    summary["S_T"] = {{"mean", ss.mean}, {"variance", ss.var}, {"stderr", ss.se}};
    summary["L_T"] = {{"mean", sl.mean}, {"variance", sl.var}, {"stderr", sl.se}};
    summary["expected_L_T"] = flux_integral;
    {
        auto os = open_out(dir / "summary.json");
        os << summary.dump(2) << "\n";
    }
    rep.artifacts.push_back("summary.json");

    const double z = sl.se > 0.0 ? std::abs(sl.mean - flux_integral) / sl.se
                                 : (std::abs(sl.mean - flux_integral) < 1e-12 ? 0.0 : 1e9);
    rep.checks.push_back({"local_time_identity_z", z, 3.0, z < 3.0});
    write_report(rep, dir);
    return rep.all_pass() ? 0 : 3;
}

int cmd_solve(const RunConfig& cfg, int residual_paths, const std::string& out, int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "solve";
    rep.cfg = cfg;
    const ValidatedProblem vp = validate(cfg.model, cfg.cost);
    ValueGrid vg = solve_value(vp, cfg.grid, threads);
    vg.meta.residuals = residual_mc(vp, vg, residual_paths, cfg.rng, threads);

    {
        auto os = open_out(dir / "valuegrid.csv");
        os << "t,z,u,h\n";
        char buf[128];
        for (std::size_t i = 0; i < vg.tgrid.size(); ++i)
            for (std::size_t j = 0; j < vg.zgrid.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", vg.tgrid[i],
                              vg.zgrid[j], vg.u_at(i, j), vg.h_at(i, j));
                os << buf;
            }
        rep.artifacts.push_back("valuegrid.csv");
    }
    {
        json meta;
        meta["problem_hash"] = problem_hash(cfg);
        meta["u_bound"] = vg.u_bound;
        meta["fixed_point_tol"] = vg.meta.fixed_point_tol;
        meta["h_method"] = vg.meta.h_method;
        meta["residuals"] = json::array();
        for (const auto& r : vg.meta.residuals)
            meta["residuals"].push_back({{"t", r.t}, {"z", r.z}, {"u", r.u_value},
                                         {"mc_mean", r.mc_mean}, {"mc_stderr", r.mc_stderr},
                                         {"z_score", r.zscore}, {"pass", r.pass}});
        auto os = open_out(dir / "valuegrid_meta.json");
        os << meta.dump(2) << "\n";
        rep.artifacts.push_back("valuegrid_meta.json");
    }

    double worst = 0.0;
    for (const auto& r : vg.meta.residuals) worst = std::max(worst, r.zscore);
    rep.checks.push_back({"residual_max_z", worst, 3.0, worst < 3.0});
    double umin = 0.0, umax = 0.0;
    for (double u : vg.u) {
        umin = std::min(umin, u);
        umax = std::max(umax, u);
    }
    rep.checks.push_back({"u_lower_bound", umin, 0.0, umin >= -1e-9});
    rep.checks.push_back({"u_upper_bound", umax, vg.u_bound, umax <= vg.u_bound + 1e-9});
    write_report(rep, dir);
    return rep.all_pass() ? 0 : 3;
}

int cmd_execute(const RunConfig& cfg, int npaths, int steps, const std::string& policy_text,
                const std::string& out, int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "execute";
    rep.cfg = cfg;
    const ValidatedProblem vp = validate(cfg.model, cfg.cost);
    const Policy policy = parse_policy(policy_text);
    const ValueGrid vg = solve_value(vp, cfg.grid, threads);

    std::vector<double> totals(static_cast<std::size_t>(npaths));
    for (std::size_t i = 0; i < totals.size(); ++i) {
        RngSpec rs{cfg.rng.seed, cfg.rng.stream_id + i};
        const PathBundle path = simulate(cfg.model, vp.cost.horizon, steps, rs);
        const ExecutionRecord rec = execute(policy, path, vp, &vg);
        totals[i] = rec.cost_total();
        char name[32];
        std::snprintf(name, sizeof name, "exec_%04zu.csv", i);
        auto os = open_out(dir / name);
        write_execution_csv(os, path, rec);
        rep.artifacts.push_back(name);
    }
    const Stats s = stats_of(totals);
    json summary;
    summary["policy"] = policy_text;
    summary["n_paths"] = npaths;
    summary["cost_mean"] = s.mean;
    summary["cost_stderr"] = s.se;
    {
        auto os = open_out(dir / "summary.json");
        os << summary.dump(2) << "\n";
    }
    rep.artifacts.push_back("summary.json");
    write_report(rep, dir);
    return 0;
}

int cmd_verify(const RunConfig& cfg, int npaths, int steps, const std::string& out, int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "verify";
    rep.cfg = cfg;
    const ValidatedProblem vp = validate(cfg.model, cfg.cost);
    const ValueGrid vg = solve_value(vp, cfg.grid, threads);
    const double T = vp.cost.horizon;
    const double u0 = vg.value_at(T, cfg.model.z0);
    const double target = std::pow(std::abs(vp.cost.x0), vp.cost.p) * u0;

    json out_json;
    out_json["u_times_x0p"] = target;
    out_json["policies"] = json::array();

    const McCostResult opt = mc_cost(Policy::optimal(), vp, &vg, npaths, steps, cfg.rng, threads);
    const bool zero_target = target < 1e-12;
    double zopt;
    if (opt.se > 0.0)
        zopt = std::abs(opt.mean - target) / opt.se;
    else
        zopt = std::abs(opt.mean - target) < 1e-12 ? 0.0 : 1e9;
    const double rel = zero_target ? std::abs(opt.mean - target)
                                   : std::abs(opt.mean - target) / target;
    const bool opt_pass = zopt < 3.0 && rel < 0.02;
    out_json["policies"].push_back({{"policy", "optimal"}, {"mean", opt.mean},
                                    {"stderr", opt.se}, {"u_times_x0p", target},
                                    {"z_score", zopt}, {"pass", opt_pass}});
    rep.checks.push_back({"minimal_cost_identity_z", zopt, 3.0, opt_pass});

    for (double factor : {0.5, 1.5}) {
        const PairedResult pr = mc_cost_paired(Policy::optimal(), Policy::scaled_optimal(factor),
                                               vp, &vg, npaths, steps, cfg.rng, threads);
        const double margin = pr.se_diff > 0.0 ? pr.mean_diff / pr.se_diff : 0.0;
        const bool pass = zero_target ? pr.mean_diff >= -1e-12 : margin > 2.0;
        out_json["policies"].push_back({{"policy", "scaled:" + std::to_string(factor)},
                                        {"mean", pr.b.mean}, {"stderr", pr.b.se},
                                        {"u_times_x0p", target},
                                        {"z_score", margin}, {"pass", pass}});
        rep.checks.push_back({"optimality_margin_scaled_" + std::to_string(factor), margin, 2.0, pass});
    }

    if (!zero_target) {
        const double rate = calibrate_constant_rate(vp, vg, std::min(npaths, 10000), steps, cfg.rng, threads);
        const PairedResult pr = mc_cost_paired(Policy::optimal(), Policy::constant_rate(rate), vp,
                                               &vg, npaths, steps, cfg.rng, threads);
        // certificate identity: E[cert] = E[cost] - |x0|^p u
        const double gap = pr.b.mean_certificate - (pr.b.mean - target);
        const double se = std::sqrt(pr.b.se_certificate * pr.b.se_certificate + pr.b.se * pr.b.se);
        const double zc = se > 0.0 ? std::abs(gap) / se : 0.0;
        out_json["policies"].push_back({{"policy", "constant:" + std::to_string(rate)},
                                        {"mean", pr.b.mean}, {"stderr", pr.b.se},
                                        {"u_times_x0p", target},
                                        {"z_score", zc}, {"pass", zc < 3.0}});
        rep.checks.push_back({"certificate_identity_z", zc, 3.0, zc < 3.0});
    }

    {
        auto os = open_out(dir / "verify.json");
        os << out_json.dump(2) << "\n";
        rep.artifacts.push_back("verify.json");
    }
    write_report(rep, dir);
    return rep.all_pass() ? 0 : 3;
}

int cmd_lattice(const RunConfig& cfg, int level_lo, int level_hi, int npaths,
                const std::string& out, int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "lattice";
    rep.cfg = cfg;
    const auto rows = lattice_convergence_study(cfg.model, cfg.cost.horizon, level_lo, level_hi,
                                                npaths, cfg.rng, cfg.cost.p, threads);
    {
        auto os = open_out(dir / "lattice.csv");
        os << "level,median_sup_err,median_cost_gap\n";
        char buf[96];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", r.level, r.median_sup_err,
                          r.median_cost_gap);
            os << buf;
        }
        rep.artifacts.push_back("lattice.csv");
    }
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].median_sup_err >= rows[i - 1].median_sup_err) monotone = false;
    rep.checks.push_back({"sup_err_strictly_decreasing", monotone ? 1.0 : 0.0, 1.0, monotone});
    if (rows.size() >= 2) {
        const double ratio = rows.back().median_cost_gap / std::max(rows.front().median_cost_gap, 1e-300);
        rep.checks.push_back({"cost_gap_ratio", ratio, 0.25, ratio < 0.25});
    }
    write_report(rep, dir);
    return rep.all_pass() ? 0 : 3;
}

int cmd_branching(const RunConfig& cfg, int n_scale, int npops, const std::string& out,
                  int threads) {
    const fs::path dir = prepare_out(out);
    Report rep;
    rep.command = "branching";
    rep.cfg = cfg;
    const ValidatedProblem vp = validate(cfg.model, cfg.cost);
    const ValueGrid vg = solve_value(vp, cfg.grid, threads);
    const double u_ref = vg.value_at(vp.cost.horizon, cfg.model.z0);

    BranchParams params;
    params.n_scale = n_scale;
    const LaplaceEstimate est = laplace_estimate(vp, params, npops, cfg.rng, cfg.model.z0, threads);
    const double minus_log = -std::log(est.estimate);
    const double se_log = est.se / est.estimate;
    const double z = se_log > 0.0 ? std::abs(minus_log - u_ref) / se_log
                                  : (std::abs(minus_log - u_ref) < 1e-12 ? 0.0 : 1e9);

    json j;
    j["n_scale"] = n_scale;
    j["npaths"] = est.npops;
    j["estimate"] = est.estimate;
    j["stderr"] = est.se;
    j["u_solver"] = u_ref;
    j["z_score"] = z;
    j["censored_paths"] = est.censored;
    {
        auto os = open_out(dir / "branching.json");
        os << j.dump(2) << "\n";
        rep.artifacts.push_back("branching.json");
    }
    rep.checks.push_back({"laplace_vs_solver_z", z, 3.0, z < 3.0});
    for (std::size_t i = 0; i < est.mass_means.size(); ++i) {
        const double mz = est.mass_ses[i] > 0.0
                              ? std::abs(est.mass_means[i] - 1.0) / est.mass_ses[i]
                              : (std::abs(est.mass_means[i] - 1.0) < 1e-12 ? 0.0 : 1e9);
        rep.checks.push_back({"mass_criticality_z_t" + std::to_string(est.mass_times[i]), mz, 3.0,
                              mz < 3.0});
    }
    write_report(rep, dir);
    return rep.all_pass() ? 0 : 3;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Optimal liquidation engine for reflected (target-zone) price models"};
    app.set_version_flag("--version", kVersion);

    std::string config_path, out_dir = "out";
    int threads = 0;
    long long seed_override = -1;
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = auto, env ZONELIQ_THREADS)");
    app.add_option("--seed", seed_override, "override rng.seed from the config");
    app.require_subcommand(1);

    int npaths = 100, steps = 512;
    int level_lo = 4, level_hi = 8;
    int n_scale = 20, npops = 2000;
    int residual_paths = 20000;
    std::string policy_text = "optimal";
    std::string levels_text;

    auto* sim = app.add_subcommand("simulate", "simulate reflected paths with local time");
    sim->add_option("--paths", npaths, "number of paths");
    sim->add_option("--steps", steps, "grid steps per path");

    auto* solve = app.add_subcommand("solve", "solve the value function");
    solve->add_option("--paths", residual_paths, "Monte Carlo paths for the residual check");

    auto* exec = app.add_subcommand("execute", "run a policy pathwise");
    exec->add_option("--paths", npaths, "number of paths");
    exec->add_option("--steps", steps, "grid steps per path");
    exec->add_option("--policy", policy_text, "optimal | scaled:F | constant:R");

    auto* verify = app.add_subcommand("verify", "verify optimality and the cost identity");
    verify->add_option("--paths", npaths, "number of paths");
    verify->add_option("--steps", steps, "grid steps per path");

    auto* lattice = app.add_subcommand("lattice", "lattice convergence tables");
    lattice->add_option("--levels", levels_text, "resolution range, e.g. 4..8");
    lattice->add_option("--paths", npaths, "number of paired paths");

    auto* branching = app.add_subcommand("branching", "branching-particle validator");
    branching->add_option("--nscale", n_scale, "particle count scale");
    branching->add_option("--paths", npops, "number of populations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (seed_override >= 0) cfg.rng.seed = static_cast<std::uint64_t>(seed_override);
        if (!levels_text.empty()) {
            const auto pos = levels_text.find("..");
            if (pos == std::string::npos)
                throw ValidationError("--levels: expected the form LO..HI");
            level_lo = std::stoi(levels_text.substr(0, pos));
            level_hi = std::stoi(levels_text.substr(pos + 2));
        }

        if (sim->parsed()) return cmd_simulate(cfg, npaths, steps, out_dir, threads);
        if (solve->parsed()) return cmd_solve(cfg, residual_paths, out_dir, threads);
        if (exec->parsed()) return cmd_execute(cfg, npaths, steps, policy_text, out_dir, threads);
        if (verify->parsed()) return cmd_verify(cfg, npaths, steps, out_dir, threads);
        if (lattice->parsed()) return cmd_lattice(cfg, level_lo, level_hi, npaths, out_dir, threads);
        if (branching->parsed()) return cmd_branching(cfg, n_scale, npops, out_dir, threads);
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical check failed: %s\n", e.what());
        return 3;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> owned = args;
    std::vector<char*> argv;
    argv.reserve(owned.size());
    for (auto& s : owned) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace zoneliq
