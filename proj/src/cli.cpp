#include "bdlab/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "bdlab/config.hpp"
#include "bdlab/errors.hpp"
#include "bdlab/io.hpp"
#include "bdlab/version.hpp"

namespace bdlab::cli {

using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::string csv_path;
    std::string workspace;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")->required();
    cmd->add_option("--out", opts.out_path, "JSON artifact path");
    cmd->add_option("--csv", opts.csv_path, "CSV artifact path");
    cmd->add_option("--workspace", opts.workspace,
                    "root for relative artifact paths (default: $BDLAB_WORKSPACE or cwd)");
    cmd->add_option("--threads", opts.threads, "replication-level worker threads")
        ->check(CLI::PositiveNumber);
}

std::filesystem::path resolve(const CommonOptions& opts, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    std::string root = opts.workspace;
    if (root.empty())
        if (const char* env = std::getenv("BDLAB_WORKSPACE")) root = env;
    return root.empty() ? p : std::filesystem::path(root) / p;
}

void write_artifact(const CommonOptions& opts, const std::string& subcommand,
                    const json& resolved_config, const json& result) {
    json artifact;
    artifact["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    artifact["subcommand"] = subcommand;
    artifact["config"] = resolved_config;
    artifact["result"] = result;
    const std::string text = artifact.dump(2) + "\n";
    if (opts.out_path.empty()) {
        std::cout << text;
        return;
    }
    const auto path = resolve(opts, opts.out_path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write artifact: " + path.string());
    out << text;
}

void write_csv_file(const CommonOptions& opts, const std::function<void(std::ostream&)>& fn) {
    if (opts.csv_path.empty()) return;
    const auto path = resolve(opts, opts.csv_path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write csv: " + path.string());
    fn(out);
}

json state_json(const PopulationState& s) {
    json particles = json::array();
    for (const auto& [label, pos] : s.particles)
        particles.push_back({{"label", label.str()}, {"position", pos}});
    return {{"time", s.time}, {"particles", particles}};
}

json path_json(const PathRecord& rec) {
    json grid = json::array();
    for (size_t i = 0; i < rec.grid_states.size(); ++i) {
        json g = state_json(rec.grid_states[i]);
        g["running_cost"] = rec.grid_running_cost[i];
        grid.push_back(g);
    }
    json events = json::array();
    for (const auto& ev : rec.events) {
        json children = json::array();
        for (const auto& c : ev.children) children.push_back(c.str());
        events.push_back({{"time", ev.time},
                          {"parent", ev.parent.str()},
                          {"outcome", ev.thinned ? "thinned" : "offspring"},
                          {"offspring", ev.offspring},
                          {"children", children},
                          {"population_after", ev.population_after}});
    }
    json initial = json::array();
    for (const auto& atom : rec.initial.atoms())
        initial.push_back({{"position", atom.position}, {"multiplicity", atom.multiplicity}});
    return {{"start_time", rec.start_time},
            {"initial", initial},
            {"grid", grid},
            {"events", events},
            {"terminal", state_json(rec.terminal)},
            {"running_cost", rec.running_cost},
            {"total_cost", rec.total_cost},
            {"master_seed", rec.master_seed},
            {"dt_max", rec.dt_max},
            {"max_population_seen", rec.max_population_seen},
            {"particle_steps", rec.particle_steps}};
}

json estimate_json(const EstimateResult& r) {
    return {{"mean", r.mean},
            {"standard_error", r.standard_error},
            {"replications", r.replications},
            {"failed_replications", r.failed_replications},
            {"seed", r.seed}};
}

// Per-interval verdict: two-sided for martingale-type tests, one-sided in
// submartingale mode.
bool interval_ok(const IntervalCheck& c, double threshold, DriftMode mode) {
    return mode == DriftMode::Martingale ? std::abs(c.z) < threshold : c.z > -threshold;
}

json intervals_json(const std::vector<IntervalCheck>& intervals, double threshold,
                    DriftMode mode) {
    json rows = json::array();
    for (const auto& c : intervals)
        rows.push_back({{"start", c.start},
                        {"length", c.length},
                        {"mean", c.mean},
                        {"se", c.se},
                        {"z", c.z},
                        {"verdict", interval_ok(c, threshold, mode) ? "pass" : "fail"}});
    return rows;
}

void intervals_csv(std::ostream& os, const std::vector<IntervalCheck>& intervals,
                   const std::string& kind, double threshold, DriftMode mode) {
    for (const auto& c : intervals)
        io::write_csv_row(os, {kind, io::g17(c.start), io::g17(c.length), io::g17(c.mean),
                               io::g17(c.se), io::g17(c.z),
                               interval_ok(c, threshold, mode) ? "pass" : "fail"});
}

int cmd_simulate(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    const PathRecord rec = simulate_path(bundle.scenario, bundle.policy, bundle.start_time,
                                         bundle.initial, bundle.sim,
                                         rng::derive_seed(bundle.seed, 0));
    write_artifact(opts, "simulate", bundle.resolved, path_json(rec));
    write_csv_file(opts, [&](std::ostream& os) {
        std::vector<std::string> header{"time", "label"};
        for (int c = 0; c < bundle.scenario.dim_x; ++c) header.push_back("x" + std::to_string(c));
        io::write_csv_row(os, header);
        for (const auto& state : rec.grid_states)
            for (const auto& [label, pos] : state.particles) {
                std::vector<std::string> row{io::g17(state.time), label.str()};
                for (double v : pos) row.push_back(io::g17(v));
                io::write_csv_row(os, row);
            }
    });
    return 0;
}

int cmd_estimate_cost(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    const EstimateResult res =
        estimate_cost(bundle.scenario, bundle.policy, bundle.start_time, bundle.initial,
                      bundle.sim, bundle.replications, bundle.seed, opts.threads);
    write_artifact(opts, "estimate-cost", bundle.resolved, estimate_json(res));
    write_csv_file(opts, [&](std::ostream& os) {
        io::write_csv_row(os, {"mean", "standard_error", "replications", "failed", "seed"});
        io::write_csv_row(os, {io::g17(res.mean), io::g17(res.standard_error),
                               std::to_string(res.replications),
                               std::to_string(res.failed_replications),
                               std::to_string(res.seed)});
    });
    return 0;
}

int cmd_moments(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    const MomentBoundReport rep =
        check_moment_bounds(bundle.scenario, bundle.policy, bundle.start_time, bundle.initial,
                            bundle.sim, bundle.replications, bundle.seed, opts.threads);
    json result = {{"sup_mass", estimate_json(rep.sup_mass)},
                   {"sup_mass_sq", estimate_json(rep.sup_mass_sq)},
                   {"mass_bound", rep.mass_bound},
                   {"mass_sq_bound", rep.mass_sq_bound},
                   {"slack_se", rep.slack_se},
                   {"mass_ok", rep.mass_ok},
                   {"mass_sq_ok", rep.mass_sq_ok},
                   {"pass", rep.pass()}};
    write_artifact(opts, "moments", bundle.resolved, result);
    return rep.pass() ? 0 : 4;
}

int cmd_martingale_test(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    const MartingaleReport rep = martingale_test(
        bundle.scenario, bundle.policy, bundle.start_time, bundle.initial, bundle.sim,
        bundle.replications, bundle.test.scalar, bundle.test.testfn, bundle.test.checkpoints,
        bundle.seed, opts.threads, bundle.test.quadratic_variation);
    const bool pass = rep.pass(bundle.test.z_threshold) &&
                      (!bundle.test.quadratic_variation || rep.qv_pass(bundle.test.z_threshold));
    const double zt = bundle.test.z_threshold;
    json result = {{"scalar", rep.scalar_name},
                   {"testfn", rep.test_name},
                   {"replications", rep.replications},
                   {"failed_replications", rep.failed_replications},
                   {"intervals", intervals_json(rep.intervals, zt, DriftMode::Martingale)},
                   {"max_abs_z", rep.max_abs_z},
                   {"z_threshold", zt},
                   {"pass", pass}};
    if (bundle.test.quadratic_variation) {
        result["quadratic_variation"] =
            intervals_json(rep.quadratic_variation, zt, DriftMode::Martingale);
        result["max_abs_qv_z"] = rep.max_abs_qv_z;
    }
    write_artifact(opts, "martingale-test", bundle.resolved, result);
    write_csv_file(opts, [&](std::ostream& os) {
        io::write_csv_row(os, {"kind", "start", "length", "mean", "se", "z", "verdict"});
        intervals_csv(os, rep.intervals, "increment", zt, DriftMode::Martingale);
        intervals_csv(os, rep.quadratic_variation, "quadratic_variation", zt,
                      DriftMode::Martingale);
    });
    return pass ? 0 : 4;
}

int cmd_verify(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    const ValueField field = bundle.value_field_for(bundle.test.field);
    const ValueDriftReport rep = submartingale_test(
        bundle.scenario, bundle.policy, bundle.start_time, bundle.initial, field, bundle.sim,
        bundle.replications, bundle.test.checkpoints, bundle.test.mode, bundle.seed, opts.threads);
    const bool pass = rep.pass(bundle.test.z_threshold);
    const double zt = bundle.test.z_threshold;
    json result = {{"mode", rep.mode == DriftMode::Martingale ? "martingale" : "submartingale"},
                   {"field", bundle.test.field},
                   {"replications", rep.replications},
                   {"failed_replications", rep.failed_replications},
                   {"intervals", intervals_json(rep.intervals, zt, rep.mode)},
                   {"max_abs_z", rep.max_abs_z},
                   {"min_z", rep.min_z},
                   {"total_drift", rep.total_drift},
                   {"z_threshold", zt},
                   {"pass", pass}};
    write_artifact(opts, "verify", bundle.resolved, result);
    write_csv_file(opts, [&](std::ostream& os) {
        io::write_csv_row(os, {"kind", "start", "length", "mean", "se", "z", "verdict"});
        intervals_csv(os, rep.intervals, "drift", zt, rep.mode);
    });
    return pass ? 0 : 4;
}

int cmd_lq_solve(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    if (!bundle.lq_coeffs) throw ConfigError("lq-solve: scenario.kind must be 'lq'");
    if (!bundle.lq_solution)
        bundle.lq_solution = std::make_shared<const lq::RiccatiSolution>(
            lq::solve_riccati(bundle.lq_coeffs, bundle.lq_steps));
    const auto& sol = *bundle.lq_solution;
    json quad0 = json::array();
    for (int r = 0; r < bundle.lq_coeffs->dim_x; ++r) {
        json row = json::array();
        for (int c = 0; c < bundle.lq_coeffs->dim_x; ++c) row.push_back(sol.quad.front()(r, c));
        quad0.push_back(row);
    }
    json result = {{"steps", bundle.lq_steps},
                   {"nodes", sol.tgrid.size()},
                   {"quad_at_start", quad0},
                   {"mass_sq_at_start", sol.mass_sq.front()},
                   {"mass_at_start", sol.mass.front()}};
    write_artifact(opts, "lq-solve", bundle.resolved, result);
    write_csv_file(opts, [&](std::ostream& os) { lq::write_csv(sol, os); });
    return 0;
}

int cmd_kinetic_solve(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    if (!bundle.kinetic_coeffs) throw ConfigError("kinetic-solve: scenario.kind must be 'kinetic'");
    if (!bundle.kinetic_solution)
        bundle.kinetic_solution = std::make_shared<const kinetic::Solution>(
            kinetic::solve_hjb(*bundle.kinetic_coeffs, bundle.kinetic_grid));
    const auto& sol = *bundle.kinetic_solution;
    json result = {{"x_min", sol.grid.x_min},
                   {"x_max", sol.grid.x_max},
                   {"nx", sol.grid.nx},
                   {"nt", sol.grid.nt},
                   {"stored_slices", sol.times.size()},
                   {"value_at_start_origin", sol.value(0.0, 0.0)}};
    write_artifact(opts, "kinetic-solve", bundle.resolved, result);
    write_csv_file(opts, [&](std::ostream& os) { kinetic::write_csv(sol, os); });
    return 0;
}

int cmd_compare(const CommonOptions& opts) {
    auto bundle = config::load_experiment(config::read_config_file(opts.config_path));
    if (!bundle.policy_b) throw ConfigError("compare: config must define policy_b");
    const PairedCompare cmp =
        compare_policies(bundle.scenario, bundle.policy, *bundle.policy_b, bundle.start_time,
                         bundle.initial, bundle.sim, bundle.replications, bundle.seed,
                         opts.threads);
    json result = {{"first", estimate_json(cmp.first)},
                   {"second", estimate_json(cmp.second)},
                   {"mean_diff", cmp.mean_diff},
                   {"se_diff", cmp.se_diff},
                   {"replications", cmp.replications},
                   {"common_random_numbers", true}};
    write_artifact(opts, "compare", bundle.resolved, result);
    write_csv_file(opts, [&](std::ostream& os) {
        io::write_csv_row(os, {"quantity", "mean", "se"});
        io::write_csv_row(os, {"first", io::g17(cmp.first.mean), io::g17(cmp.first.standard_error)});
        io::write_csv_row(os,
                          {"second", io::g17(cmp.second.mean), io::g17(cmp.second.standard_error)});
        io::write_csv_row(os, {"diff", io::g17(cmp.mean_diff), io::g17(cmp.se_diff)});
    });
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"branching-diffusion control laboratory"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const CommonOptions&);
        CommonOptions opts;
    };
    std::vector<Sub> subs = {
        {"simulate", "simulate one trajectory and dump its record", cmd_simulate, {}},
        {"estimate-cost", "Monte Carlo estimate of the control cost", cmd_estimate_cost, {}},
        {"moments", "population moment-bound report", cmd_moments, {}},
        {"martingale-test", "compensated-functional drift test", cmd_martingale_test, {}},
        {"verify", "value-field (sub)martingale verification", cmd_verify, {}},
        {"lq-solve", "solve the quadratic value-field coefficient system", cmd_lq_solve, {}},
        {"kinetic-solve", "solve the kinetic value PDE", cmd_kinetic_solve, {}},
        {"compare", "paired cost comparison of two policies", cmd_compare, {}},
    };
    for (auto& sub : subs) add_common(app.add_subcommand(sub.name, sub.help), sub.opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        for (auto& sub : subs)
            if (app.got_subcommand(sub.name)) return sub.fn(sub.opts);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace bdlab::cli
