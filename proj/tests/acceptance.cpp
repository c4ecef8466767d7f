// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is the number of
// failing criteria. An optional list of criterion numbers restricts the run.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "bdlab/cli.hpp"
#include "bdlab/estimate.hpp"
#include "bdlab/kinetic.hpp"
#include "bdlab/lq.hpp"
#include "bdlab/simulate.hpp"
#include "oracles.hpp"

using namespace bdlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

Scenario branching_only(double rate, std::vector<double> probs) {
    TabularScenarioSpec spec;
    spec.branch_rate = rate;
    spec.offspring = std::move(probs);
    return make_tabular_scenario(spec);
}

const AtomicMeasure kDelta0 = AtomicMeasure::embed(1, {{0.0}});
const AtomicMeasure kDelta1 = AtomicMeasure::embed(1, {{1.0}});

// ---------------------------------------------------------------- criterion 1
Check branching_law_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario scn = branching_only(1.0, {0.0, 0.0, 1.0});
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 0.05;
    const int reps = 10000;
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        const PathRecord rec =
            simulate_path(scn, Policy::zero(1), 0.0, kDelta0, cfg, rng::derive_seed(101, r));
        const double m = static_cast<double>(rec.terminal.particles.size());
        sum += m;
        sq += m * m;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sq / reps - mean * mean) / reps);
    const double target = std::exp(1.0);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = std::abs(mean - target) < 3.0 * se && secs < 30.0;
    return {ok, "mean " + fmt(mean) + " vs e=" + fmt(target) + " (3se " + fmt(3 * se) + "), " +
                    fmt(secs) + " s"};
}

// ---------------------------------------------------------------- criterion 2
Check moment_bounds() {
    const std::vector<std::pair<std::string, std::vector<double>>> laws = {
        {"pure-death", {1.0}},
        {"binary", {0.0, 0.0, 1.0}},
        {"mixed", {0.3, 0.2, 0.5}},
    };
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 0.25;
    std::string detail;
    bool all_ok = true;
    for (const auto& [name, probs] : laws) {
        const Scenario scn = branching_only(1.0, probs);
        const auto rep =
            check_moment_bounds(scn, Policy::zero(1), 0.0, kDelta0, cfg, 10000, 202);
        all_ok = all_ok && rep.pass();
        detail += name + " sup " + fmt(rep.sup_mass.mean) + "<=" + fmt(rep.mass_bound) +
                  ", sup^2 " + fmt(rep.sup_mass_sq.mean) + "<=" + fmt(rep.mass_sq_bound) + "; ";
    }
    return {all_ok, detail};
}

// ---------------------------------------------------------------- criterion 3
Check martingale_problem() {
    Scenario scn;
    scn.dim_x = 1;
    scn.dim_noise = 1;
    scn.dim_action = 1;
    scn.actions = ActionSet::all(1);
    scn.max_offspring = 2;
    scn.convex_actions = true;
    scn.convex_note = "affine drift control, action-independent branching";
    scn.drift = [](double, const Vec& x, const AtomicMeasure&, const Vec& a, Vec& out) {
        out[0] = -0.3 * x[0] + a[0];
    };
    scn.vol = [](double, const Vec&, const AtomicMeasure&, const Vec&, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = 0.5;
    };
    scn.branch_rate = [](double, const Vec& x, const AtomicMeasure&, const Vec&) {
        return 0.2 + 0.6 / (1.0 + x[0] * x[0]);
    };
    scn.offspring_probs = [](double, const Vec&, const AtomicMeasure&, const Vec&,
                             std::vector<double>& p) { p = {0.3, 0.2, 0.5}; };
    scn.running_cost = [](double, const Vec&, const AtomicMeasure&, const Vec&) { return 0.0; };
    scn.terminal_cost = [](const AtomicMeasure&) { return 0.0; };
    scn.bounds.drift_growth = 1.0;
    scn.bounds.vol_bound = 0.5;
    scn.bounds.rate_bound = 0.8;
    scn.bounds.offspring_mean_bound = 1.2;
    scn.bounds.offspring_second_bound = 1.0;
    scn.bounds.cost_growth = 1e-9;
    scn.bounds.control_coercivity = 0.0;

    const Policy pol = Policy::feedback(
        1, [](double, const Vec& x, const AtomicMeasure&, Vec& out) { out[0] = -0.4 * x[0]; });

    std::vector<MartingalePair> pairs = {
        {testfn::identity(), testfn::one(1), true},
        {testfn::identity(), testfn::gauss_bump(1), false},
        {testfn::square(), testfn::one(1), false},
        {testfn::square(), testfn::sigmoid(1), false},
        {testfn::exp_neg(), testfn::gauss_bump(1), false},
        {testfn::exp_neg(), testfn::sigmoid(1), false},
    };
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 1e-3;
    const auto reports = martingale_test_multi(scn, pol, 0.0, kDelta0, cfg, 10000, pairs,
                                               {0.25, 0.5, 0.75, 1.0}, 303);
    bool all_ok = true;
    std::string detail;
    for (const auto& rep : reports) {
        const bool ok = rep.max_abs_z < 4.0;
        all_ok = all_ok && ok;
        detail += "(" + rep.scalar_name + "," + rep.test_name + ") |z|=" + fmt(rep.max_abs_z) +
                  "; ";
    }
    const double qv_z = reports.front().max_abs_qv_z;
    all_ok = all_ok && qv_z < 4.0;
    detail += "qv |z|=" + fmt(qv_z);
    return {all_ok, detail};
}

// ---------------------------------------------------------------- criterion 4
Check transport_oracle() {
    rng::Stream stream(404);
    double worst = 0.0, worst_pad = 0.0;
    for (int round = 0; round < 200; ++round) {
        auto draw = [&](int max_atoms) {
            AtomicMeasure m(2);
            const int n = static_cast<int>(stream.uniform_below(max_atoms + 1));
            for (int i = 0; i < n; ++i) m.add({2.0 * stream.normal(), 2.0 * stream.normal()});
            return m;
        };
        const AtomicMeasure a = draw(6), b = draw(6);
        const Vec anchor{0.0, 0.0};
        const int p = 1 + static_cast<int>(stream.uniform_below(2));
        const long m = std::max(a.total_mass(), b.total_mass());
        const double fast = wasserstein(a, b, p, anchor);
        const double slow = test_oracles::brute_force_distance(a, b, p, anchor, m);
        worst = std::max(worst, std::abs(fast - slow));
        const double padded = wasserstein_padded(a, b, p, anchor, m + 1);
        worst_pad = std::max(worst_pad, std::abs(fast - padded));
    }
    const bool ok = worst < 1e-9 && worst_pad < 1e-9;
    return {ok, "max |solver-brute| " + fmt(worst) + ", max padding drift " + fmt(worst_pad)};
}

// ---------------------------------------------------------------- criterion 5
Check riccati_benchmark() {
    auto co = lq::scalar_benchmark(1.0, 0.0, 1.0);
    const auto sol = lq::solve_riccati(co, 2000);
    const auto fine = lq::solve_riccati(co, 4000);
    const double err = std::abs(sol.quad.front()(0, 0) - std::tanh(1.0));
    const double drift = std::abs(sol.quad.front()(0, 0) - fine.quad.front()(0, 0));
    const bool ok = err < 1e-6 && drift < 1e-8;
    return {ok, "|Q0-tanh(1)| " + fmt(err) + ", step-halving delta " + fmt(drift)};
}

std::shared_ptr<lq::Coefficients> gate_lq_coeffs() {
    auto co = std::make_shared<lq::Coefficients>();
    co->dim_x = 1;
    co->dim_action = 1;
    co->horizon = 1.0;
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->state_gain = lq::TimeTable<Eigen::MatrixXd>::constant(0.0 * one);
    co->control_gain = lq::TimeTable<Eigen::MatrixXd>::constant(one);
    co->vol = lq::TimeTable<double>::constant(1.0);
    co->rate = lq::TimeTable<double>::constant(0.2);
    Eigen::VectorXd p(3);
    p << 0.5, 0.0, 0.5;
    co->offspring = lq::TimeTable<Eigen::VectorXd>::constant(p);
    co->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(one);
    co->mass_cost = lq::TimeTable<double>::constant(0.0);
    co->control_cost = lq::TimeTable<Eigen::MatrixXd>::constant(one);
    co->terminal_state_cost = one;
    co->terminal_mass_sq_cost = 0.0;
    return co;
}

json gate_lq_config(const std::string& policy) {
    return json{
        {"scenario",
         {{"kind", "lq"},
          {"dim_x", 1},
          {"dim_action", 1},
          {"state_gain", 0.0},
          {"control_gain", 1.0},
          {"vol", 1.0},
          {"rate", 0.2},
          {"offspring", {0.5, 0.0, 0.5}},
          {"state_cost", 1.0},
          {"mass_cost", 0.0},
          {"control_cost", 1.0},
          {"terminal_state_cost", 1.0},
          {"terminal_mass_sq_cost", 0.0}}},
        {"policy", {{"name", policy}}},
        {"initial", {{"t", 0.0}, {"atoms", {{1.0}}}}},
        {"sim", {{"horizon", 1.0}, {"dt_max", 1e-3}}},
        {"replications", 10000},
        {"seed", 606},
        {"lq_solver", {{"steps", 2000}}}};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("bdlab_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out << text;
    return p;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"bdlab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- criterion 6
Check lq_verification() {
    auto co = gate_lq_coeffs();
    auto sol = std::make_shared<const lq::RiccatiSolution>(lq::solve_riccati(co, 2000));
    const Scenario scn = lq::scenario(co);
    const Policy opt = lq::optimal_policy(sol);
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 1e-3;
    const std::vector<double> checkpoints{0.25, 0.5, 0.75, 1.0};

    // (a) drift-free under the matched feedback
    const auto mart = submartingale_test(scn, opt, 0.0, kDelta1, lq::value_field(sol), cfg, 10000,
                                         checkpoints, DriftMode::Martingale, 707);
    const bool a_ok = mart.pass(4.0);

    // (b) non-negative drift under the idle control, significantly positive
    const auto sub = submartingale_test(scn, Policy::zero(1), 0.0, kDelta1, lq::value_field(sol),
                                        cfg, 10000, checkpoints, DriftMode::Submartingale, 708);
    double se_sq = 0.0;
    for (const auto& c : sub.intervals) se_sq += c.se * c.se;
    const bool b_ok = sub.pass(4.0) && sub.total_drift > 3.0 * std::sqrt(se_sq);

    // (c) realized cost of the matched feedback against the candidate value
    const auto cost = estimate_cost(scn, opt, 0.0, kDelta1, cfg, 10000, 709);
    const double predicted = lq::value(*sol, 0.0, kDelta1);
    const double tol = 3.0 * cost.standard_error + 0.02 * std::abs(predicted);
    const bool c_ok = std::abs(cost.mean - predicted) < tol;

    // (d) paired comparisons through the command line
    TempDir tmp;
    json cmp1 = gate_lq_config("lq-optimal");
    cmp1["policy_b"] = {{"name", "zero"}};
    json cmp2 = gate_lq_config("lq-optimal");
    cmp2["policy_b"] = {{"name", "lq-perturbed"}, {"epsilon", 0.5}};
    const auto out1 = tmp.path / "cmp_zero.json";
    const auto out2 = tmp.path / "cmp_pert.json";
    bool d_ok = run_cli({"compare", "--config",
                         write_file(tmp.path, "c1.json", cmp1.dump()).string(), "--out",
                         out1.string()}) == 0 &&
                run_cli({"compare", "--config",
                         write_file(tmp.path, "c2.json", cmp2.dump()).string(), "--out",
                         out2.string()}) == 0;
    double d1 = 0.0, d2 = 0.0, s1 = 1.0, s2 = 1.0;
    if (d_ok) {
        const json r1 = json::parse(slurp(out1));
        const json r2 = json::parse(slurp(out2));
        d1 = r1["result"]["mean_diff"].get<double>();
        s1 = r1["result"]["se_diff"].get<double>();
        d2 = r2["result"]["mean_diff"].get<double>();
        s2 = r2["result"]["se_diff"].get<double>();
        d_ok = d1 < -3.0 * s1 && d2 < -3.0 * s2;
    }

    const bool ok = a_ok && b_ok && c_ok && d_ok;
    return {ok, std::string("(a) |z|=") + fmt(mart.max_abs_z) + (a_ok ? " ok" : " FAIL") +
                    "; (b) drift " + fmt(sub.total_drift) + (b_ok ? " ok" : " FAIL") +
                    "; (c) cost " + fmt(cost.mean) + " vs " + fmt(predicted) + " tol " +
                    fmt(tol) + (c_ok ? " ok" : " FAIL") + "; (d) opt-zero " + fmt(d1) + " (se " +
                    fmt(s1) + "), opt-pert " + fmt(d2) + " (se " + fmt(s2) + ")" +
                    (d_ok ? " ok" : " FAIL")};
}

// ---------------------------------------------------------------- criterion 7
Check kinetic_pde() {
    kinetic::Coefficients co;
    co.horizon = 1.0;
    co.drift = [](double, double) { return 0.0; };
    co.drift_bound = 0.0;
    co.rate = [](double) { return 0.3; };
    co.rate_bound = 0.3;
    co.offspring = [](double, std::vector<double>& p) { p = {0.0, 1.0}; };
    co.max_offspring = 1;
    co.offspring_mean_bound = 1.0;
    co.offspring_second_bound = 0.0;
    co.terminal = [](double x) { return x * x; };
    co.terminal_bound = 1.0;

    kinetic::Grid grid{-12.0, 12.0, 1201, 50000, 501};
    auto sol = std::make_shared<const kinetic::Solution>(kinetic::solve_hjb(co, grid));

    auto closed = [&](double tau, double x) {
        return x * x / (1.0 + 2.0 * tau) + 0.5 * std::log(1.0 + 2.0 * tau);
    };
    double sup = 0.0;
    for (double t : {0.0, 0.25, 0.5, 0.75}) {
        for (int i = 0; i <= 400; ++i) {
            const double x = -6.0 + 12.0 * i / 400.0;
            sup = std::max(sup, std::abs(sol->value(t, x) - closed(1.0 - t, x)));
        }
    }
    const bool closed_ok = sup < 1e-3;

    double probe_worst = 0.0;
    bool probes_ok = true;
    for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        const auto mc = kinetic::smoothing_oracle(co.terminal, 1.0, x, 100000,
                                                  static_cast<uint64_t>(811 + 7 * (x + 3)));
        const double gap = std::abs(sol->value(0.0, x) - mc.value);
        probes_ok = probes_ok && gap < 3.0 * mc.se + 1e-3;
        probe_worst = std::max(probe_worst, gap);
    }

    const Scenario scn = kinetic::scenario(co);
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 1e-3;
    const auto cmp = compare_policies(scn, kinetic::optimal_policy(sol), Policy::zero(1), 0.0,
                                      kDelta0, cfg, 4000, 812);
    const bool gap_ok = cmp.mean_diff < -3.0 * cmp.se_diff;

    const bool ok = closed_ok && probes_ok && gap_ok;
    return {ok, "sup err " + fmt(sup) + (closed_ok ? " ok" : " FAIL") + "; probe gap " +
                    fmt(probe_worst) + (probes_ok ? " ok" : " FAIL") + "; J(opt)-J(zero) " +
                    fmt(cmp.mean_diff) + " (se " + fmt(cmp.se_diff) + ")" +
                    (gap_ok ? " ok" : " FAIL")};
}

// ---------------------------------------------------------------- criterion 8
Check cli_determinism() {
    TempDir tmp;
    json cfg = {
        {"scenario",
         {{"kind", "tabular"},
          {"dim_x", 1},
          {"dim_action", 1},
          {"branch_rate", 0.8},
          {"offspring", {0.3, 0.2, 0.5}},
          {"vol", {{1.0}}},
          {"drift_const", {0.1}},
          {"running_cost", {{"state_sq", 1.0}, {"mass", 0.2}}},
          {"terminal_cost", {{"mass", 1.0}}}}},
        {"policy", {{"name", "zero"}}},
        {"initial", {{"t", 0.0}, {"atoms", {{0.4}, {-0.2}}}}},
        {"sim", {{"horizon", 1.0}, {"dt_max", 0.01}, {"output_grid", {0.25, 0.5, 0.75, 1.0}}}},
        {"replications", 400},
        {"seed", 909}};
    const auto cfg_path = write_file(tmp.path, "det.json", cfg.dump(2));

    bool ok = true;
    std::string detail;
    for (const std::string sub : {"simulate", "estimate-cost", "martingale-test"}) {
        json local = cfg;
        if (sub == "martingale-test")
            local["test"] = {{"scalar", "y"}, {"testfn", "1"}, {"checkpoints", {0.5, 1.0}}};
        const auto local_path = write_file(tmp.path, sub + ".json", local.dump(2));
        std::vector<std::string> bytes;
        for (const std::string threads : {"1", "8", "1"}) {
            const auto out = tmp.path / (sub + "_" + threads + "_" +
                                         std::to_string(bytes.size()) + ".json");
            if (run_cli({sub, "--config", local_path.string(), "--out", out.string(), "--threads",
                         threads}) != 0) {
                ok = false;
                detail += sub + " run failed; ";
                break;
            }
            bytes.push_back(slurp(out));
        }
        if (bytes.size() == 3) {
            const bool same = bytes[0] == bytes[1] && bytes[1] == bytes[2] && !bytes[0].empty();
            ok = ok && same;
            detail += sub + (same ? " byte-identical; " : " DIFFERS; ");
        }
    }
    return {ok, detail};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Check()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "branching-law sanity", branching_law_sanity},
        {2, "population moment bounds", moment_bounds},
        {3, "martingale problem", martingale_problem},
        {4, "transport-distance oracle", transport_oracle},
        {5, "quadratic-coefficient benchmark", riccati_benchmark},
        {6, "lq verification", lq_verification},
        {7, "kinetic pde", kinetic_pde},
        {8, "cli determinism", cli_determinism},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
            continue;
        Check result{false, "exception"};
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result.detail = std::string("exception: ") + e.what();
        }
        std::cout << (result.ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name
                  << " — " << result.detail << "\n";
        std::cout.flush();
        if (!result.ok) ++failures;
    }
    return failures;
}
