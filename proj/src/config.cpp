#include "bdlab/config.hpp"

#include <cmath>
#include <fstream>

#include "bdlab/errors.hpp"

namespace bdlab::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

const json& member(const json& j, const std::string& path, const std::string& key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing");
    return *it;
}

const json* member_opt(const json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Vec as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vec out;
    for (size_t i = 0; i < j.size(); ++i)
        out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& path) {
    if (j.is_number()) {
        Eigen::MatrixXd m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array() || j.empty()) fail(path, "expected a matrix (array of rows)");
    const size_t rows = j.size();
    const json& first = j[0];
    if (!first.is_array() || first.empty()) fail(path + "[0]", "expected a row array");
    const size_t cols = first.size();
    Eigen::MatrixXd m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        const json& row = j[r];
        if (!row.is_array() || row.size() != cols)
            fail(path + "[" + std::to_string(r) + "]", "ragged matrix row");
        for (size_t c = 0; c < cols; ++c)
            m(static_cast<long>(r), static_cast<long>(c)) =
                as_number(row[c], path + "[" + std::to_string(r) + "]");
    }
    return m;
}

// Tables accept either a bare value (constant in time) or
// {"knots": [...], "values": [...]}.
template <typename T, typename ParseValue>
lq::TimeTable<T> as_table(const json& j, const std::string& path, ParseValue parse) {
    lq::TimeTable<T> tab;
    if (j.is_object() && j.contains("knots")) {
        const json& knots = member(j, path, "knots");
        const json& values = member(j, path, "values");
        if (!knots.is_array() || !values.is_array() || knots.size() != values.size() ||
            knots.empty())
            fail(path, "knots/values must be equal-length non-empty arrays");
        for (size_t i = 0; i < knots.size(); ++i) {
            tab.knots.push_back(as_number(knots[i], path + ".knots"));
            tab.values.push_back(parse(values[i], path + ".values[" + std::to_string(i) + "]"));
        }
        return tab;
    }
    tab.knots.push_back(0.0);
    tab.values.push_back(parse(j, path));
    return tab;
}

lq::TimeTable<double> scalar_table(const json& j, const std::string& path) {
    return as_table<double>(j, path, [](const json& v, const std::string& p) {
        return as_number(v, p);
    });
}

lq::TimeTable<Eigen::MatrixXd> matrix_table(const json& j, const std::string& path) {
    return as_table<Eigen::MatrixXd>(j, path, [](const json& v, const std::string& p) {
        return as_matrix(v, p);
    });
}

lq::TimeTable<Eigen::VectorXd> prob_table(const json& j, const std::string& path) {
    return as_table<Eigen::VectorXd>(j, path, [](const json& v, const std::string& p) {
        const Vec raw = as_vector(v, p);
        Eigen::VectorXd out(raw.size());
        for (size_t i = 0; i < raw.size(); ++i) out[static_cast<long>(i)] = raw[i];
        return out;
    });
}

std::shared_ptr<lq::Coefficients> parse_lq(const json& j, double horizon) {
    auto co = std::make_shared<lq::Coefficients>();
    co->horizon = horizon;
    co->dim_x = as_int(member(j, "scenario", "dim_x"), "scenario.dim_x");
    co->dim_action = as_int(member(j, "scenario", "dim_action"), "scenario.dim_action");
    co->state_gain = matrix_table(member(j, "scenario", "state_gain"), "scenario.state_gain");
    co->control_gain = matrix_table(member(j, "scenario", "control_gain"), "scenario.control_gain");
    co->vol = scalar_table(member(j, "scenario", "vol"), "scenario.vol");
    co->rate = scalar_table(member(j, "scenario", "rate"), "scenario.rate");
    co->offspring = prob_table(member(j, "scenario", "offspring"), "scenario.offspring");
    co->state_cost = matrix_table(member(j, "scenario", "state_cost"), "scenario.state_cost");
    co->mass_cost = scalar_table(member(j, "scenario", "mass_cost"), "scenario.mass_cost");
    co->control_cost = matrix_table(member(j, "scenario", "control_cost"), "scenario.control_cost");
    co->terminal_state_cost =
        as_matrix(member(j, "scenario", "terminal_state_cost"), "scenario.terminal_state_cost");
    co->terminal_mass_sq_cost =
        as_number(member(j, "scenario", "terminal_mass_sq_cost"), "scenario.terminal_mass_sq_cost");
    co->validate();
    return co;
}

std::function<double(double)> parse_terminal_fn(const json& j, const std::string& path,
                                                double& bound) {
    const std::string kind = as_string(member(j, path, "kind"), path + ".kind");
    if (kind == "zero") {
        bound = 0.0;
        return [](double) { return 0.0; };
    }
    if (kind == "quadratic") {
        const double c = as_number(member(j, path, "coeff"), path + ".coeff");
        bound = std::abs(c);
        return [c](double x) { return c * x * x; };
    }
    if (kind == "gauss_well") {
        const double c = as_number(member(j, path, "coeff"), path + ".coeff");
        bound = std::abs(c);
        return [c](double x) { return c * (1.0 - std::exp(-0.5 * x * x)); };
    }
    fail(path + ".kind", "unknown terminal kind '" + kind + "'");
}

std::shared_ptr<kinetic::Coefficients> parse_kinetic(const json& j, double horizon) {
    auto co = std::make_shared<kinetic::Coefficients>();
    co->horizon = horizon;

    const json& drift = member(j, "scenario", "drift");
    const std::string dkind = as_string(member(drift, "scenario.drift", "kind"),
                                        "scenario.drift.kind");
    if (dkind == "zero") {
        co->drift = [](double, double) { return 0.0; };
        co->drift_bound = 0.0;
    } else if (dkind == "linear") {
        const double c0 = as_number(member(drift, "scenario.drift", "const"),
                                    "scenario.drift.const");
        const double c1 = as_number(member(drift, "scenario.drift", "slope"),
                                    "scenario.drift.slope");
        co->drift = [c0, c1](double, double x) { return c0 + c1 * x; };
        co->drift_bound = std::abs(c0) + std::abs(c1);
    } else {
        fail("scenario.drift.kind", "unknown drift kind '" + dkind + "'");
    }

    const json& rate = member(j, "scenario", "rate");
    const std::string rkind = as_string(member(rate, "scenario.rate", "kind"),
                                        "scenario.rate.kind");
    if (rkind == "constant") {
        const double v = as_number(member(rate, "scenario.rate", "value"), "scenario.rate.value");
        if (v < 0.0) fail("scenario.rate.value", "must be non-negative");
        co->rate = [v](double) { return v; };
        co->rate_bound = v;
    } else if (rkind == "bump") {
        const double base = as_number(member(rate, "scenario.rate", "base"), "scenario.rate.base");
        const double amp = as_number(member(rate, "scenario.rate", "amplitude"),
                                     "scenario.rate.amplitude");
        if (base < 0.0 || amp < 0.0) fail("scenario.rate", "base/amplitude must be non-negative");
        co->rate = [base, amp](double x) { return base + amp * std::exp(-0.5 * x * x); };
        co->rate_bound = base + amp;
    } else {
        fail("scenario.rate.kind", "unknown rate kind '" + rkind + "'");
    }

    const Vec probs = as_vector(member(j, "scenario", "offspring"), "scenario.offspring");
    double total = 0.0, m1 = 0.0, m2f = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        total += probs[k];
        m1 += static_cast<double>(k) * probs[k];
        m2f += static_cast<double>(k) * (static_cast<double>(k) - 1.0) * probs[k];
    }
    if (std::abs(total - 1.0) > 1e-12) fail("scenario.offspring", "must sum to 1");
    co->offspring = [probs](double, std::vector<double>& out) { out = probs; };
    co->max_offspring = static_cast<int>(probs.size()) - 1;
    co->offspring_mean_bound = m1;
    co->offspring_second_bound = m2f;

    co->terminal = parse_terminal_fn(member(j, "scenario", "terminal"), "scenario.terminal",
                                     co->terminal_bound);
    return co;
}

Scenario parse_tabular(const json& j) {
    TabularScenarioSpec spec;
    spec.dim_x = as_int(member(j, "scenario", "dim_x"), "scenario.dim_x");
    spec.dim_action = as_int(member(j, "scenario", "dim_action"), "scenario.dim_action");
    if (const json* v = member_opt(j, "drift_const"))
        spec.drift_const = as_vector(*v, "scenario.drift_const");
    if (const json* v = member_opt(j, "drift_linear")) {
        const Eigen::MatrixXd m = as_matrix(*v, "scenario.drift_linear");
        spec.drift_linear.resize(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) spec.drift_linear(r, c) = m(r, c);
    }
    if (const json* v = member_opt(j, "vol")) {
        const Eigen::MatrixXd m = as_matrix(*v, "scenario.vol");
        spec.vol_const.resize(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) spec.vol_const(r, c) = m(r, c);
    }
    if (const json* v = member_opt(j, "branch_rate"))
        spec.branch_rate = as_number(*v, "scenario.branch_rate");
    if (const json* v = member_opt(j, "offspring"))
        spec.offspring = as_vector(*v, "scenario.offspring");
    if (const json* v = member_opt(j, "running_cost")) {
        if (const json* w = member_opt(*v, "action_sq"))
            spec.running_cost_action = as_number(*w, "scenario.running_cost.action_sq");
        if (const json* w = member_opt(*v, "state_sq"))
            spec.running_cost_state = as_number(*w, "scenario.running_cost.state_sq");
        if (const json* w = member_opt(*v, "mass"))
            spec.running_cost_mass = as_number(*w, "scenario.running_cost.mass");
    }
    if (const json* v = member_opt(j, "terminal_cost")) {
        if (const json* w = member_opt(*v, "mass"))
            spec.terminal_mass = as_number(*w, "scenario.terminal_cost.mass");
        if (const json* w = member_opt(*v, "mass_sq"))
            spec.terminal_mass_sq = as_number(*w, "scenario.terminal_cost.mass_sq");
        if (const json* w = member_opt(*v, "state_sq"))
            spec.terminal_state_sq = as_number(*w, "scenario.terminal_cost.state_sq");
    }
    double total = 0.0;
    for (double p : spec.offspring.empty() ? std::vector<double>{1.0} : spec.offspring) total += p;
    if (std::abs(total - 1.0) > 1e-12) fail("scenario.offspring", "must sum to 1");
    return make_tabular_scenario(spec);
}

}  // namespace

ValueField ExperimentBundle::value_field_for(const std::string& name) {
    if (name == "lq") {
        if (!lq_solution) {
            if (!lq_coeffs) throw ConfigError("test.field: 'lq' needs an lq scenario");
            lq_solution = std::make_shared<const lq::RiccatiSolution>(
                lq::solve_riccati(lq_coeffs, lq_steps));
        }
        return lq::value_field(lq_solution);
    }
    if (name == "kinetic") {
        if (!kinetic_solution) {
            if (!kinetic_coeffs) throw ConfigError("test.field: 'kinetic' needs a kinetic scenario");
            kinetic_solution = std::make_shared<const kinetic::Solution>(
                kinetic::solve_hjb(*kinetic_coeffs, kinetic_grid));
        }
        return kinetic::value_field(kinetic_solution);
    }
    throw ConfigError("test.field: unknown value field '" + name + "'");
}

ExperimentBundle load_experiment(const json& raw) {
    if (!raw.is_object()) throw ConfigError("config root must be an object");
    ExperimentBundle b;

    json cfg = raw;
    cfg.erase("threads");  // execution detail, not part of the experiment
    b.resolved = cfg;

    const json& sim = member(cfg, "config", "sim");
    b.sim.horizon = as_number(member(sim, "sim", "horizon"), "sim.horizon");
    b.sim.dt_max = as_number(member(sim, "sim", "dt_max"), "sim.dt_max");
    if (b.sim.dt_max <= 0.0) fail("sim.dt_max", "must be positive");
    if (const json* v = member_opt(sim, "max_population")) {
        b.sim.max_population = as_int(*v, "sim.max_population");
        if (b.sim.max_population <= 0) fail("sim.max_population", "must be positive");
    }

    const json& scn = member(cfg, "config", "scenario");
    b.scenario_kind = as_string(member(scn, "scenario", "kind"), "scenario.kind");
    if (b.scenario_kind == "lq") {
        b.lq_coeffs = parse_lq(scn, b.sim.horizon);
        b.scenario = lq::scenario(b.lq_coeffs);
    } else if (b.scenario_kind == "kinetic") {
        b.kinetic_coeffs = parse_kinetic(scn, b.sim.horizon);
        b.scenario = kinetic::scenario(*b.kinetic_coeffs);
    } else if (b.scenario_kind == "custom-tabular" || b.scenario_kind == "tabular") {
        b.scenario = parse_tabular(scn);
        // optional author-declared thinning envelope above the actual rate
        if (const json* v = member_opt(scn, "rate_bound")) {
            const double envelope = as_number(*v, "scenario.rate_bound");
            if (envelope < b.scenario.bounds.rate_bound)
                fail("scenario.rate_bound", "below the actual branch rate");
            b.scenario.bounds.rate_bound = envelope;
        }
    } else {
        fail("scenario.kind", "unknown scenario kind '" + b.scenario_kind + "'");
    }

    const json& init = member(cfg, "config", "initial");
    b.start_time = as_number(member(init, "initial", "t"), "initial.t");
    b.initial = AtomicMeasure(b.scenario.dim_x);
    const json& atoms = member(init, "initial", "atoms");
    if (!atoms.is_array()) fail("initial.atoms", "expected an array");
    for (size_t i = 0; i < atoms.size(); ++i) {
        const std::string path = "initial.atoms[" + std::to_string(i) + "]";
        const json& atom = atoms[i];
        Vec pos;
        int mult = 1;
        if (atom.is_array()) {
            pos = as_vector(atom, path);
        } else {
            pos = as_vector(member(atom, path, "position"), path + ".position");
            if (const json* v = member_opt(atom, "multiplicity")) mult = as_int(*v, path);
        }
        if (static_cast<int>(pos.size()) != b.scenario.dim_x)
            fail(path, "position dimension mismatch");
        b.initial.add(pos, mult);
    }

    if (const json* v = member_opt(sim, "output_grid")) {
        if (v->is_array()) {
            b.sim.output_grid = as_vector(*v, "sim.output_grid");
        } else if (v->is_object()) {
            const int count = as_int(member(*v, "sim.output_grid", "count"),
                                     "sim.output_grid.count");
            if (count < 1) fail("sim.output_grid.count", "must be positive");
            for (int i = 1; i <= count; ++i)
                b.sim.output_grid.push_back(
                    b.start_time + (b.sim.horizon - b.start_time) * i / count);
        } else {
            fail("sim.output_grid", "expected an array or {count}");
        }
    }

    b.replications = 2;
    if (const json* v = member_opt(cfg, "replications"))
        b.replications = as_int(*v, "replications");
    if (!cfg.contains("seed")) fail("seed", "missing (runs must be seeded explicitly)");
    b.seed = static_cast<uint64_t>(as_number(member(cfg, "config", "seed"), "seed"));

    if (const json* v = member_opt(cfg, "lq_solver"))
        b.lq_steps = as_int(member(*v, "lq_solver", "steps"), "lq_solver.steps");
    if (const json* v = member_opt(cfg, "kinetic_solver")) {
        b.kinetic_grid.x_min = as_number(member(*v, "kinetic_solver", "x_min"),
                                         "kinetic_solver.x_min");
        b.kinetic_grid.x_max = as_number(member(*v, "kinetic_solver", "x_max"),
                                         "kinetic_solver.x_max");
        b.kinetic_grid.nx = as_int(member(*v, "kinetic_solver", "nx"), "kinetic_solver.nx");
        b.kinetic_grid.nt = as_int(member(*v, "kinetic_solver", "nt"), "kinetic_solver.nt");
    }

    auto build_policy = [&](const json& pj, const std::string& path) -> Policy {
        const std::string name = as_string(member(pj, path, "name"), path + ".name");
        if (name == "zero") return Policy::zero(b.scenario.dim_action);
        if (name == "constant") {
            Vec a = as_vector(member(pj, path, "action"), path + ".action");
            if (static_cast<int>(a.size()) != b.scenario.dim_action)
                fail(path + ".action", "action dimension mismatch");
            return Policy::constant(std::move(a));
        }
        if (name == "lq-optimal" || name == "lq-perturbed") {
            if (!b.lq_coeffs) fail(path + ".name", "'" + name + "' needs an lq scenario");
            if (!b.lq_solution)
                b.lq_solution = std::make_shared<const lq::RiccatiSolution>(
                    lq::solve_riccati(b.lq_coeffs, b.lq_steps));
            if (name == "lq-optimal") return lq::optimal_policy(b.lq_solution);
            const json* e = member_opt(pj, "epsilon");
            const double eps = e ? as_number(*e, path + ".epsilon") : 0.5;
            return lq::perturbed_policy(b.lq_solution, eps);
        }
        if (name == "kinetic-optimal") {
            if (!b.kinetic_coeffs) fail(path + ".name", "'kinetic-optimal' needs a kinetic scenario");
            if (!b.kinetic_solution)
                b.kinetic_solution = std::make_shared<const kinetic::Solution>(
                    kinetic::solve_hjb(*b.kinetic_coeffs, b.kinetic_grid));
            return kinetic::optimal_policy(b.kinetic_solution);
        }
        fail(path + ".name", "unknown policy '" + name + "'");
    };

    if (const json* v = member_opt(cfg, "policy")) {
        b.policy = build_policy(*v, "policy");
    } else {
        b.policy = Policy::zero(b.scenario.dim_action);
    }
    if (const json* v = member_opt(cfg, "policy_b")) b.policy_b = build_policy(*v, "policy_b");

    b.test.scalar = testfn::identity();
    b.test.testfn = testfn::one(b.scenario.dim_x);
    if (const json* v = member_opt(cfg, "test")) {
        if (const json* w = member_opt(*v, "scalar"))
            b.test.scalar = testfn::scalar_by_name(as_string(*w, "test.scalar"));
        if (const json* w = member_opt(*v, "testfn"))
            b.test.testfn = testfn::by_name(as_string(*w, "test.testfn"), b.scenario.dim_x);
        if (const json* w = member_opt(*v, "checkpoints"))
            b.test.checkpoints = as_vector(*w, "test.checkpoints");
        if (const json* w = member_opt(*v, "z_threshold"))
            b.test.z_threshold = as_number(*w, "test.z_threshold");
        if (const json* w = member_opt(*v, "quadratic_variation"))
            b.test.quadratic_variation = w->get<bool>();
        if (const json* w = member_opt(*v, "mode")) {
            const std::string mode = as_string(*w, "test.mode");
            if (mode == "martingale") b.test.mode = DriftMode::Martingale;
            else if (mode == "submartingale") b.test.mode = DriftMode::Submartingale;
            else fail("test.mode", "expected 'martingale' or 'submartingale'");
        }
        if (const json* w = member_opt(*v, "field")) b.test.field = as_string(*w, "test.field");
    }
    if (b.test.checkpoints.empty()) {
        for (int i = 1; i <= 4; ++i)
            b.test.checkpoints.push_back(b.start_time +
                                         (b.sim.horizon - b.start_time) * i / 4.0);
    }
    return b;
}

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

}  // namespace bdlab::config
