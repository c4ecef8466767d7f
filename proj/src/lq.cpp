#include "bdlab/lq.hpp"

#include <algorithm>
#include <cmath>

#include "bdlab/errors.hpp"
#include "bdlab/io.hpp"

namespace bdlab::lq {

namespace {

constexpr double kSymTol = 1e-9;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("lq: " + msg);
}

bool is_symmetric(const Eigen::MatrixXd& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymTol * (1.0 + m.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().maxCoeff();
}

// Bracketing index and weight for piecewise-linear interpolation.
size_t bracket(const std::vector<double>& knots, double t, double& w) {
    if (knots.size() == 1 || t <= knots.front()) {
        w = 0.0;
        return 0;
    }
    if (t >= knots.back()) {
        w = 0.0;
        return knots.size() - 1;
    }
    const size_t hi =
        static_cast<size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin());
    w = (t - knots[hi - 1]) / (knots[hi] - knots[hi - 1]);
    return hi - 1;
}

}  // namespace

void Coefficients::validate() const {
    require(dim_x >= 1 && dim_action >= 1, "dimensions must be positive");
    require(horizon > 0.0, "horizon must be positive");
    auto check_table = [&](const auto& tab, const char* name) {
        require(!tab.empty(), std::string(name) + " table is empty");
        require(tab.knots.size() == tab.values.size(), std::string(name) + " table shape mismatch");
        for (size_t i = 1; i < tab.knots.size(); ++i)
            require(tab.knots[i] > tab.knots[i - 1], std::string(name) + " knots not increasing");
    };
    check_table(state_gain, "state_gain");
    check_table(control_gain, "control_gain");
    check_table(vol, "vol");
    check_table(rate, "rate");
    check_table(offspring, "offspring");
    check_table(state_cost, "state_cost");
    check_table(mass_cost, "mass_cost");
    check_table(control_cost, "control_cost");

    for (const auto& m : state_gain.values)
        require(m.rows() == dim_x && m.cols() == dim_x, "state_gain shape");
    for (const auto& m : control_gain.values)
        require(m.rows() == dim_x && m.cols() == dim_action, "control_gain shape");
    for (double r : rate.values) require(r >= 0.0, "rate must be non-negative");
    size_t support = 0;
    for (const auto& p : offspring.values) {
        if (support == 0) support = static_cast<size_t>(p.size());
        require(static_cast<size_t>(p.size()) == support, "offspring tables must share a support");
        require(p.minCoeff() >= -1e-15, "offspring probabilities must be non-negative");
        require(std::abs(p.sum() - 1.0) <= 1e-12, "offspring probabilities must sum to 1");
    }
    for (const auto& m : state_cost.values) {
        require(m.rows() == dim_x && m.cols() == dim_x, "state_cost shape");
        require(is_symmetric(m), "state_cost must be symmetric");
        require(min_eigenvalue(m) >= -kSymTol, "state_cost must be positive semidefinite");
    }
    for (double c : mass_cost.values) require(c >= 0.0, "mass_cost must be non-negative");
    for (const auto& m : control_cost.values) {
        require(m.rows() == dim_action && m.cols() == dim_action, "control_cost shape");
        require(is_symmetric(m), "control_cost must be symmetric");
        require(min_eigenvalue(m) > 0.0, "control_cost must be positive definite");
    }
    require(terminal_state_cost.rows() == dim_x && terminal_state_cost.cols() == dim_x,
            "terminal_state_cost shape");
    require(is_symmetric(terminal_state_cost), "terminal_state_cost must be symmetric");
    require(min_eigenvalue(terminal_state_cost) >= -kSymTol,
            "terminal_state_cost must be positive semidefinite");
    require(terminal_mass_sq_cost >= 0.0, "terminal_mass_sq_cost must be non-negative");
}

void Coefficients::moments(double t, double& mean_shift, double& second_moment) const {
    double w;
    const size_t i = bracket(offspring.knots, t, w);
    mean_shift = 0.0;
    second_moment = 0.0;
    const Eigen::VectorXd& lo = offspring.values[i];
    const Eigen::VectorXd& hi = offspring.values[std::min(i + 1, offspring.values.size() - 1)];
    for (long k = 0; k < lo.size(); ++k) {
        const double pk = (1.0 - w) * lo[k] + w * hi[k];
        const double c = static_cast<double>(k) - 1.0;
        mean_shift += c * pk;
        second_moment += c * c * pk;
    }
}

namespace {

struct OdeState {
    Eigen::MatrixXd quad;
    double mass_sq = 0.0;
    double mass = 0.0;
};

OdeState ode_rhs(const Coefficients& co, double t, const OdeState& y) {
    const Eigen::MatrixXd G = co.state_gain.at(t);
    const Eigen::MatrixXd K = co.control_gain.at(t);
    const Eigen::MatrixXd C = co.state_cost.at(t);
    const Eigen::MatrixXd R = co.control_cost.at(t);
    const double sigma = co.vol.at(t);
    const double gamma = co.rate.at(t);
    const double c = co.mass_cost.at(t);
    double m1, m2;
    co.moments(t, m1, m2);

    const Eigen::MatrixXd KtQ = K.transpose() * y.quad;
    const Eigen::MatrixXd quadratic = KtQ.transpose() * R.ldlt().solve(KtQ);
    OdeState d;
    d.quad = -(G.transpose() * y.quad + y.quad * G + gamma * m1 * y.quad + C - quadratic);
    d.mass_sq = -(2.0 * gamma * m1 * y.mass_sq + c);
    d.mass = -(sigma * sigma * y.quad.trace() + gamma * m1 * y.mass + gamma * m2 * y.mass_sq);
    return d;
}

OdeState axpy_state(const OdeState& y, double a, const OdeState& d) {
    return OdeState{y.quad + a * d.quad, y.mass_sq + a * d.mass_sq, y.mass + a * d.mass};
}

}  // namespace

RiccatiSolution solve_riccati(std::shared_ptr<const Coefficients> coeffs, int steps) {
    coeffs->validate();
    if (steps < 1) throw ConfigError("lq: solver needs at least one step");
    const double T = coeffs->horizon;
    const double dt = T / static_cast<double>(steps);
    if (!(dt > 0.0) || T - dt == T) throw NumericalError("lq: step size underflow");

    RiccatiSolution sol;
    sol.coeffs = coeffs;
    sol.tgrid.resize(steps + 1);
    sol.quad.resize(steps + 1);
    sol.mass_sq.resize(steps + 1);
    sol.mass.resize(steps + 1);
    for (int i = 0; i <= steps; ++i) sol.tgrid[i] = T * static_cast<double>(i) / steps;

    OdeState y{coeffs->terminal_state_cost, coeffs->terminal_mass_sq_cost, 0.0};
    auto store = [&](int node, const OdeState& s) {
        Eigen::MatrixXd q = 0.5 * (s.quad + s.quad.transpose());
        if (min_eigenvalue(q) < -1e-8)
            throw NumericalError("lq: quadratic coefficient lost positive semidefiniteness");
        sol.quad[node] = std::move(q);
        sol.mass_sq[node] = s.mass_sq;
        sol.mass[node] = s.mass;
    };
    store(steps, y);
    const auto& co = *coeffs;
    for (int i = steps; i > 0; --i) {
        const double t = sol.tgrid[i];
        const double h = -dt;  // integrating toward time zero
        const OdeState k1 = ode_rhs(co, t, y);
        const OdeState k2 = ode_rhs(co, t + 0.5 * h, axpy_state(y, 0.5 * h, k1));
        const OdeState k3 = ode_rhs(co, t + 0.5 * h, axpy_state(y, 0.5 * h, k2));
        const OdeState k4 = ode_rhs(co, t + h, axpy_state(y, h, k3));
        y.quad += (h / 6.0) * (k1.quad + 2.0 * k2.quad + 2.0 * k3.quad + k4.quad);
        y.mass_sq += (h / 6.0) * (k1.mass_sq + 2.0 * k2.mass_sq + 2.0 * k3.mass_sq + k4.mass_sq);
        y.mass += (h / 6.0) * (k1.mass + 2.0 * k2.mass + 2.0 * k3.mass + k4.mass);
        y.quad = 0.5 * (y.quad + y.quad.transpose());
        store(i - 1, y);
    }

    sol.gain.resize(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const Eigen::MatrixXd K = co.control_gain.at(sol.tgrid[i]);
        const Eigen::MatrixXd R = co.control_cost.at(sol.tgrid[i]);
        sol.gain[i] = R.ldlt().solve(K.transpose() * sol.quad[i]);
    }
    return sol;
}

namespace {

void check_time(const RiccatiSolution& sol, double t) {
    if (t < sol.tgrid.front() - 1e-9 || t > sol.tgrid.back() + 1e-9)
        throw std::invalid_argument("lq: time outside the solved interval");
}

}  // namespace

Eigen::MatrixXd RiccatiSolution::quad_at(double t) const {
    check_time(*this, t);
    double w;
    const size_t i = bracket(tgrid, t, w);
    if (w == 0.0) return quad[i];
    return (1.0 - w) * quad[i] + w * quad[i + 1];
}

Eigen::MatrixXd RiccatiSolution::gain_at(double t) const {
    check_time(*this, t);
    double w;
    const size_t i = bracket(tgrid, t, w);
    if (w == 0.0) return gain[i];
    return (1.0 - w) * gain[i] + w * gain[i + 1];
}

double RiccatiSolution::mass_sq_at(double t) const {
    check_time(*this, t);
    double w;
    const size_t i = bracket(tgrid, t, w);
    if (w == 0.0) return mass_sq[i];
    return (1.0 - w) * mass_sq[i] + w * mass_sq[i + 1];
}

double RiccatiSolution::mass_at(double t) const {
    check_time(*this, t);
    double w;
    const size_t i = bracket(tgrid, t, w);
    if (w == 0.0) return mass[i];
    return (1.0 - w) * mass[i] + w * mass[i + 1];
}

double value(const RiccatiSolution& sol, double t, const AtomicMeasure& pop) {
    const Eigen::MatrixXd Q = sol.quad_at(t);
    double quad_part = 0.0;
    for (const auto& atom : pop.atoms()) {
        const Eigen::Map<const Eigen::VectorXd> x(atom.position.data(), atom.position.size());
        quad_part += atom.multiplicity * x.dot(Q * x);
    }
    const double m = static_cast<double>(pop.total_mass());
    return quad_part + sol.mass_sq_at(t) * m * m + sol.mass_at(t) * m;
}

void feedback_action(const RiccatiSolution& sol, double t, const Vec& x, Vec& out) {
    double w;
    check_time(sol, t);
    const size_t i = bracket(sol.tgrid, t, w);
    const Eigen::MatrixXd& lo = sol.gain[i];
    const Eigen::MatrixXd& hi = sol.gain[std::min(i + 1, sol.gain.size() - 1)];
    const int q = static_cast<int>(lo.rows());
    const int d = static_cast<int>(lo.cols());
    out.assign(q, 0.0);
    for (int r = 0; r < q; ++r) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += ((1.0 - w) * lo(r, c) + w * hi(r, c)) * x[c];
        out[r] = -s;
    }
}

Policy optimal_policy(std::shared_ptr<const RiccatiSolution> sol) {
    const int q = sol->coeffs->dim_action;
    return Policy::feedback(
        q,
        [sol](double t, const Vec& x, const AtomicMeasure&, Vec& out) {
            feedback_action(*sol, t, x, out);
        },
        "lq-optimal");
}

Policy perturbed_policy(std::shared_ptr<const RiccatiSolution> sol, double epsilon,
                        Vec direction) {
    const int q = sol->coeffs->dim_action;
    if (direction.empty()) {
        direction.assign(q, 0.0);
        direction[0] = 1.0;
    }
    if (static_cast<int>(direction.size()) != q)
        throw std::invalid_argument("lq: perturbation direction dimension mismatch");
    return Policy::feedback(
        q,
        [sol, epsilon, direction](double t, const Vec& x, const AtomicMeasure&, Vec& out) {
            feedback_action(*sol, t, x, out);
            axpy(epsilon, direction, out);
        },
        "lq-perturbed");
}

Scenario scenario(std::shared_ptr<const Coefficients> coeffs) {
    coeffs->validate();
    const auto& co = *coeffs;
    Scenario scn;
    scn.dim_x = co.dim_x;
    scn.dim_noise = co.dim_x;
    scn.dim_action = co.dim_action;
    scn.actions = ActionSet::all(co.dim_action);
    scn.max_offspring = static_cast<int>(co.offspring.values.front().size()) - 1;
    scn.convex_actions = true;
    scn.convex_note = "drift affine in the action, branching action-independent, "
                      "running cost strictly convex in the action";

    scn.drift = [coeffs](double t, const Vec& x, const AtomicMeasure&, const Vec& a, Vec& out) {
        const auto& co = *coeffs;
        double wg, wk;
        const size_t ig = bracket(co.state_gain.knots, t, wg);
        const size_t ik = bracket(co.control_gain.knots, t, wk);
        const auto& g0 = co.state_gain.values[ig];
        const auto& g1 = co.state_gain.values[std::min(ig + 1, co.state_gain.values.size() - 1)];
        const auto& k0 = co.control_gain.values[ik];
        const auto& k1 =
            co.control_gain.values[std::min(ik + 1, co.control_gain.values.size() - 1)];
        for (int r = 0; r < co.dim_x; ++r) {
            double s = 0.0;
            for (int c = 0; c < co.dim_x; ++c)
                s += ((1.0 - wg) * g0(r, c) + wg * g1(r, c)) * x[c];
            for (int c = 0; c < co.dim_action; ++c)
                s += ((1.0 - wk) * k0(r, c) + wk * k1(r, c)) * a[c];
            out[r] = s;
        }
    };
    scn.vol = [coeffs](double t, const Vec&, const AtomicMeasure&, const Vec&, Mat& out) {
        const auto& co = *coeffs;
        const double s = co.vol.at(t);
        out.resize(co.dim_x, co.dim_x);
        std::fill(out.a.begin(), out.a.end(), 0.0);
        for (int i = 0; i < co.dim_x; ++i) out(i, i) = s;
    };
    scn.branch_rate = [coeffs](double t, const Vec&, const AtomicMeasure&, const Vec&) {
        return coeffs->rate.at(t);
    };
    scn.offspring_probs = [coeffs](double t, const Vec&, const AtomicMeasure&, const Vec&,
                                   std::vector<double>& out) {
        const auto& co = *coeffs;
        double w;
        const size_t i = bracket(co.offspring.knots, t, w);
        const auto& lo = co.offspring.values[i];
        const auto& hi = co.offspring.values[std::min(i + 1, co.offspring.values.size() - 1)];
        out.resize(lo.size());
        for (long k = 0; k < lo.size(); ++k) out[k] = (1.0 - w) * lo[k] + w * hi[k];
    };
    scn.running_cost = [coeffs](double t, const Vec& x, const AtomicMeasure& pop, const Vec& a) {
        const auto& co = *coeffs;
        double wc, wr;
        const size_t ic = bracket(co.state_cost.knots, t, wc);
        const size_t ir = bracket(co.control_cost.knots, t, wr);
        const auto& c0 = co.state_cost.values[ic];
        const auto& c1 = co.state_cost.values[std::min(ic + 1, co.state_cost.values.size() - 1)];
        const auto& r0 = co.control_cost.values[ir];
        const auto& r1 =
            co.control_cost.values[std::min(ir + 1, co.control_cost.values.size() - 1)];
        double s = 0.0;
        for (int r = 0; r < co.dim_x; ++r)
            for (int c = 0; c < co.dim_x; ++c)
                s += ((1.0 - wc) * c0(r, c) + wc * c1(r, c)) * x[r] * x[c];
        for (int r = 0; r < co.dim_action; ++r)
            for (int c = 0; c < co.dim_action; ++c)
                s += ((1.0 - wr) * r0(r, c) + wr * r1(r, c)) * a[r] * a[c];
        s += co.mass_cost.at(t) * static_cast<double>(pop.total_mass());
        return s;
    };
    scn.terminal_cost = [coeffs](const AtomicMeasure& pop) {
        const auto& co = *coeffs;
        double s = 0.0;
        for (const auto& atom : pop.atoms()) {
            double q = 0.0;
            for (int r = 0; r < co.dim_x; ++r)
                for (int c = 0; c < co.dim_x; ++c)
                    q += co.terminal_state_cost(r, c) * atom.position[r] * atom.position[c];
            s += atom.multiplicity * q;
        }
        const double m = static_cast<double>(pop.total_mass());
        return s + co.terminal_mass_sq_cost * m * m;
    };

    // Declared bounds, conservative over the knot tables.
    double gain_norm = 0.0;
    for (const auto& m : co.state_gain.values) gain_norm = std::max(gain_norm, m.norm());
    for (const auto& m : co.control_gain.values) gain_norm = std::max(gain_norm, m.norm());
    scn.bounds.drift_growth = gain_norm;
    double vmax = 0.0;
    for (double v : co.vol.values) vmax = std::max(vmax, std::abs(v));
    scn.bounds.vol_bound = vmax * std::sqrt(static_cast<double>(co.dim_x));
    double rmax = 0.0;
    for (double v : co.rate.values) rmax = std::max(rmax, v);
    scn.bounds.rate_bound = rmax;
    double mean_b = 0.0, second_b = 0.0;
    for (const auto& p : co.offspring.values) {
        double m1 = 0.0, m2f = 0.0;
        for (long k = 0; k < p.size(); ++k) {
            m1 += static_cast<double>(k) * p[k];
            m2f += static_cast<double>(k) * (static_cast<double>(k) - 1.0) * p[k];
        }
        mean_b = std::max(mean_b, m1);
        second_b = std::max(second_b, m2f);
    }
    scn.bounds.offspring_mean_bound = mean_b;
    scn.bounds.offspring_second_bound = second_b;
    double growth = 1e-12, coercive = std::numeric_limits<double>::infinity();
    for (const auto& m : co.state_cost.values) growth = std::max(growth, max_eigenvalue(m));
    for (const auto& m : co.control_cost.values) {
        growth = std::max(growth, max_eigenvalue(m));
        coercive = std::min(coercive, min_eigenvalue(m));
    }
    for (double v : co.mass_cost.values) growth = std::max(growth, v);
    growth = std::max({growth, max_eigenvalue(co.terminal_state_cost), co.terminal_mass_sq_cost});
    scn.bounds.cost_growth = growth;
    scn.bounds.control_coercivity = coercive;
    return scn;
}

ValueField value_field(std::shared_ptr<const RiccatiSolution> sol) {
    return [sol](double t, const AtomicMeasure& pop) { return value(*sol, t, pop); };
}

void write_csv(const RiccatiSolution& sol, std::ostream& os) {
    const int d = sol.coeffs->dim_x;
    std::vector<std::string> header{"t"};
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            header.push_back("quad_" + std::to_string(r) + std::to_string(c));
    header.emplace_back("mass_sq");
    header.emplace_back("mass");
    io::write_csv_row(os, header);
    for (size_t i = 0; i < sol.tgrid.size(); ++i) {
        std::vector<std::string> row{io::g17(sol.tgrid[i])};
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) row.push_back(io::g17(sol.quad[i](r, c)));
        row.push_back(io::g17(sol.mass_sq[i]));
        row.push_back(io::g17(sol.mass[i]));
        io::write_csv_row(os, row);
    }
}

std::shared_ptr<Coefficients> scalar_benchmark(double horizon, double rate, double vol) {
    auto co = std::make_shared<Coefficients>();
    co->dim_x = 1;
    co->dim_action = 1;
    co->horizon = horizon;
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->state_gain = TimeTable<Eigen::MatrixXd>::constant(0.0 * one);
    co->control_gain = TimeTable<Eigen::MatrixXd>::constant(one);
    co->vol = TimeTable<double>::constant(vol);
    co->rate = TimeTable<double>::constant(rate);
    Eigen::VectorXd p(3);
    p << 0.5, 0.0, 0.5;
    co->offspring = TimeTable<Eigen::VectorXd>::constant(p);
    co->state_cost = TimeTable<Eigen::MatrixXd>::constant(one);
    co->mass_cost = TimeTable<double>::constant(0.0);
    co->control_cost = TimeTable<Eigen::MatrixXd>::constant(one);
    co->terminal_state_cost = 0.0 * one;
    co->terminal_mass_sq_cost = 0.0;
    return co;
}

}  // namespace bdlab::lq
