#include "bdlab/scenario.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bdlab/errors.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

BranchOutcome offspring_from_mark(const Scenario& scn, double t, const Vec& x,
                                  const AtomicMeasure& pop, const Vec& a, double z) {
    if (z < 0.0 || z > scn.bounds.rate_bound)
        throw std::invalid_argument("offspring_from_mark: mark outside [0, rate_bound]");
    const double rate = scn.branch_rate(t, x, pop, a);
    if (rate > scn.bounds.rate_bound * (1.0 + 1e-12))
        throw NumericalError("offspring_from_mark: branch rate " + std::to_string(rate) +
                             " exceeds the declared envelope");
    if (z >= rate) return BranchOutcome{true, 0};
    std::vector<double> probs;
    scn.offspring_probs(t, x, pop, a, probs);
    double total = 0.0;
    for (double p : probs) total += p;
    if (std::abs(total - 1.0) > 1e-12)
        throw NumericalError("offspring_from_mark: probabilities sum to " +
                             std::to_string(total));
    double upper = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        upper += rate * probs[k];
        if (z < upper) return BranchOutcome{false, static_cast<int>(k)};
    }
    // z slipped past the last cell through rounding; it belongs to the top one.
    return BranchOutcome{false, static_cast<int>(probs.size()) - 1};
}

void offspring_moments(const std::vector<double>& probs, double& mean_shift,
                       double& second_moment) {
    mean_shift = 0.0;
    second_moment = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        const double c = static_cast<double>(k) - 1.0;
        mean_shift += c * probs[k];
        second_moment += c * c * probs[k];
    }
}

void scenario_moments(const Scenario& scn, double t, const Vec& x, const AtomicMeasure& pop,
                      const Vec& a, double& mean_shift, double& second_moment) {
    std::vector<double> probs;
    scn.offspring_probs(t, x, pop, a, probs);
    offspring_moments(probs, mean_shift, second_moment);
}

std::string spot_check_bounds(const Scenario& scn, int samples, uint64_t seed) {
    rng::Stream stream(seed);
    std::ostringstream oss;
    Vec x(scn.dim_x), a(scn.dim_action), b(scn.dim_x);
    Mat sig;
    std::vector<double> probs;
    for (int s = 0; s < samples; ++s) {
        const double t = stream.uniform();
        for (auto& v : x) v = 4.0 * stream.normal();
        for (auto& v : a) v = 4.0 * stream.normal();
        if (scn.actions.bounded)
            for (int i = 0; i < scn.dim_action; ++i)
                a[i] = scn.actions.lo[i] +
                       (scn.actions.hi[i] - scn.actions.lo[i]) * stream.uniform();
        AtomicMeasure pop(scn.dim_x);
        const int n = 1 + static_cast<int>(stream.uniform_below(5));
        for (int i = 0; i < n; ++i) {
            Vec y(scn.dim_x);
            for (auto& v : y) v = 4.0 * stream.normal();
            pop.add(y);
        }

        std::fill(b.begin(), b.end(), 0.0);
        scn.drift(t, x, pop, a, b);
        if (norm2(b) > scn.bounds.drift_growth * (1.0 + norm2(x) + norm2(a)) + 1e-9) {
            oss << "drift growth bound violated at sample " << s;
            return oss.str();
        }
        scn.vol(t, x, pop, a, sig);
        double fro = 0.0;
        for (double v : sig.a) fro += v * v;
        if (std::sqrt(fro) > scn.bounds.vol_bound + 1e-9) {
            oss << "volatility bound violated at sample " << s;
            return oss.str();
        }
        const double rate = scn.branch_rate(t, x, pop, a);
        if (rate < 0.0 || rate > scn.bounds.rate_bound + 1e-12) {
            oss << "branch-rate bound violated at sample " << s;
            return oss.str();
        }
        scn.offspring_probs(t, x, pop, a, probs);
        double total = 0.0, m1 = 0.0, m2f = 0.0;
        for (size_t k = 0; k < probs.size(); ++k) {
            if (probs[k] < -1e-15) {
                oss << "negative offspring probability at sample " << s;
                return oss.str();
            }
            total += probs[k];
            m1 += static_cast<double>(k) * probs[k];
            m2f += static_cast<double>(k) * (static_cast<double>(k) - 1.0) * probs[k];
        }
        if (std::abs(total - 1.0) > 1e-12) {
            oss << "offspring probabilities sum to " << total << " at sample " << s;
            return oss.str();
        }
        if (m1 > scn.bounds.offspring_mean_bound + 1e-12 ||
            m2f > scn.bounds.offspring_second_bound + 1e-12) {
            oss << "offspring moment bound violated at sample " << s;
            return oss.str();
        }

        // Growth envelope for the costs. The mass term in the upper bound is
        // needed because running costs may charge per head of population.
        const double mass = static_cast<double>(pop.total_mass());
        const double abs_first = pop.integrate([](const Vec& y) { return norm2(y); });
        const double sq = pop.integrate([](const Vec& y) { return dot(y, y); });
        const double growth = scn.bounds.cost_growth;
        const double psi = scn.running_cost(t, x, pop, a);
        if (psi > growth * (1.0 + dot(x, x) + abs_first + mass + dot(a, a)) + 1e-9) {
            oss << "running-cost upper bound violated at sample " << s;
            return oss.str();
        }
        if (psi < -growth * (1.0 + norm2(x)) + scn.bounds.control_coercivity * dot(a, a) - 1e-9) {
            oss << "running-cost coercivity violated at sample " << s;
            return oss.str();
        }
        const double term = scn.terminal_cost(pop);
        if (term > growth * (1.0 + sq + mass * mass) + 1e-9 ||
            term < -growth * (1.0 + abs_first + mass) - 1e-9) {
            oss << "terminal-cost bound violated at sample " << s;
            return oss.str();
        }
    }
    return {};
}

Scenario make_tabular_scenario(const TabularScenarioSpec& spec) {
    Scenario scn;
    scn.dim_x = spec.dim_x;
    scn.dim_noise = spec.dim_x;
    scn.dim_action = spec.dim_action;
    scn.actions = ActionSet::all(spec.dim_action);

    Vec b0 = spec.drift_const;
    if (b0.empty()) b0.assign(spec.dim_x, 0.0);
    Mat b1 = spec.drift_linear;
    Mat sig = spec.vol_const;
    if (sig.rows == 0) sig.resize(spec.dim_x, spec.dim_x);
    std::vector<double> probs = spec.offspring;
    if (probs.empty()) probs = {1.0};

    scn.max_offspring = static_cast<int>(probs.size()) - 1;
    scn.convex_actions = true;
    scn.convex_note = "coefficients affine in the action; running cost convex in the action";

    scn.drift = [b0, b1](double, const Vec& x, const AtomicMeasure&, const Vec&, Vec& out) {
        out = b0;
        if (b1.rows > 0) matvec_add(b1, x, out);
    };
    scn.vol = [sig](double, const Vec&, const AtomicMeasure&, const Vec&, Mat& out) { out = sig; };
    const double rate = spec.branch_rate;
    scn.branch_rate = [rate](double, const Vec&, const AtomicMeasure&, const Vec&) {
        return rate;
    };
    scn.offspring_probs = [probs](double, const Vec&, const AtomicMeasure&, const Vec&,
                                  std::vector<double>& out) { out = probs; };
    const double ca = spec.running_cost_action, cx = spec.running_cost_state,
                 cm = spec.running_cost_mass;
    scn.running_cost = [ca, cx, cm](double, const Vec& x, const AtomicMeasure& pop, const Vec& a) {
        return ca * dot(a, a) + cx * dot(x, x) + cm * static_cast<double>(pop.total_mass());
    };
    const double tm = spec.terminal_mass, tm2 = spec.terminal_mass_sq, ts = spec.terminal_state_sq;
    scn.terminal_cost = [tm, tm2, ts](const AtomicMeasure& pop) {
        const double mass = static_cast<double>(pop.total_mass());
        double sq = 0.0;
        if (ts != 0.0) sq = pop.integrate([](const Vec& y) { return dot(y, y); });
        return tm * mass + tm2 * mass * mass + ts * sq;
    };

    // Declared bounds, computed from the coefficients.
    double growth = 0.0;
    for (double v : b0) growth = std::max(growth, std::abs(v));
    double lin = 0.0;
    for (double v : b1.a) lin += v * v;
    scn.bounds.drift_growth = growth + std::sqrt(lin);
    double fro = 0.0;
    for (double v : sig.a) fro += v * v;
    scn.bounds.vol_bound = std::sqrt(fro);
    scn.bounds.rate_bound = rate;
    double m1 = 0.0, m2f = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) {
        m1 += static_cast<double>(k) * probs[k];
        m2f += static_cast<double>(k) * (static_cast<double>(k) - 1.0) * probs[k];
    }
    scn.bounds.offspring_mean_bound = m1;
    scn.bounds.offspring_second_bound = m2f;
    scn.bounds.cost_growth =
        std::max({std::abs(ca), std::abs(cx), std::abs(cm), std::abs(tm), std::abs(tm2),
                  std::abs(ts), 1e-12});
    scn.bounds.control_coercivity = std::max(ca, 0.0);
    return scn;
}

}  // namespace bdlab
