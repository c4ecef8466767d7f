#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bdlab/linalg.hpp"
#include "bdlab/measure.hpp"

namespace bdlab {

// Action set: all of R^q or an axis-aligned box.
struct ActionSet {
    bool bounded = false;
    Vec lo, hi;

    static ActionSet all(int) { return ActionSet{}; }
    static ActionSet box(Vec lo, Vec hi) { return ActionSet{true, std::move(lo), std::move(hi)}; }

    bool contains(const Vec& a) const {
        if (!bounded) return true;
        for (size_t i = 0; i < a.size(); ++i)
            if (a[i] < lo[i] || a[i] > hi[i]) return false;
        return true;
    }
};

// Bound constants declared by the scenario author. They are spot-checked by
// sampling, not proven. rate_bound is load-bearing: it is the thinning
// envelope used by the event clock.
struct ScenarioBounds {
    double drift_growth = 0.0;           // |b| <= drift_growth * (1 + |x| + |a|)
    double vol_bound = 0.0;              // |vol| <= vol_bound
    double rate_bound = 0.0;             // branch rate <= rate_bound
    double offspring_mean_bound = 0.0;   // sum_k k p_k <= offspring_mean_bound
    double offspring_second_bound = 0.0; // sum_k k(k-1) p_k <= offspring_second_bound
    double cost_growth = 0.0;            // growth envelope for the costs
    double control_coercivity = 0.0;     // quadratic lower bound on the running cost in a
};

// Coefficient bundle for one control problem. Evaluators must be pure; they
// receive immutable inputs and are called concurrently across replications.
struct Scenario {
    int dim_x = 1;       // particle state dimension
    int dim_noise = 1;   // driving-noise dimension
    int dim_action = 1;  // action dimension

    ActionSet actions;
    ScenarioBounds bounds;
    int max_offspring = 0;  // offspring law support is {0, ..., max_offspring}

    // Convexity declaration for the set {(b, rate*p, cost-level) : a in A};
    // recorded per scenario with a justification, never checked algorithmically.
    bool convex_actions = false;
    std::string convex_note;

    std::function<void(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a, Vec& out)>
        drift;  // out: dim_x
    std::function<void(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a, Mat& out)>
        vol;  // out: dim_x x dim_noise
    std::function<double(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a)>
        branch_rate;
    std::function<void(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a,
                       std::vector<double>& probs)>
        offspring_probs;  // probs: size max_offspring + 1, sums to 1
    std::function<double(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a)>
        running_cost;
    std::function<double(const AtomicMeasure& pop)> terminal_cost;
};

// Outcome of one candidate branching event.
struct BranchOutcome {
    bool thinned = true;
    int offspring = 0;
};

// Classifies a uniform mark z in [0, rate_bound]: marks at or above the local
// rate are thinned; otherwise the offspring count is the cell of the partition
// of [0, rate) whose k-th cell has length rate * p_k.
BranchOutcome offspring_from_mark(const Scenario& scn, double t, const Vec& x,
                                  const AtomicMeasure& pop, const Vec& a, double z);

// First and second centered offspring moments: sum_k (k-1) p_k and
// sum_k (k-1)^2 p_k.
void offspring_moments(const std::vector<double>& probs, double& mean_shift,
                       double& second_moment);
void scenario_moments(const Scenario& scn, double t, const Vec& x, const AtomicMeasure& pop,
                      const Vec& a, double& mean_shift, double& second_moment);

// Sampled sanity check of the declared growth/coercivity envelopes on random
// (x, pop, a) draws. Returns a human-readable violation description, empty on
// success.
std::string spot_check_bounds(const Scenario& scn, int samples, uint64_t seed);

// Simple constant-coefficient scenario used widely in tests and configs:
// constant drift/volatility, state-independent branching, optional mass /
// quadratic costs.
struct TabularScenarioSpec {
    int dim_x = 1;
    int dim_action = 1;
    Vec drift_const;                  // defaults to zero
    Mat drift_linear;                 // optional dim_x x dim_x term, times x
    Mat vol_const;                    // defaults to zero (dim_x x dim_x)
    double branch_rate = 0.0;
    std::vector<double> offspring;    // p_0, ..., p_K; defaults to {1} when rate > 0
    double running_cost_action = 0.0; // coeff of |a|^2
    double running_cost_state = 0.0;  // coeff of |x|^2
    double running_cost_mass = 0.0;   // coeff of <1,pop>
    double terminal_mass = 0.0;       // coeff of <1,pop>
    double terminal_mass_sq = 0.0;    // coeff of <1,pop>^2
    double terminal_state_sq = 0.0;   // coeff of integral of |x|^2
};

Scenario make_tabular_scenario(const TabularScenarioSpec& spec);

}  // namespace bdlab
