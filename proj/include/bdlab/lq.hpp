#pragma once

#include <Eigen/Dense>
#include <memory>
#include <ostream>
#include <vector>

#include "bdlab/estimate.hpp"
#include "bdlab/policy.hpp"
#include "bdlab/scenario.hpp"

namespace bdlab::lq {

// Piecewise-linear coefficient table on [0, horizon]; evaluation clamps at
// the ends.
template <typename T>
struct TimeTable {
    std::vector<double> knots;
    std::vector<T> values;

    static TimeTable constant(T v) { return TimeTable{{0.0}, {std::move(v)}}; }

    bool empty() const { return knots.empty(); }

    T at(double t) const {
        if (knots.size() == 1 || t <= knots.front()) return values.front();
        if (t >= knots.back()) return values.back();
        size_t hi = 1;
        while (knots[hi] < t) ++hi;
        const double w = (t - knots[hi - 1]) / (knots[hi] - knots[hi - 1]);
        return values[hi - 1] + w * (values[hi] - values[hi - 1]);
    }
};

// Control problem with linear state/control drift, scalar volatility,
// state-independent branching, and quadratic costs:
//   drift        = state_gain(t) x + control_gain(t) a
//   volatility   = vol(t) * I
//   running cost = x' state_cost(t) x + mass_cost(t) <1,pop> + a' control_cost(t) a
//   terminal     = integral of x' terminal_state_cost x + terminal_mass_sq_cost <1,pop>^2
struct Coefficients {
    int dim_x = 1;
    int dim_action = 1;
    double horizon = 1.0;

    TimeTable<Eigen::MatrixXd> state_gain;    // d x d
    TimeTable<Eigen::MatrixXd> control_gain;  // d x q
    TimeTable<double> vol;                    // scalar multiple of I
    TimeTable<double> rate;                   // branching rate
    TimeTable<Eigen::VectorXd> offspring;     // probability vectors, shared length
    TimeTable<Eigen::MatrixXd> state_cost;    // d x d, symmetric PSD
    TimeTable<double> mass_cost;
    TimeTable<Eigen::MatrixXd> control_cost;  // q x q, symmetric PD
    Eigen::MatrixXd terminal_state_cost;      // d x d, symmetric PSD
    double terminal_mass_sq_cost = 0.0;

    // Throws ConfigError on shape errors, asymmetry, indefinite cost
    // matrices, or invalid offspring tables.
    void validate() const;

    // Offspring moments sum_k (k-1) p_k and sum_k (k-1)^2 p_k at time t.
    void moments(double t, double& mean_shift, double& second_moment) const;
};

// Backward solution of the value-field coefficient system
//   quad'    + G' quad + quad G + rate*m1*quad + state_cost
//            - quad K R^{-1} K' quad            = 0,  quad(T) = terminal_state_cost
//   msq'     + 2 rate*m1*msq + mass_cost        = 0,  msq(T)  = terminal_mass_sq_cost
//   mass'    + vol^2 tr(quad) + rate*m1*mass
//            + rate*m2*msq                      = 0,  mass(T) = 0
// (G = state_gain, K = control_gain, R = control_cost), integrated with a
// classical fourth-order one-step method on a uniform grid; quad is
// symmetrized at every node.
struct RiccatiSolution {
    std::vector<double> tgrid;  // ascending, tgrid.front() = 0, tgrid.back() = horizon
    std::vector<Eigen::MatrixXd> quad;
    std::vector<double> mass_sq;
    std::vector<double> mass;
    // Feedback gain control_cost^{-1} control_gain' quad at each node (q x d).
    std::vector<Eigen::MatrixXd> gain;
    std::shared_ptr<const Coefficients> coeffs;

    Eigen::MatrixXd quad_at(double t) const;
    Eigen::MatrixXd gain_at(double t) const;
    double mass_sq_at(double t) const;
    double mass_at(double t) const;
};

RiccatiSolution solve_riccati(std::shared_ptr<const Coefficients> coeffs, int steps);

// Candidate value of a population: integral of x' quad(t) x plus
// msq(t) <1,pop>^2 plus mass(t) <1,pop>.
double value(const RiccatiSolution& sol, double t, const AtomicMeasure& pop);

// Minimizing feedback action  -control_cost(t)^{-1} control_gain(t)' quad(t) x.
void feedback_action(const RiccatiSolution& sol, double t, const Vec& x, Vec& out);

Policy optimal_policy(std::shared_ptr<const RiccatiSolution> sol);

// Optimal feedback shifted by epsilon times a fixed direction (defaults to
// the first coordinate direction).
Policy perturbed_policy(std::shared_ptr<const RiccatiSolution> sol, double epsilon,
                        Vec direction = {});

Scenario scenario(std::shared_ptr<const Coefficients> coeffs);

ValueField value_field(std::shared_ptr<const RiccatiSolution> sol);

// CSV rows: t, quad (row-major), mass_sq, mass.
void write_csv(const RiccatiSolution& sol, std::ostream& os);

// The scalar benchmark problem: d = q = 1, state_gain 0, control_gain 1,
// state_cost 1, control_cost 1, no branching effect on the mean
// (offspring = {0.5, 0, 0.5}), zero terminal cost. Its quad component has a
// hyperbolic-tangent closed form.
std::shared_ptr<Coefficients> scalar_benchmark(double horizon = 1.0, double rate = 0.0,
                                               double vol = 1.0);

}  // namespace bdlab::lq
