#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include "bdlab/estimate.hpp"
#include "bdlab/policy.hpp"
#include "bdlab/scenario.hpp"

namespace bdlab::kinetic {

// Control problem with additive control in the drift, unit volatility,
// action-independent state-dependent branching, and kinetic running cost
// |a|^2 / 2. One-dimensional state (the grid solver is 1-D).
struct Coefficients {
    double horizon = 1.0;

    std::function<double(double t, double x)> drift;  // autonomous drift component
    double drift_bound = 0.0;                         // |drift| <= drift_bound * (1 + |x|)

    std::function<double(double x)> rate;
    double rate_bound = 0.0;

    std::function<void(double x, std::vector<double>&)> offspring;
    int max_offspring = 0;
    double offspring_mean_bound = 0.0;
    double offspring_second_bound = 0.0;

    std::function<double(double x)> terminal;  // terminal cost density G
    double terminal_bound = 0.0;               // |G(x)| <= terminal_bound * (1 + x^2)
};

// Mass-growth potential rate(x) * (sum_k k p_k(x) - 1).
double potential(const Coefficients& co, double x);

struct Grid {
    double x_min = -12.0;
    double x_max = 12.0;
    int nx = 1201;   // space nodes
    int nt = 20000;  // time steps
    int max_stored_slices = 801;
};

// Backward semi-implicit finite-difference solution of
//   dh/dt + drift * h_x - |h_x|^2 / 2 + h_xx / 2 + potential * h = 0,
//   h(horizon, x) = terminal(x),
// with homogeneous Neumann boundaries: the diffusion term is implicit
// (tridiagonal solve per step), the advection, gradient-square and potential
// terms explicit from the later time slice. Slices are stored on a decimated
// time grid; evaluation interpolates bilinearly and clamps x to the domain.
struct Solution {
    Grid grid;
    double horizon = 0.0;
    std::vector<double> times;               // ascending stored slice times, 0 and horizon included
    std::vector<std::vector<double>> h;      // times x nx
    std::vector<std::vector<double>> slope;  // central-difference h_x per stored slice

    double value(double t, double x) const;
    double gradient(double t, double x) const;
};

Solution solve_hjb(const Coefficients& co, const Grid& grid);

// Monte Carlo reference value for the exactly linearizable regime
// (zero autonomous drift, zero potential):
//   -log E[ exp(-terminal(x + sqrt(tau) Z)) ],  Z standard normal,
// with a delta-method standard error.
struct McValue {
    double value = 0.0;
    double se = 0.0;
};
McValue smoothing_oracle(const std::function<double(double)>& terminal, double tau, double x,
                         int samples, uint64_t seed);

// Feedback a = -h_x evaluated on the stored solution.
Policy optimal_policy(std::shared_ptr<const Solution> sol);

Scenario scenario(const Coefficients& co);

// Candidate value of a population: integral of h(t, .) against the measure.
ValueField value_field(std::shared_ptr<const Solution> sol);

// CSV rows: t, x, h, slope for every stored node.
void write_csv(const Solution& sol, std::ostream& os);

}  // namespace bdlab::kinetic
