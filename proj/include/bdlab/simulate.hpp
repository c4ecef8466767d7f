#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "bdlab/errors.hpp"
#include "bdlab/genealogy.hpp"
#include "bdlab/measure.hpp"
#include "bdlab/policy.hpp"
#include "bdlab/scenario.hpp"

namespace bdlab {

struct SimConfig {
    double dt_max = 1e-3;             // Euler step bound
    double horizon = 1.0;             // terminal time
    std::vector<double> output_grid;  // sorted snapshot times in [start, horizon]
    long max_population = 1000000;    // safety cap on the live population
};

// Live population at one instant: labels (sorted) with positions.
struct PopulationState {
    double time = 0.0;
    std::vector<std::pair<Label, Vec>> particles;

    long size() const { return static_cast<long>(particles.size()); }
    AtomicMeasure measure(int dim) const;
};

struct BranchEventRecord {
    double time = 0.0;
    Label parent;
    bool thinned = true;
    int offspring = 0;            // meaningful when !thinned
    std::vector<Label> children;  // labels created by the event
    long population_after = 0;
};

// Full log of one simulated trajectory.
struct PathRecord {
    double start_time = 0.0;
    AtomicMeasure initial{1};
    std::vector<double> grid_times;
    std::vector<PopulationState> grid_states;
    std::vector<double> grid_running_cost;  // running-cost integral at each grid time
    std::vector<BranchEventRecord> events;
    PopulationState terminal;
    double running_cost = 0.0;  // integral of the summed running cost over [start, horizon]
    double total_cost = 0.0;    // running_cost + terminal cost
    uint64_t master_seed = 0;
    double dt_max = 0.0;
    long max_population_seen = 0;
    long particle_steps = 0;
};

// Raised when the population outgrows the configured cap; carries what was
// simulated so far.
struct ExplosionError : NumericalError {
    ExplosionError(const std::string& what, PathRecord partial_record)
        : NumericalError(what), partial(std::make_shared<PathRecord>(std::move(partial_record))) {}
    std::shared_ptr<PathRecord> partial;
};

// Hook into the simulation loop; used by the estimators to accumulate
// path functionals with the same discretization as the dynamics.
class PathObserver {
  public:
    virtual ~PathObserver() = default;

    // One explicit Euler substep about to be taken from `t` over length `h`.
    // `state` is the pre-move population, `pop` the frozen empirical measure,
    // `actions` the per-particle actions (aligned with state.particles).
    virtual void on_substep(double t, double h, const PopulationState& state,
                            const AtomicMeasure& pop, const std::vector<Vec>& actions) {
        (void)t, (void)h, (void)state, (void)pop, (void)actions;
    }

    virtual void on_event(const BranchEventRecord& event) { (void)event; }

    // An output-grid time was reached (pre-event if an event coincides).
    virtual void on_grid_point(size_t index, const PopulationState& state, double running_cost) {
        (void)index, (void)state, (void)running_cost;
    }
};

// Simulates one trajectory of the controlled branching diffusion.
//
// Candidate event times come from a single exponential clock at rate
// rate_bound * |population| with the triggering particle chosen uniformly
// (equivalent in law to independent per-particle clocks); the uniform mark
// deciding thinning/offspring count is drawn from the triggering particle's
// own stream. Between candidate times all particles advance by explicit
// Euler-Maruyama substeps no longer than dt_max, with the empirical measure
// and the actions frozen at each substep start. Offspring start at the
// parent's death position.
//
// Initial labels: a single-atom population starts as the founding particle;
// otherwise particles get top-level labels 0..m-1 in atom order.
PathRecord simulate_path(const Scenario& scn, const Policy& pol, double start_time,
                         const AtomicMeasure& initial, const SimConfig& cfg, uint64_t master_seed,
                         PathObserver* observer = nullptr);

// One explicit Euler-Maruyama step applied to a population, with fresh
// per-label streams derived from master_seed. Exposed for direct testing of
// the step law.
PopulationState euler_step(const Scenario& scn, const Policy& pol, const PopulationState& state,
                           double h, uint64_t master_seed);

}  // namespace bdlab
