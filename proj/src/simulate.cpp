#include "bdlab/simulate.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdlab {

AtomicMeasure PopulationState::measure(int dim) const {
    AtomicMeasure m(dim);
    for (const auto& [label, pos] : particles) m.add(pos);
    return m;
}

namespace {

struct Particle {
    Label label;
    Vec pos;
    rng::Stream brownian;
    rng::Stream mark;
    rng::Stream action;
};

Particle make_particle(uint64_t master_seed, Label label, Vec pos) {
    rng::Stream brownian = rng::label_stream(master_seed, label, rng::StreamKind::Brownian);
    rng::Stream mark = rng::label_stream(master_seed, label, rng::StreamKind::UniformMark);
    rng::Stream action = rng::label_stream(master_seed, label, rng::StreamKind::Action);
    return Particle{std::move(label), std::move(pos), brownian, mark, action};
}

class PathSimulator {
  public:
    PathSimulator(const Scenario& scn, const Policy& pol, double start_time,
                  const AtomicMeasure& initial, const SimConfig& cfg, uint64_t master_seed,
                  PathObserver* observer)
        : scn_(scn),
          pol_(pol),
          cfg_(cfg),
          seed_(master_seed),
          observer_(observer),
          // The event clock runs on the founding label's Poisson stream; with
          // superposition no particle consumes its own Poisson stream, so the
          // key is free.
          clock_(rng::label_stream(master_seed, Label::root(), rng::StreamKind::Poisson)) {
        validate(start_time, initial);
        time_ = start_time;
        record_.start_time = start_time;
        record_.initial = initial;
        record_.master_seed = master_seed;
        record_.dt_max = cfg.dt_max;
        seed_population(initial);
        record_.max_population_seen = population();
    }

    PathRecord run() {
        const double T = cfg_.horizon;
        flush_grid_points_at_or_before(time_);
        while (true) {
            if (particles_.empty()) {
                // Extinct: the zero measure carries to the horizon, costs stop
                // accruing and no further events can fire.
                time_ = T;
                flush_grid_points_at_or_before(T);
                break;
            }
            const double rate = scn_.bounds.rate_bound * static_cast<double>(population());
            double event_time = std::numeric_limits<double>::infinity();
            if (rate > 0.0) event_time = time_ + clock_.exponential(rate);
            const double stop = std::min(event_time, T);
            advance_to(stop);
            if (event_time <= T) {
                apply_candidate_event();
            } else {
                break;
            }
        }
        record_.terminal = snapshot_state();
        record_.terminal.time = T;
        record_.running_cost = running_cost_;
        record_.total_cost = running_cost_ + scn_.terminal_cost(snapshot_measure());
        return std::move(record_);
    }

  private:
    void validate(double start_time, const AtomicMeasure& initial) const {
        if (initial.dim() != scn_.dim_x)
            throw std::invalid_argument("simulate_path: initial measure dimension mismatch");
        if (pol_.dim_action() != scn_.dim_action)
            throw std::invalid_argument("simulate_path: policy action dimension mismatch");
        if (cfg_.dt_max <= 0.0) throw std::invalid_argument("simulate_path: dt_max must be > 0");
        if (cfg_.horizon < start_time)
            throw std::invalid_argument("simulate_path: horizon before start time");
        if (cfg_.max_population <= 0)
            throw std::invalid_argument("simulate_path: max_population must be positive");
        double prev = start_time;
        for (double g : cfg_.output_grid) {
            if (g < prev) throw std::invalid_argument("simulate_path: output grid not sorted");
            if (g > cfg_.horizon + 1e-12)
                throw std::invalid_argument("simulate_path: output grid beyond horizon");
            prev = g;
        }
    }

    void seed_population(const AtomicMeasure& initial) {
        if (initial.total_mass() == 1) {
            particles_.push_back(make_particle(seed_, Label::root(), initial.atoms()[0].position));
            return;
        }
        uint32_t next = 0;
        for (const auto& atom : initial.atoms())
            for (int k = 0; k < atom.multiplicity; ++k)
                particles_.push_back(
                    make_particle(seed_, Label::root().child(next++), atom.position));
    }

    long population() const { return static_cast<long>(particles_.size()); }

    AtomicMeasure snapshot_measure() const {
        AtomicMeasure m(scn_.dim_x);
        for (const auto& p : particles_) m.add(p.pos);
        return m;
    }

    PopulationState snapshot_state() const {
        PopulationState s;
        s.time = time_;
        s.particles.reserve(particles_.size());
        for (const auto& p : particles_) s.particles.emplace_back(p.label, p.pos);
        return s;
    }

    void record_grid_point() {
        const size_t index = record_.grid_states.size();
        record_.grid_times.push_back(cfg_.output_grid[index]);
        PopulationState s = snapshot_state();
        s.time = cfg_.output_grid[index];
        record_.grid_states.push_back(s);
        record_.grid_running_cost.push_back(running_cost_);
        if (observer_) observer_->on_grid_point(index, record_.grid_states.back(), running_cost_);
    }

    void flush_grid_points_at_or_before(double t) {
        while (record_.grid_states.size() < cfg_.output_grid.size() &&
               cfg_.output_grid[record_.grid_states.size()] <= t)
            record_grid_point();
    }

    // Advances all particles from time_ to target, landing exactly on every
    // output-grid time in between.
    void advance_to(double target) {
        while (time_ < target) {
            double stop = target;
            const size_t gi = record_.grid_states.size();
            if (gi < cfg_.output_grid.size() && cfg_.output_grid[gi] < target)
                stop = cfg_.output_grid[gi];
            const double span = stop - time_;
            if (span > 0.0) {
                const long nsub =
                    std::max<long>(1, static_cast<long>(std::ceil(span / cfg_.dt_max - 1e-12)));
                const double h = span / static_cast<double>(nsub);
                for (long k = 0; k < nsub; ++k) substep(h);
            }
            time_ = stop;
            flush_grid_points_at_or_before(time_);
        }
    }

    // One explicit Euler-Maruyama substep of length h starting at time_;
    // empirical measure and actions frozen at the substep start.
    void substep(double h) {
        const AtomicMeasure pop = snapshot_measure();
        const size_t n = particles_.size();
        actions_.resize(n);
        for (size_t i = 0; i < n; ++i)
            pol_.evaluate(time_, particles_[i].pos, pop, scn_.actions, &particles_[i].action,
                          actions_[i]);
#ifndef NDEBUG
        assert_admissible();
#endif
        if (observer_) {
            observed_state_ = snapshot_state();
            observer_->on_substep(time_, h, observed_state_, pop, actions_);
        }
        double cost_start = 0.0;
        for (size_t i = 0; i < n; ++i)
            cost_start += scn_.running_cost(time_, particles_[i].pos, pop, actions_[i]);

        const double sqrt_h = std::sqrt(h);
        Vec noise(scn_.dim_noise);
        Vec bdrift(scn_.dim_x);
        for (size_t i = 0; i < n; ++i) {
            Particle& p = particles_[i];
            std::fill(bdrift.begin(), bdrift.end(), 0.0);
            scn_.drift(time_, p.pos, pop, actions_[i], bdrift);
            scn_.vol(time_, p.pos, pop, actions_[i], vol_buf_);
            for (int j = 0; j < scn_.dim_noise; ++j) noise[j] = p.brownian.normal();
            for (int r = 0; r < scn_.dim_x; ++r) {
                double diff = 0.0;
                for (int j = 0; j < scn_.dim_noise; ++j) diff += vol_buf_(r, j) * noise[j];
                p.pos[r] += h * bdrift[r] + sqrt_h * diff;
            }
            if (!all_finite(p.pos))
                throw NumericalError("simulate_path: non-finite particle position at t=" +
                                     std::to_string(time_ + h));
        }
        double cost_end = 0.0;
        for (size_t i = 0; i < n; ++i)
            cost_end += scn_.running_cost(time_ + h, particles_[i].pos, pop, actions_[i]);
        running_cost_ += 0.5 * h * (cost_start + cost_end);
        record_.particle_steps += static_cast<long>(n);
        time_ += h;
    }

#ifndef NDEBUG
    void assert_admissible() const {
        if (!pol_.deterministic()) return;
        for (size_t i = 0; i < particles_.size(); ++i)
            for (size_t j = i + 1; j < particles_.size(); ++j)
                if (particles_[i].pos == particles_[j].pos)
                    assert(actions_[i] == actions_[j] &&
                           "feedback policy gave unequal actions at equal positions");
    }
#endif

    // A candidate event fires at time_: choose the particle uniformly, draw
    // its uniform mark on [0, rate_bound], and either thin or branch.
    void apply_candidate_event() {
        const AtomicMeasure pop = snapshot_measure();
        const size_t idx = static_cast<size_t>(clock_.uniform_below(particles_.size()));
        Particle& parent = particles_[idx];
        Vec action;
        pol_.evaluate(time_, parent.pos, pop, scn_.actions, &parent.action, action);
        const double z = parent.mark.uniform() * scn_.bounds.rate_bound;
        const BranchOutcome outcome = offspring_from_mark(scn_, time_, parent.pos, pop, action, z);

        BranchEventRecord ev;
        ev.time = time_;
        ev.parent = parent.label;
        ev.thinned = outcome.thinned;
        ev.offspring = outcome.offspring;
        if (!outcome.thinned) {
            // Children take over the parent's slot; the replacement keeps the
            // particle array sorted because descendants order exactly where
            // their parent did relative to everyone else.
            std::vector<Particle> children;
            children.reserve(outcome.offspring);
            for (int k = 0; k < outcome.offspring; ++k) {
                Label child = parent.label.child(static_cast<uint32_t>(k));
                ev.children.push_back(child);
                children.push_back(make_particle(seed_, std::move(child), parent.pos));
            }
            particles_.erase(particles_.begin() + static_cast<long>(idx));
            particles_.insert(particles_.begin() + static_cast<long>(idx),
                              std::make_move_iterator(children.begin()),
                              std::make_move_iterator(children.end()));
        }
        ev.population_after = population();
        record_.max_population_seen = std::max(record_.max_population_seen, ev.population_after);
        record_.events.push_back(ev);
        if (observer_) observer_->on_event(record_.events.back());
        if (population() > cfg_.max_population) {
            record_.terminal = snapshot_state();
            record_.running_cost = running_cost_;
            throw ExplosionError("simulate_path: population exceeded max_population at t=" +
                                     std::to_string(time_),
                                 std::move(record_));
        }
    }

    const Scenario& scn_;
    const Policy& pol_;
    const SimConfig& cfg_;
    uint64_t seed_;
    PathObserver* observer_;
    rng::Stream clock_;

    std::vector<Particle> particles_;
    std::vector<Vec> actions_;
    Mat vol_buf_;
    PopulationState observed_state_;
    double time_ = 0.0;
    double running_cost_ = 0.0;
    PathRecord record_;
};

}  // namespace

PathRecord simulate_path(const Scenario& scn, const Policy& pol, double start_time,
                         const AtomicMeasure& initial, const SimConfig& cfg, uint64_t master_seed,
                         PathObserver* observer) {
    PathSimulator sim(scn, pol, start_time, initial, cfg, master_seed, observer);
    return sim.run();
}

PopulationState euler_step(const Scenario& scn, const Policy& pol, const PopulationState& state,
                           double h, uint64_t master_seed) {
    if (h <= 0.0) throw std::invalid_argument("euler_step: step must be positive");
    PopulationState out;
    out.time = state.time + h;
    const AtomicMeasure pop = state.measure(scn.dim_x);
    const double sqrt_h = std::sqrt(h);
    Vec action, noise(scn.dim_noise), bdrift(scn.dim_x);
    Mat sig;
    for (const auto& [label, pos] : state.particles) {
        rng::Stream brownian = rng::label_stream(master_seed, label, rng::StreamKind::Brownian);
        rng::Stream action_stream = rng::label_stream(master_seed, label, rng::StreamKind::Action);
        pol.evaluate(state.time, pos, pop, scn.actions, &action_stream, action);
        std::fill(bdrift.begin(), bdrift.end(), 0.0);
        scn.drift(state.time, pos, pop, action, bdrift);
        scn.vol(state.time, pos, pop, action, sig);
        for (int j = 0; j < scn.dim_noise; ++j) noise[j] = brownian.normal();
        Vec next = pos;
        for (int r = 0; r < scn.dim_x; ++r) {
            double diff = 0.0;
            for (int j = 0; j < scn.dim_noise; ++j) diff += sig(r, j) * noise[j];
            next[r] += h * bdrift[r] + sqrt_h * diff;
        }
        if (!all_finite(next)) throw NumericalError("euler_step: non-finite particle position");
        out.particles.emplace_back(label, std::move(next));
    }
    return out;
}

}  // namespace bdlab
