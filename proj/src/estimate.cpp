#include "bdlab/estimate.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace bdlab {

namespace testfn {

ScalarFn identity() {
    return {"y", [](double y) { return y; }, [](double) { return 1.0; },
            [](double) { return 0.0; }};
}

ScalarFn square() {
    return {"y^2", [](double y) { return y * y; }, [](double y) { return 2.0 * y; },
            [](double) { return 2.0; }};
}

ScalarFn exp_neg() {
    return {"exp(-y)", [](double y) { return std::exp(-y); },
            [](double y) { return -std::exp(-y); }, [](double y) { return std::exp(-y); }};
}

ScalarFn scalar_by_name(const std::string& name) {
    if (name == "y" || name == "identity") return identity();
    if (name == "y^2" || name == "square") return square();
    if (name == "exp(-y)" || name == "exp-neg") return exp_neg();
    throw std::invalid_argument("unknown scalar function: " + name);
}

TestFn one(int dim) {
    TestFn f;
    f.name = "1";
    f.dim = dim;
    f.value = [](const Vec&) { return 1.0; };
    f.gradient = [dim](const Vec&, Vec& g) { g.assign(dim, 0.0); };
    f.hessian = [dim](const Vec&, Mat& h) { h.resize(dim, dim); };
    return f;
}

TestFn gauss_bump(int dim) {
    TestFn f;
    f.name = "bump";
    f.dim = dim;
    f.value = [](const Vec& x) { return std::exp(-0.5 * dot(x, x)); };
    f.gradient = [](const Vec& x, Vec& g) {
        const double v = std::exp(-0.5 * dot(x, x));
        g.resize(x.size());
        for (size_t i = 0; i < x.size(); ++i) g[i] = -x[i] * v;
    };
    f.hessian = [dim](const Vec& x, Mat& h) {
        const double v = std::exp(-0.5 * dot(x, x));
        h.resize(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) h(i, j) = (x[i] * x[j] - (i == j ? 1.0 : 0.0)) * v;
    };
    return f;
}

TestFn sigmoid(int dim) {
    TestFn f;
    f.name = "sigmoid";
    f.dim = dim;
    auto s = [](double u) { return 1.0 / (1.0 + std::exp(-u)); };
    f.value = [s](const Vec& x) { return s(x[0]); };
    f.gradient = [s, dim](const Vec& x, Vec& g) {
        g.assign(dim, 0.0);
        const double v = s(x[0]);
        g[0] = v * (1.0 - v);
    };
    f.hessian = [s, dim](const Vec& x, Mat& h) {
        h.resize(dim, dim);
        const double v = s(x[0]);
        h(0, 0) = v * (1.0 - v) * (1.0 - 2.0 * v);
    };
    return f;
}

TestFn by_name(const std::string& name, int dim) {
    if (name == "1" || name == "one") return one(dim);
    if (name == "bump") return gauss_bump(dim);
    if (name == "sigmoid") return sigmoid(dim);
    throw std::invalid_argument("unknown test function: " + name);
}

}  // namespace testfn

void run_replications(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int r = 0; r < n; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const int workers = std::min(threads, n);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const int r = next.fetch_add(1);
                if (r >= n) return;
                try {
                    fn(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    int count = 0;
};

// Reduction in replication order, so results do not depend on scheduling.
// NaN entries mark failed replications and are skipped.
MeanSe reduce(const std::vector<double>& per_rep) {
    MeanSe out;
    double sum = 0.0;
    int n = 0;
    for (double v : per_rep) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) return out;
    out.count = n;
    out.mean = sum / n;
    double ss = 0.0;
    for (double v : per_rep) {
        if (std::isnan(v)) continue;
        const double d = v - out.mean;
        ss += d * d;
    }
    out.se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (n - 1))) : 0.0;
    return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

EstimateResult estimate_cost(const Scenario& scn, const Policy& pol, double start_time,
                             const AtomicMeasure& initial, const SimConfig& cfg, int replications,
                             uint64_t seed, int threads) {
    if (replications < 2) throw std::invalid_argument("estimate_cost: need at least 2 replications");
    std::vector<double> cost(replications, kNaN);
    run_replications(replications, threads, [&](int r) {
        try {
            const PathRecord rec =
                simulate_path(scn, pol, start_time, initial, cfg, rng::derive_seed(seed, r));
            cost[r] = rec.total_cost;
        } catch (const ExplosionError&) {
            // leave NaN: counted as a failed replication
        }
    });
    const MeanSe ms = reduce(cost);
    if (ms.count < 2)
        throw NumericalError("estimate_cost: fewer than 2 replications survived the population cap");
    EstimateResult out;
    out.mean = ms.mean;
    out.standard_error = ms.se;
    out.replications = ms.count;
    out.failed_replications = replications - ms.count;
    out.seed = seed;
    return out;
}

PairedCompare compare_policies(const Scenario& scn, const Policy& first, const Policy& second,
                               double start_time, const AtomicMeasure& initial,
                               const SimConfig& cfg, int replications, uint64_t seed,
                               int threads) {
    std::vector<double> cost_a(replications, kNaN), cost_b(replications, kNaN);
    run_replications(replications, threads, [&](int r) {
        const uint64_t rep_seed = rng::derive_seed(seed, r);
        try {
            cost_a[r] = simulate_path(scn, first, start_time, initial, cfg, rep_seed).total_cost;
            cost_b[r] = simulate_path(scn, second, start_time, initial, cfg, rep_seed).total_cost;
        } catch (const ExplosionError&) {
            cost_a[r] = kNaN;
            cost_b[r] = kNaN;
        }
    });
    std::vector<double> diff(replications, kNaN);
    for (int r = 0; r < replications; ++r)
        if (!std::isnan(cost_a[r]) && !std::isnan(cost_b[r])) diff[r] = cost_a[r] - cost_b[r];
    const MeanSe a = reduce(cost_a), b = reduce(cost_b), d = reduce(diff);
    if (d.count < 2)
        throw NumericalError("compare_policies: fewer than 2 paired replications survived");
    PairedCompare out;
    out.first = {a.mean, a.se, a.count, replications - a.count, seed};
    out.second = {b.mean, b.se, b.count, replications - b.count, seed};
    out.mean_diff = d.mean;
    out.se_diff = d.se;
    out.replications = d.count;
    out.seed = seed;
    return out;
}

MomentBoundReport check_moment_bounds(const Scenario& scn, const Policy& pol, double start_time,
                                      const AtomicMeasure& initial, const SimConfig& cfg,
                                      int replications, uint64_t seed, int threads) {
    std::vector<double> sup_mass(replications, kNaN), sup_sq(replications, kNaN);
    run_replications(replications, threads, [&](int r) {
        try {
            const PathRecord rec =
                simulate_path(scn, pol, start_time, initial, cfg, rng::derive_seed(seed, r));
            const double m = static_cast<double>(rec.max_population_seen);
            sup_mass[r] = m;
            sup_sq[r] = m * m;
        } catch (const ExplosionError&) {
        }
    });
    const MeanSe m1 = reduce(sup_mass), m2 = reduce(sup_sq);
    const double h = cfg.horizon - start_time;
    const double mass0 = static_cast<double>(initial.total_mass());
    MomentBoundReport rep;
    rep.sup_mass = {m1.mean, m1.se, m1.count, replications - m1.count, seed};
    rep.sup_mass_sq = {m2.mean, m2.se, m2.count, replications - m2.count, seed};
    rep.mass_bound = mass0 * std::exp(scn.bounds.rate_bound * scn.bounds.offspring_mean_bound * h);
    rep.mass_sq_bound =
        mass0 * std::exp(scn.bounds.rate_bound *
                         (scn.bounds.offspring_mean_bound + scn.bounds.offspring_second_bound) * h);
    rep.mass_ok = m1.mean - rep.slack_se * m1.se <= rep.mass_bound;
    rep.mass_sq_ok = m2.mean - rep.slack_se * m2.se <= rep.mass_sq_bound;
    return rep;
}

namespace {

// Generator applied to the compensated functional F(<phi, .>) at one particle:
// drift/diffusion action on phi scaled by F' and F'', plus the branching
// redistribution term.
class GeneratorEvaluator {
  public:
    GeneratorEvaluator(const Scenario& scn, const ScalarFn& F, const TestFn& phi)
        : scn_(scn), F_(F), phi_(phi) {}

    // inner = <phi, pop> precomputed by the caller once per substep.
    double operator()(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a,
                      double inner) {
        const double phix = phi_.value(x);
        phi_.gradient(x, grad_);
        phi_.hessian(x, hess_);
        drift_.assign(scn_.dim_x, 0.0);
        scn_.drift(t, x, pop, a, drift_);
        scn_.vol(t, x, pop, a, vol_);

        double adv = dot(drift_, grad_);
        double trace = 0.0;
        double grad_vol_sq = 0.0;
        for (int j = 0; j < scn_.dim_noise; ++j) {
            double gv = 0.0;
            for (int r = 0; r < scn_.dim_x; ++r) gv += grad_[r] * vol_(r, j);
            grad_vol_sq += gv * gv;
            for (int r = 0; r < scn_.dim_x; ++r)
                for (int c = 0; c < scn_.dim_x; ++c) trace += vol_(r, j) * vol_(c, j) * hess_(r, c);
        }
        const double motion = F_.d1(inner) * (adv + 0.5 * trace) + 0.5 * F_.d2(inner) * grad_vol_sq;

        const double rate = scn_.branch_rate(t, x, pop, a);
        double branch = 0.0;
        if (rate > 0.0) {
            scn_.offspring_probs(t, x, pop, a, probs_);
            double redistributed = 0.0;
            for (size_t k = 0; k < probs_.size(); ++k)
                redistributed +=
                    probs_[k] * F_.f(inner + (static_cast<double>(k) - 1.0) * phix);
            branch = rate * (redistributed - F_.f(inner));
        }
        return motion + branch;
    }

    // Carre-du-champ integrand for the linear compensated process:
    // |vol^T grad phi|^2 + rate * second-moment * phi^2.
    double variance_rate(double t, const Vec& x, const AtomicMeasure& pop, const Vec& a) {
        const double phix = phi_.value(x);
        phi_.gradient(x, grad_);
        scn_.vol(t, x, pop, a, vol_);
        double grad_vol_sq = 0.0;
        for (int j = 0; j < scn_.dim_noise; ++j) {
            double gv = 0.0;
            for (int r = 0; r < scn_.dim_x; ++r) gv += grad_[r] * vol_(r, j);
            grad_vol_sq += gv * gv;
        }
        const double rate = scn_.branch_rate(t, x, pop, a);
        double second = 0.0;
        if (rate > 0.0) {
            scn_.offspring_probs(t, x, pop, a, probs_);
            double m1 = 0.0;
            offspring_moments(probs_, m1, second);
        }
        return grad_vol_sq + rate * second * phix * phix;
    }

  private:
    const Scenario& scn_;
    ScalarFn F_;
    TestFn phi_;
    Vec grad_, drift_;
    Mat hess_, vol_;
    std::vector<double> probs_;
};

// Accumulates the compensator integrals (and optionally the integrated
// variance rates) for several (F, phi) pairs along one path, snapshotting the
// compensated processes at every grid point.
class CompensatorObserver : public PathObserver {
  public:
    CompensatorObserver(const Scenario& scn, const std::vector<MartingalePair>& pairs,
                        size_t n_grid) {
        for (const auto& pair : pairs) {
            slots_.push_back(Slot{GeneratorEvaluator(scn, pair.scalar, pair.testfn), pair.scalar,
                                  pair.testfn, pair.with_quadratic_variation, 0.0, 0.0});
            compensated.emplace_back(n_grid, 0.0);
            integrated_variance.emplace_back(n_grid, 0.0);
        }
    }

    void on_substep(double t, double h, const PopulationState& state, const AtomicMeasure& pop,
                    const std::vector<Vec>& actions) override {
        for (auto& slot : slots_) {
            double inner = 0.0;
            for (const auto& [label, pos] : state.particles) inner += slot.phi.value(pos);
            double total = 0.0;
            double var_rate = 0.0;
            for (size_t i = 0; i < state.particles.size(); ++i) {
                total += slot.gen(t, state.particles[i].second, pop, actions[i], inner);
                if (slot.with_qv)
                    var_rate += slot.gen.variance_rate(t, state.particles[i].second, pop,
                                                       actions[i]);
            }
            slot.compensator += h * total;
            slot.variance_integral += h * var_rate;
        }
    }

    void on_grid_point(size_t index, const PopulationState& state, double) override {
        for (size_t p = 0; p < slots_.size(); ++p) {
            auto& slot = slots_[p];
            double inner = 0.0;
            for (const auto& [label, pos] : state.particles) inner += slot.phi.value(pos);
            compensated[p][index] = slot.scalar.f(inner) - slot.compensator;
            integrated_variance[p][index] = slot.variance_integral;
        }
    }

    std::vector<std::vector<double>> compensated;          // pair x grid
    std::vector<std::vector<double>> integrated_variance;  // pair x grid

  private:
    struct Slot {
        GeneratorEvaluator gen;
        ScalarFn scalar;
        TestFn phi;
        bool with_qv;
        double compensator;
        double variance_integral;
    };
    std::vector<Slot> slots_;
};

std::vector<double> checkpoint_grid(double start_time, const SimConfig& cfg,
                                    const std::vector<double>& checkpoints) {
    std::vector<double> grid;
    grid.push_back(start_time);
    for (double c : checkpoints) {
        if (c <= grid.back())
            throw std::invalid_argument("checkpoints must be strictly increasing after start");
        if (c > cfg.horizon + 1e-12)
            throw std::invalid_argument("checkpoint beyond the horizon");
        grid.push_back(c);
    }
    if (grid.size() < 2) throw std::invalid_argument("at least one checkpoint required");
    return grid;
}

IntervalCheck interval_from_rows(const std::vector<std::vector<double>>& rows, size_t k,
                                 double s, double h) {
    std::vector<double> inc;
    inc.reserve(rows.size());
    for (const auto& row : rows)
        if (!row.empty()) inc.push_back(row[k + 1] - row[k]);
    MeanSe ms = reduce(inc);
    IntervalCheck c;
    c.start = s;
    c.length = h;
    c.mean = ms.mean;
    c.se = ms.se;
    c.z = ms.se > 0.0 ? ms.mean / ms.se : 0.0;
    return c;
}

}  // namespace

std::vector<MartingaleReport> martingale_test_multi(
    const Scenario& scn, const Policy& pol, double start_time, const AtomicMeasure& initial,
    const SimConfig& cfg, int replications, const std::vector<MartingalePair>& pairs,
    const std::vector<double>& checkpoints, uint64_t seed, int threads) {
    const std::vector<double> grid = checkpoint_grid(start_time, cfg, checkpoints);
    SimConfig run_cfg = cfg;
    run_cfg.output_grid = grid;

    // rows[p][r]: compensated-process snapshots of pair p on replication r
    std::vector<std::vector<std::vector<double>>> m_rows(pairs.size()), qv_rows(pairs.size());
    for (size_t p = 0; p < pairs.size(); ++p) {
        m_rows[p].resize(replications);
        qv_rows[p].resize(replications);
    }
    std::atomic<int> failed{0};
    run_replications(replications, threads, [&](int r) {
        CompensatorObserver obs(scn, pairs, grid.size());
        try {
            simulate_path(scn, pol, start_time, initial, run_cfg, rng::derive_seed(seed, r), &obs);
            for (size_t p = 0; p < pairs.size(); ++p) {
                m_rows[p][r] = std::move(obs.compensated[p]);
                qv_rows[p][r] = std::move(obs.integrated_variance[p]);
            }
        } catch (const ExplosionError&) {
            failed.fetch_add(1);
        }
    });

    std::vector<MartingaleReport> reports;
    for (size_t p = 0; p < pairs.size(); ++p) {
        MartingaleReport rep;
        rep.scalar_name = pairs[p].scalar.name;
        rep.test_name = pairs[p].testfn.name;
        rep.replications = replications - failed.load();
        rep.failed_replications = failed.load();
        for (size_t k = 0; k + 1 < grid.size(); ++k) {
            IntervalCheck c = interval_from_rows(m_rows[p], k, grid[k], grid[k + 1] - grid[k]);
            rep.max_abs_z = std::max(rep.max_abs_z, std::abs(c.z));
            rep.intervals.push_back(c);
        }
        if (pairs[p].with_quadratic_variation) {
            // Per path: squared increment of the compensated process minus
            // the integrated variance rate over the same interval; zero mean
            // when the quadratic-variation identity holds.
            for (size_t k = 0; k + 1 < grid.size(); ++k) {
                std::vector<double> delta;
                delta.reserve(replications);
                for (int r = 0; r < replications; ++r) {
                    if (m_rows[p][r].empty()) continue;
                    const double dm = m_rows[p][r][k + 1] - m_rows[p][r][k];
                    const double dv = qv_rows[p][r][k + 1] - qv_rows[p][r][k];
                    delta.push_back(dm * dm - dv);
                }
                MeanSe ms = reduce(delta);
                IntervalCheck c;
                c.start = grid[k];
                c.length = grid[k + 1] - grid[k];
                c.mean = ms.mean;
                c.se = ms.se;
                c.z = ms.se > 0.0 ? ms.mean / ms.se : 0.0;
                rep.max_abs_qv_z = std::max(rep.max_abs_qv_z, std::abs(c.z));
                rep.quadratic_variation.push_back(c);
            }
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

MartingaleReport martingale_test(const Scenario& scn, const Policy& pol, double start_time,
                                 const AtomicMeasure& initial, const SimConfig& cfg,
                                 int replications, const ScalarFn& F, const TestFn& phi,
                                 const std::vector<double>& checkpoints, uint64_t seed,
                                 int threads, bool with_quadratic_variation) {
    std::vector<MartingalePair> pairs{{F, phi, with_quadratic_variation}};
    return martingale_test_multi(scn, pol, start_time, initial, cfg, replications, pairs,
                                 checkpoints, seed, threads)[0];
}

ValueDriftReport submartingale_test(const Scenario& scn, const Policy& pol, double start_time,
                                    const AtomicMeasure& initial, const ValueField& value,
                                    const SimConfig& cfg, int replications,
                                    const std::vector<double>& checkpoints, DriftMode mode,
                                    uint64_t seed, int threads) {
    const std::vector<double> grid = checkpoint_grid(start_time, cfg, checkpoints);
    SimConfig run_cfg = cfg;
    run_cfg.output_grid = grid;

    std::vector<std::vector<double>> rows(replications);
    std::atomic<int> failed{0};
    run_replications(replications, threads, [&](int r) {
        try {
            const PathRecord rec =
                simulate_path(scn, pol, start_time, initial, run_cfg, rng::derive_seed(seed, r));
            std::vector<double> row(grid.size());
            for (size_t k = 0; k < grid.size(); ++k)
                row[k] = value(grid[k], rec.grid_states[k].measure(scn.dim_x)) +
                         rec.grid_running_cost[k];
            rows[r] = std::move(row);
        } catch (const ExplosionError&) {
            failed.fetch_add(1);
        }
    });

    ValueDriftReport rep;
    rep.mode = mode;
    rep.replications = replications - failed.load();
    rep.failed_replications = failed.load();
    rep.min_z = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        IntervalCheck c = interval_from_rows(rows, k, grid[k], grid[k + 1] - grid[k]);
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(c.z));
        rep.min_z = std::min(rep.min_z, c.z);
        rep.total_drift += c.mean;
        rep.intervals.push_back(c);
    }
    return rep;
}

}  // namespace bdlab
