#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bdlab/policy.hpp"
#include "bdlab/scenario.hpp"
#include "bdlab/simulate.hpp"

namespace bdlab {

// Scalar C^2 function F with derivatives, used to build compensated
// functionals F(<phi, population>).
struct ScalarFn {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
};

// Bounded C^2 test function on R^d with gradient and Hessian evaluators.
struct TestFn {
    std::string name;
    int dim = 1;
    std::function<double(const Vec&)> value;
    std::function<void(const Vec&, Vec&)> gradient;
    std::function<void(const Vec&, Mat&)> hessian;
};

namespace testfn {
ScalarFn identity();
ScalarFn square();
ScalarFn exp_neg();
ScalarFn scalar_by_name(const std::string& name);
TestFn one(int dim);
TestFn gauss_bump(int dim);
TestFn sigmoid(int dim);  // sigmoid of the first coordinate
TestFn by_name(const std::string& name, int dim);
}  // namespace testfn

struct EstimateResult {
    double mean = 0.0;
    double standard_error = 0.0;
    int replications = 0;
    int failed_replications = 0;  // replications lost to the population cap
    uint64_t seed = 0;
};

// Monte Carlo estimate of the control cost: the running-cost integral plus
// the terminal cost, averaged over independent replications. Replication r
// uses master seed derive_seed(seed, r). Results are independent of the
// thread count.
EstimateResult estimate_cost(const Scenario& scn, const Policy& pol, double start_time,
                             const AtomicMeasure& initial, const SimConfig& cfg, int replications,
                             uint64_t seed, int threads = 1);

// Paired comparison of two policies under common random numbers: replication
// r of both policies uses the same master seed. mean_diff estimates
// J(first) - J(second).
struct PairedCompare {
    EstimateResult first, second;
    double mean_diff = 0.0;
    double se_diff = 0.0;
    int replications = 0;
    uint64_t seed = 0;
};
PairedCompare compare_policies(const Scenario& scn, const Policy& first, const Policy& second,
                               double start_time, const AtomicMeasure& initial,
                               const SimConfig& cfg, int replications, uint64_t seed,
                               int threads = 1);

// Monte Carlo check of the population-moment growth bounds
//   E[sup |V|]   <= <1,initial>   * exp(rate_bound * mean_bound * h)
//   E[sup |V|^2] <= <1,initial>   * exp(rate_bound * (mean_bound + second_bound) * h)
// over h = horizon - start_time, with a 3-SE one-sided allowance.
struct MomentBoundReport {
    EstimateResult sup_mass;
    EstimateResult sup_mass_sq;
    double mass_bound = 0.0;
    double mass_sq_bound = 0.0;
    double slack_se = 3.0;
    bool mass_ok = false;
    bool mass_sq_ok = false;
    bool pass() const { return mass_ok && mass_sq_ok; }
};
MomentBoundReport check_moment_bounds(const Scenario& scn, const Policy& pol, double start_time,
                                      const AtomicMeasure& initial, const SimConfig& cfg,
                                      int replications, uint64_t seed, int threads = 1);

// One checkpoint interval of a drift test.
struct IntervalCheck {
    double start = 0.0;
    double length = 0.0;
    double mean = 0.0;  // mean increment of the compensated process
    double se = 0.0;
    double z = 0.0;  // mean / se (0 when se == 0)
};

struct MartingaleReport {
    std::string scalar_name;
    std::string test_name;
    int replications = 0;
    int failed_replications = 0;
    std::vector<IntervalCheck> intervals;
    double max_abs_z = 0.0;
    // Quadratic-variation identity diagnostics (filled when requested):
    // E[(increment)^2 - integrated variance] per interval, as z-scores.
    std::vector<IntervalCheck> quadratic_variation;
    double max_abs_qv_z = 0.0;

    bool pass(double z_threshold) const { return max_abs_z < z_threshold; }
    bool qv_pass(double z_threshold) const { return max_abs_qv_z < z_threshold; }
};

// Statistical martingale test: simulates an ensemble, forms
//   M_s = F(<phi, X_s>) - integral of the generator applied to (F, phi)
// along each path (the integral accumulated at substep starts, matching the
// explicit scheme), and z-tests the mean increment over each checkpoint
// interval. checkpoints must be increasing within (start, horizon].
// with_quadratic_variation additionally tests
//   E[(M_{s+h}-M_s)^2] = E[integrated carre-du-champ]
// (meaningful for F = identity).
MartingaleReport martingale_test(const Scenario& scn, const Policy& pol, double start_time,
                                 const AtomicMeasure& initial, const SimConfig& cfg,
                                 int replications, const ScalarFn& F, const TestFn& phi,
                                 const std::vector<double>& checkpoints, uint64_t seed,
                                 int threads = 1, bool with_quadratic_variation = false);

// Same test for several (F, phi) pairs on one shared path ensemble; the k-th
// report additionally carries quadratic-variation checks when requested for
// that pair.
struct MartingalePair {
    ScalarFn scalar;
    TestFn testfn;
    bool with_quadratic_variation = false;
};
std::vector<MartingaleReport> martingale_test_multi(
    const Scenario& scn, const Policy& pol, double start_time, const AtomicMeasure& initial,
    const SimConfig& cfg, int replications, const std::vector<MartingalePair>& pairs,
    const std::vector<double>& checkpoints, uint64_t seed, int threads = 1);

// Value field on (time, population) pairs.
using ValueField = std::function<double(double t, const AtomicMeasure& pop)>;

enum class DriftMode { Martingale, Submartingale };

struct ValueDriftReport {
    DriftMode mode = DriftMode::Martingale;
    int replications = 0;
    int failed_replications = 0;
    std::vector<IntervalCheck> intervals;
    double max_abs_z = 0.0;  // martingale mode
    double min_z = 0.0;      // submartingale mode: most negative drift z-score
    double total_drift = 0.0;

    bool pass(double z_threshold) const {
        return mode == DriftMode::Martingale ? max_abs_z < z_threshold : min_z > -z_threshold;
    }
};

// Drift test of the process  w_s(X_s) + running-cost integral up to s.
// Martingale mode requires zero drift on every checkpoint interval;
// submartingale mode requires no significantly negative drift.
ValueDriftReport submartingale_test(const Scenario& scn, const Policy& pol, double start_time,
                                    const AtomicMeasure& initial, const ValueField& value,
                                    const SimConfig& cfg, int replications,
                                    const std::vector<double>& checkpoints, DriftMode mode,
                                    uint64_t seed, int threads = 1);

// Per-replication fan-out helper: evaluates fn(r) for r in [0, n), possibly
// concurrently, storing results by replication index so reductions are
// independent of scheduling.
void run_replications(int n, int threads, const std::function<void(int)>& fn);

}  // namespace bdlab
