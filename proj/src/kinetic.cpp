#include "bdlab/kinetic.hpp"

#include <algorithm>
#include <cmath>

#include "bdlab/errors.hpp"
#include "bdlab/io.hpp"
#include "bdlab/rng.hpp"

namespace bdlab::kinetic {

double potential(const Coefficients& co, double x) {
    std::vector<double> probs;
    co.offspring(x, probs);
    double mean = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) mean += static_cast<double>(k) * probs[k];
    return co.rate(x) * (mean - 1.0);
}

namespace {

// Solves the tridiagonal system (diag, off) h = rhs where the matrix is
// symmetric with constant off-diagonal except the Neumann rows use 2*off.
void thomas_solve(double diag, double off, double off_boundary, std::vector<double>& rhs,
                  std::vector<double>& scratch) {
    const size_t n = rhs.size();
    scratch.resize(n);
    // forward sweep
    double beta = diag;
    scratch[0] = off_boundary / beta;
    rhs[0] /= beta;
    for (size_t i = 1; i < n; ++i) {
        const double upper = (i == n - 1) ? 0.0 : off;
        const double lower = (i == n - 1) ? off_boundary : off;
        beta = diag - lower * scratch[i - 1];
        scratch[i] = upper / beta;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / beta;
    }
    for (size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

}  // namespace

Solution solve_hjb(const Coefficients& co, const Grid& grid) {
    if (grid.nx < 3) throw ConfigError("kinetic: need at least 3 space nodes");
    if (grid.nt < 1) throw ConfigError("kinetic: need at least 1 time step");
    if (!(grid.x_max > grid.x_min)) throw ConfigError("kinetic: empty space domain");
    if (!(co.horizon > 0.0)) throw ConfigError("kinetic: horizon must be positive");

    const int nx = grid.nx;
    const double dx = (grid.x_max - grid.x_min) / static_cast<double>(nx - 1);
    const double dt = co.horizon / static_cast<double>(grid.nt);
    const double alpha = 0.5 * dt / (dx * dx);

    std::vector<double> x(nx);
    for (int i = 0; i < nx; ++i) x[i] = grid.x_min + dx * i;
    std::vector<double> phi(nx);
    for (int i = 0; i < nx; ++i) phi[i] = potential(co, x[i]);

    Solution sol;
    sol.grid = grid;
    sol.horizon = co.horizon;

    const int stride = std::max(1, (grid.nt + grid.max_stored_slices - 1) /
                                       std::max(1, grid.max_stored_slices - 1));
    auto store = [&](int step_index, const std::vector<double>& slice) {
        sol.times.push_back(co.horizon * static_cast<double>(step_index) / grid.nt);
        sol.h.push_back(slice);
        std::vector<double> d(nx);
        d[0] = 0.0;  // Neumann mirror
        d[nx - 1] = 0.0;
        for (int i = 1; i + 1 < nx; ++i) d[i] = (slice[i + 1] - slice[i - 1]) / (2.0 * dx);
        sol.slope.push_back(std::move(d));
    };

    std::vector<double> cur(nx), rhs(nx), scratch(nx), grad(nx);
    for (int i = 0; i < nx; ++i) cur[i] = co.terminal(x[i]);
    store(grid.nt, cur);

    for (int j = grid.nt - 1; j >= 0; --j) {
        const double t_known = co.horizon * static_cast<double>(j + 1) / grid.nt;
        grad[0] = 0.0;
        grad[nx - 1] = 0.0;
        for (int i = 1; i + 1 < nx; ++i) grad[i] = (cur[i + 1] - cur[i - 1]) / (2.0 * dx);

        double speed = 0.0;
        for (int i = 0; i < nx; ++i)
            speed = std::max(speed, std::abs(co.drift(t_known, x[i])) + std::abs(grad[i]));
        if (dt * speed / dx > 1.0)
            throw NumericalError("kinetic: advective stability limit exceeded (speed " +
                                 std::to_string(speed) + ")");

        for (int i = 0; i < nx; ++i) {
            const double explicit_part = co.drift(t_known, x[i]) * grad[i] -
                                         0.5 * grad[i] * grad[i] + phi[i] * cur[i];
            rhs[i] = cur[i] + dt * explicit_part;
        }
        thomas_solve(1.0 + 2.0 * alpha, -alpha, -2.0 * alpha, rhs, scratch);
        cur = rhs;
        for (double v : cur)
            if (!std::isfinite(v)) throw NumericalError("kinetic: non-finite grid value");
        if (j == 0 || j % stride == 0) store(j, cur);
    }

    std::reverse(sol.times.begin(), sol.times.end());
    std::reverse(sol.h.begin(), sol.h.end());
    std::reverse(sol.slope.begin(), sol.slope.end());
    return sol;
}

namespace {

double interp_slices(const Solution& sol, const std::vector<std::vector<double>>& field, double t,
                     double x) {
    const double xc = std::clamp(x, sol.grid.x_min, sol.grid.x_max);
    const double dx = (sol.grid.x_max - sol.grid.x_min) / static_cast<double>(sol.grid.nx - 1);
    const double sx = (xc - sol.grid.x_min) / dx;
    const int i0 = std::min(static_cast<int>(sx), sol.grid.nx - 2);
    const double wx = sx - i0;

    const double tc = std::clamp(t, sol.times.front(), sol.times.back());
    const auto it = std::upper_bound(sol.times.begin(), sol.times.end(), tc);
    const size_t j1 = std::min(static_cast<size_t>(it - sol.times.begin()), sol.times.size() - 1);
    const size_t j0 = j1 == 0 ? 0 : j1 - 1;
    const double span = sol.times[j1] - sol.times[j0];
    const double wt = span > 0.0 ? (tc - sol.times[j0]) / span : 0.0;

    const double lo = (1.0 - wx) * field[j0][i0] + wx * field[j0][i0 + 1];
    const double hi = (1.0 - wx) * field[j1][i0] + wx * field[j1][i0 + 1];
    return (1.0 - wt) * lo + wt * hi;
}

}  // namespace

double Solution::value(double t, double x) const { return interp_slices(*this, h, t, x); }

double Solution::gradient(double t, double x) const { return interp_slices(*this, slope, t, x); }

McValue smoothing_oracle(const std::function<double(double)>& terminal, double tau, double x,
                         int samples, uint64_t seed) {
    if (samples < 2) throw std::invalid_argument("smoothing_oracle: need at least 2 samples");
    rng::Stream stream(seed);
    const double s = std::sqrt(std::max(tau, 0.0));
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double v = std::exp(-terminal(x + s * stream.normal()));
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / samples;
    const double var = std::max(0.0, (sum_sq - samples * mean * mean) / (samples - 1.0));
    const double se_mean = std::sqrt(var / samples);
    McValue out;
    out.value = -std::log(mean);
    out.se = se_mean / mean;
    return out;
}

Policy optimal_policy(std::shared_ptr<const Solution> sol) {
    return Policy::feedback(
        1,
        [sol](double t, const Vec& x, const AtomicMeasure&, Vec& out) {
            out[0] = -sol->gradient(t, x[0]);
        },
        "kinetic-optimal");
}

Scenario scenario(const Coefficients& co) {
    Scenario scn;
    scn.dim_x = 1;
    scn.dim_noise = 1;
    scn.dim_action = 1;
    scn.actions = ActionSet::all(1);
    scn.max_offspring = co.max_offspring;
    scn.convex_actions = true;
    scn.convex_note = "additive control in the drift, branching action-independent, "
                      "kinetic running cost";

    auto drift = co.drift;
    scn.drift = [drift](double t, const Vec& x, const AtomicMeasure&, const Vec& a, Vec& out) {
        out[0] = drift(t, x[0]) + a[0];
    };
    scn.vol = [](double, const Vec&, const AtomicMeasure&, const Vec&, Mat& out) {
        out.resize(1, 1);
        out(0, 0) = 1.0;
    };
    auto rate = co.rate;
    scn.branch_rate = [rate](double, const Vec& x, const AtomicMeasure&, const Vec&) {
        return rate(x[0]);
    };
    auto offspring = co.offspring;
    scn.offspring_probs = [offspring](double, const Vec& x, const AtomicMeasure&, const Vec&,
                                      std::vector<double>& out) { offspring(x[0], out); };
    scn.running_cost = [](double, const Vec&, const AtomicMeasure&, const Vec& a) {
        return 0.5 * dot(a, a);
    };
    auto terminal = co.terminal;
    scn.terminal_cost = [terminal](const AtomicMeasure& pop) {
        return pop.integrate([&](const Vec& y) { return terminal(y[0]); });
    };

    scn.bounds.drift_growth = std::max(co.drift_bound, 1.0);
    scn.bounds.vol_bound = 1.0;
    scn.bounds.rate_bound = co.rate_bound;
    scn.bounds.offspring_mean_bound = co.offspring_mean_bound;
    scn.bounds.offspring_second_bound = co.offspring_second_bound;
    scn.bounds.cost_growth = std::max(0.5, co.terminal_bound);
    scn.bounds.control_coercivity = 0.5;
    return scn;
}

ValueField value_field(std::shared_ptr<const Solution> sol) {
    return [sol](double t, const AtomicMeasure& pop) {
        return pop.integrate([&](const Vec& y) { return sol->value(t, y[0]); });
    };
}

void write_csv(const Solution& sol, std::ostream& os) {
    io::write_csv_row(os, {"t", "x", "h", "slope"});
    const double dx = (sol.grid.x_max - sol.grid.x_min) / static_cast<double>(sol.grid.nx - 1);
    for (size_t j = 0; j < sol.times.size(); ++j)
        for (int i = 0; i < sol.grid.nx; ++i)
            io::write_csv_row(os, {io::g17(sol.times[j]), io::g17(sol.grid.x_min + dx * i),
                                   io::g17(sol.h[j][i]), io::g17(sol.slope[j][i])});
}

}  // namespace bdlab::kinetic
