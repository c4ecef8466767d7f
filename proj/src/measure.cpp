#include "bdlab/measure.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace bdlab {

AtomicMeasure AtomicMeasure::embed(int dim, const std::vector<Vec>& points) {
    AtomicMeasure m(dim);
    std::map<Vec, int> merged;
    for (const auto& p : points) {
        if (static_cast<int>(p.size()) != dim)
            throw std::invalid_argument("embed: point dimension mismatch");
        merged[p] += 1;
    }
    for (const auto& [pos, mult] : merged) m.atoms_.push_back({pos, mult});
    return m;
}

void AtomicMeasure::add(const Vec& position, int multiplicity) {
    if (static_cast<int>(position.size()) != dim_)
        throw std::invalid_argument("add: atom dimension mismatch");
    if (multiplicity <= 0) throw std::invalid_argument("add: multiplicity must be positive");
    atoms_.push_back({position, multiplicity});
}

long AtomicMeasure::total_mass() const {
    long m = 0;
    for (const auto& a : atoms_) m += a.multiplicity;
    return m;
}

double AtomicMeasure::integrate(const std::function<double(const Vec&)>& f) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.multiplicity * f(a.position);
    return s;
}

AtomicMeasure AtomicMeasure::merged() const {
    AtomicMeasure out(dim_);
    std::map<Vec, int> acc;
    for (const auto& a : atoms_) acc[a.position] += a.multiplicity;
    for (const auto& [pos, mult] : acc) out.atoms_.push_back({pos, mult});
    return out;
}

double min_cost_assignment(const Mat& cost, std::vector<int>* row_to_col) {
    const int n = cost.rows;
    if (cost.cols != n) throw std::invalid_argument("min_cost_assignment: square matrix required");
    if (n == 0) {
        if (row_to_col) row_to_col->clear();
        return 0.0;
    }
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based Kuhn-Munkres with potentials; p[j] = row matched to column j.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    if (row_to_col) row_to_col->assign(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] == 0) continue;
        total += cost(p[j] - 1, j - 1);
        if (row_to_col) (*row_to_col)[p[j] - 1] = j - 1;
    }
    return total;
}

PaddedMeasure::PaddedMeasure(AtomicMeasure base_measure, long padded_mass, Vec anchor_point)
    : base(std::move(base_measure)), anchor(std::move(anchor_point)) {
    if (static_cast<int>(anchor.size()) != base.dim())
        throw std::invalid_argument("padded measure: anchor dimension mismatch");
    reserve_mass = padded_mass - base.total_mass();
    if (reserve_mass < 0)
        throw std::invalid_argument("padded measure: target mass below the base mass");
}

namespace {

// Unit-atom expansion; nullptr marks a reserve point.
std::vector<const Vec*> expand(const PaddedMeasure& m) {
    std::vector<const Vec*> pts;
    for (const auto& a : m.base.atoms())
        for (int k = 0; k < a.multiplicity; ++k) pts.push_back(&a.position);
    for (long k = 0; k < m.reserve_mass; ++k) pts.push_back(nullptr);
    return pts;
}

double ground_distance(const PaddedMeasure& pm, const Vec* x, const Vec* y) {
    if (x == nullptr && y == nullptr) return 0.0;
    if (x == nullptr) return pm.reserve_distance(*y);
    if (y == nullptr) return pm.reserve_distance(*x);
    return dist2(*x, *y);
}

}  // namespace

double wasserstein_padded(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p,
                          const Vec& anchor, long padded_mass) {
    if (lhs.dim() != rhs.dim())
        throw std::invalid_argument("wasserstein: dimension mismatch");
    if (p != 1 && p != 2) throw std::invalid_argument("wasserstein: order must be 1 or 2");
    const long need = std::max(lhs.total_mass(), rhs.total_mass());
    if (padded_mass < need)
        throw std::invalid_argument("wasserstein: padded mass below both total masses");
    if (padded_mass == 0) return 0.0;

    const PaddedMeasure pa(lhs, padded_mass, anchor);
    const PaddedMeasure pb(rhs, padded_mass, anchor);
    const std::vector<const Vec*> a = expand(pa);
    const std::vector<const Vec*> b = expand(pb);
    Mat cost(static_cast<int>(padded_mass), static_cast<int>(padded_mass));
    for (long i = 0; i < padded_mass; ++i)
        for (long j = 0; j < padded_mass; ++j) {
            const double d = ground_distance(pa, a[i], b[j]);
            cost(static_cast<int>(i), static_cast<int>(j)) = (p == 1) ? d : d * d;
        }
    const double opt = min_cost_assignment(cost);
    return (p == 1) ? opt : std::sqrt(opt);
}

double wasserstein(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p,
                   const Vec& anchor) {
    const long m = std::max(lhs.total_mass(), rhs.total_mass());
    return wasserstein_padded(lhs, rhs, p, anchor, m);
}

double wasserstein(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p) {
    return wasserstein(lhs, rhs, p, Vec(lhs.dim(), 0.0));
}

}  // namespace bdlab
