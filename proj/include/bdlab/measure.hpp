#pragma once

#include <functional>
#include <vector>

#include "bdlab/linalg.hpp"

namespace bdlab {

// Finite sum of integer-weighted point masses on R^d. Zero atoms is the zero
// measure. Values are immutable in spirit: nothing here mutates after
// construction except the builder calls add()/embed().
class AtomicMeasure {
  public:
    struct Atom {
        Vec position;
        int multiplicity;
    };

    explicit AtomicMeasure(int dim) : dim_(dim) {}

    // Sum of unit masses at the given points; bit-equal positions merge.
    static AtomicMeasure embed(int dim, const std::vector<Vec>& points);

    // Appends an atom (no merging; integrals do not depend on the partition).
    void add(const Vec& position, int multiplicity = 1);

    int dim() const { return dim_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    long total_mass() const;
    bool is_zero() const { return atoms_.empty(); }

    double integrate(const std::function<double(const Vec&)>& f) const;

    // Equivalent measure with bit-equal positions merged.
    AtomicMeasure merged() const;

  private:
    int dim_;
    std::vector<Atom> atoms_;
};

// A measure padded to a target integer mass with copies of a reserve point
// that sits at distance |x - anchor| + 1 from every x in R^d and at distance
// 0 from itself.
struct PaddedMeasure {
    AtomicMeasure base;
    long reserve_mass = 0;
    Vec anchor;

    PaddedMeasure(AtomicMeasure base_measure, long padded_mass, Vec anchor_point);

    long total_mass() const { return base.total_mass() + reserve_mass; }
    double reserve_distance(const Vec& x) const { return dist2(x, anchor) + 1.0; }
};

// Transport distance between atomic measures of possibly different total
// mass. Both sides are padded to a common integer mass with reserve points,
// then an exact minimum-cost perfect assignment on unit atoms is solved with
// ground cost d(.,.)^p. Returns the p-th root of the optimal cost. Supported
// orders: p = 1, 2. The anchor defaults to the origin.
double wasserstein(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p,
                   const Vec& anchor);
double wasserstein(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p);

// Same, with an explicit padded mass m >= max(total masses). The result does
// not depend on m; exposed for that very check.
double wasserstein_padded(const AtomicMeasure& lhs, const AtomicMeasure& rhs, int p,
                          const Vec& anchor, long padded_mass);

// Exact minimum-cost perfect assignment (shortest augmenting paths with
// potentials, O(n^3)). cost is square; returns the optimal total cost and,
// if row_to_col is non-null, the matched column of each row.
double min_cost_assignment(const Mat& cost, std::vector<int>* row_to_col = nullptr);

}  // namespace bdlab
