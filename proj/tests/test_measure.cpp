#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/measure.hpp"
#include "bdlab/rng.hpp"
#include "oracles.hpp"

using namespace bdlab;

TEST_CASE("embedding point lists") {
    const AtomicMeasure empty = AtomicMeasure::embed(1, {});
    CHECK(empty.total_mass() == 0);
    CHECK(empty.is_zero());

    const AtomicMeasure doubled = AtomicMeasure::embed(1, {{0.0}, {0.0}});
    CHECK(doubled.total_mass() == 2);
    CHECK(doubled.atoms().size() == 1);
    CHECK(doubled.atoms()[0].multiplicity == 2);

    const AtomicMeasure pair = AtomicMeasure::embed(1, {{1.0}, {-1.0}});
    CHECK(pair.total_mass() == 2);
    CHECK(pair.integrate([](const Vec& x) { return std::abs(x[0]); }) == doctest::Approx(2.0));

    CHECK_THROWS_AS(AtomicMeasure::embed(2, {{1.0}}), std::invalid_argument);
}

TEST_CASE("integration against test functions") {
    AtomicMeasure m(1);
    m.add({0.0});
    m.add({1.0});
    CHECK(m.integrate([](const Vec&) { return 1.0; }) == doctest::Approx(2.0));

    const AtomicMeasure zero(1);
    CHECK(zero.integrate([](const Vec&) { return 123.0; }) == 0.0);

    AtomicMeasure two_at_three(1);
    two_at_three.add({3.0}, 2);
    CHECK(two_at_three.integrate([](const Vec& x) { return x[0] * x[0]; }) ==
          doctest::Approx(18.0));
}

TEST_CASE("integration is partition-free") {
    rng::Stream stream(31);
    for (int round = 0; round < 20; ++round) {
        AtomicMeasure split(2);
        AtomicMeasure merged(2);
        for (int a = 0; a < 4; ++a) {
            Vec pos{stream.normal(), stream.normal()};
            const int mult = 1 + static_cast<int>(stream.uniform_below(3));
            merged.add(pos, mult);
            for (int k = 0; k < mult; ++k) split.add(pos, 1);
        }
        auto f = [](const Vec& x) { return std::sin(x[0]) + x[1] * x[1]; };
        CHECK(split.integrate(f) == doctest::Approx(merged.integrate(f)).epsilon(1e-12));
        CHECK(split.merged().atoms().size() <= split.atoms().size());
        CHECK(split.merged().integrate(f) == doctest::Approx(merged.integrate(f)).epsilon(1e-12));
    }
}

TEST_CASE("transport distance basics") {
    const Vec origin{0.0};
    const AtomicMeasure d0 = AtomicMeasure::embed(1, {{0.0}});
    const AtomicMeasure d1 = AtomicMeasure::embed(1, {{1.0}});
    CHECK(wasserstein(d0, d0, 1, origin) == doctest::Approx(0.0));
    CHECK(wasserstein(d0, d1, 1, origin) == doctest::Approx(1.0));

    // unequal masses: the surplus atom pays the reserve-point fare
    const AtomicMeasure d01 = AtomicMeasure::embed(1, {{0.0}, {1.0}});
    CHECK(wasserstein(d01, d0, 1, origin) == doctest::Approx(2.0));

    AtomicMeasure d2(2);
    d2.add({0.0, 0.0});
    CHECK_THROWS_AS(wasserstein(d0, d2, 1, origin), std::invalid_argument);
    CHECK_THROWS_AS(wasserstein(d0, d1, 3, origin), std::invalid_argument);

    // the anchor defaults to the origin
    CHECK(wasserstein(d01, d0, 1) == doctest::Approx(2.0));
}

TEST_CASE("padding bookkeeping") {
    const AtomicMeasure base = AtomicMeasure::embed(1, {{2.0}, {-1.0}});
    const PaddedMeasure padded(base, 5, {0.5});
    CHECK(padded.reserve_mass == 3);
    CHECK(padded.total_mass() == 5);
    CHECK(padded.reserve_distance({2.0}) == doctest::Approx(2.5));
    CHECK_THROWS_AS(PaddedMeasure(base, 1, {0.5}), std::invalid_argument);
}

namespace {

AtomicMeasure random_measure(rng::Stream& stream, int dim, int max_atoms) {
    AtomicMeasure m(dim);
    const int n = static_cast<int>(stream.uniform_below(max_atoms + 1));
    for (int i = 0; i < n; ++i) {
        Vec pos(dim);
        for (auto& v : pos) v = 2.0 * stream.normal();
        m.add(pos);
    }
    return m;
}

}  // namespace

TEST_CASE("assignment solver agrees with exhaustive search") {
    rng::Stream stream(2718);
    const Vec anchor{0.0, 0.0};
    for (int round = 0; round < 40; ++round) {
        const AtomicMeasure a = random_measure(stream, 2, 5);
        const AtomicMeasure b = random_measure(stream, 2, 5);
        const int p = 1 + static_cast<int>(stream.uniform_below(2));
        const long m = std::max(a.total_mass(), b.total_mass());
        const double fast = wasserstein(a, b, p, anchor);
        const double slow = test_oracles::brute_force_distance(a, b, p, anchor, m);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
    }
}

TEST_CASE("padding mass does not change the distance") {
    rng::Stream stream(99);
    const Vec anchor{0.5};
    for (int round = 0; round < 30; ++round) {
        const AtomicMeasure a = random_measure(stream, 1, 6);
        const AtomicMeasure b = random_measure(stream, 1, 6);
        const long m = std::max(a.total_mass(), b.total_mass());
        for (int p : {1, 2}) {
            const double base = wasserstein_padded(a, b, p, anchor, m);
            const double padded = wasserstein_padded(a, b, p, anchor, m + 1);
            const double padded3 = wasserstein_padded(a, b, p, anchor, m + 3);
            CHECK(std::abs(base - padded) < 1e-9);
            CHECK(std::abs(base - padded3) < 1e-9);
        }
    }
}

TEST_CASE("point-list embedding is 1-Lipschitz into the distance") {
    rng::Stream stream(555);
    for (int round = 0; round < 30; ++round) {
        const int n = 1 + static_cast<int>(stream.uniform_below(5));
        std::vector<Vec> xs, ys;
        double l1 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = stream.normal(), y = stream.normal();
            xs.push_back({x});
            ys.push_back({y});
            l1 += std::abs(x - y);
        }
        const double d = wasserstein(AtomicMeasure::embed(1, xs), AtomicMeasure::embed(1, ys), 1,
                                     {0.0});
        CHECK(d <= l1 + 1e-9);
    }
}

TEST_CASE("metric axioms on equal-mass instances") {
    rng::Stream stream(4242);
    const Vec anchor{0.0};
    for (int round = 0; round < 25; ++round) {
        const int n = 1 + static_cast<int>(stream.uniform_below(4));
        auto fixed_mass = [&](int count) {
            AtomicMeasure m(1);
            for (int i = 0; i < count; ++i) m.add({stream.normal() * 3.0});
            return m;
        };
        const AtomicMeasure a = fixed_mass(n), b = fixed_mass(n), c = fixed_mass(n);
        for (int p : {1, 2}) {
            const double ab = wasserstein(a, b, p, anchor);
            const double ba = wasserstein(b, a, p, anchor);
            const double ac = wasserstein(a, c, p, anchor);
            const double cb = wasserstein(c, b, p, anchor);
            CHECK(ab >= 0.0);
            CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
            CHECK(ab <= ac + cb + 1e-9);
        }
    }
}
