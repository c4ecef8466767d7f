#include <doctest.h>

#include <cmath>

#include "bdlab/rng.hpp"

using namespace bdlab;
using namespace bdlab::rng;

TEST_CASE("identical keys give identical streams") {
    const Label lbl = Label::root().child(3).child(1);
    Stream a = label_stream(42, lbl, StreamKind::Brownian);
    Stream b = label_stream(42, lbl, StreamKind::Brownian);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
}

TEST_CASE("distinct labels give distinct streams") {
    Stream a = label_stream(42, Label::root().child(0), StreamKind::Brownian);
    Stream b = label_stream(42, Label::root().child(1), StreamKind::Brownian);
    bool differs = false;
    for (int i = 0; i < 4 && !differs; ++i) differs = a.next_u32() != b.next_u32();
    CHECK(differs);
}

TEST_CASE("streams of different kinds under one label are uncorrelated") {
    const Label lbl = Label::root().child(2);
    Stream a = label_stream(7, lbl, StreamKind::Brownian);
    Stream b = label_stream(7, lbl, StreamKind::Poisson);
    const int n = 10000;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.uniform();
        const double y = b.uniform();
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double var_a = saa / n - (sa / n) * (sa / n);
    const double var_b = sbb / n - (sb / n) * (sb / n);
    const double r = cov / std::sqrt(var_a * var_b);
    CHECK(std::abs(r) < 0.05);
}

TEST_CASE("uniforms are in (0,1) and roughly uniform") {
    Stream s(123);
    const int n = 20000;
    int buckets[10] = {0};
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        buckets[static_cast<int>(u * 10.0)]++;
    }
    // chi-square with 9 dof; 33.7 is the 1e-4 tail
    double chi2 = 0.0;
    for (int b = 0; b < 10; ++b) {
        const double d = buckets[b] - n / 10.0;
        chi2 += d * d / (n / 10.0);
    }
    CHECK(chi2 < 33.7);
}

TEST_CASE("normal draws have unit variance") {
    Stream s(99);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("exponential draws match the requested rate") {
    Stream s(5);
    const int n = 100000;
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += s.exponential(2.5);
    CHECK(sum / n == doctest::Approx(1.0 / 2.5).epsilon(0.02));
}

TEST_CASE("uniform_below covers the range") {
    Stream s(11);
    int counts[7] = {0};
    for (int i = 0; i < 7000; ++i) counts[s.uniform_below(7)]++;
    for (int k = 0; k < 7; ++k) CHECK(counts[k] > 800);
}

TEST_CASE("derived replication seeds differ") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
}

TEST_CASE("block function known answers") {
    // Reference vectors for the 10-round 4x32 keyed counter function with
    // zero key/counter and with the all-ones pattern.
    const auto zero = Philox4x32::block(0, 0, 0);
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);
    const auto ones = Philox4x32::block(~0ULL, ~0ULL, ~0ULL);
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);
}
