#include "bdlab/rng.hpp"

#include <cmath>

namespace bdlab::rng {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<uint32_t, 4>& ctr, uint32_t k0, uint32_t k1) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

}  // namespace

std::array<uint32_t, 4> Philox4x32::block(uint64_t key, uint64_t counter_lo, uint64_t counter_hi) {
    std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(counter_lo), static_cast<uint32_t>(counter_lo >> 32),
        static_cast<uint32_t>(counter_hi), static_cast<uint32_t>(counter_hi >> 32)};
    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    for (int r = 0; r < 10; ++r) {
        round_once(ctr, k0, k1);
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return ctr;
}

double Stream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Stream::exponential(double rate) { return -std::log(uniform()) / rate; }

uint64_t Stream::uniform_below(uint64_t n) {
    // 53-bit uniform scaled to n; bias is below 2^-40 for the population
    // sizes handled here.
    const uint64_t hi = next_u32();
    const uint64_t lo = next_u32();
    const double u = (static_cast<double>((hi << 21) ^ (lo >> 11)) + 0.5) * 0x1p-53;
    uint64_t k = static_cast<uint64_t>(u * static_cast<double>(n));
    return k >= n ? n - 1 : k;
}

Stream label_stream(uint64_t master_seed, const Label& label, StreamKind kind) {
    return Stream(mix(mix(master_seed, label.hash64()), static_cast<uint64_t>(kind)));
}

}  // namespace bdlab::rng
