#pragma once

#include <array>
#include <cstdint>

#include "bdlab/genealogy.hpp"

namespace bdlab::rng {

// splitmix64 step; also the basis for key derivation below.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Order-sensitive 64-bit combine.
inline uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t h = splitmix64(s);
    s = h ^ b;
    return splitmix64(s);
}

// Counter-based block cipher core (Philox 4x32, 10 rounds): maps a 64-bit
// key and a 128-bit counter to 128 output bits. Pure function, so any draw
// of any stream is reproducible from (key, position) alone.
struct Philox4x32 {
    static std::array<uint32_t, 4> block(uint64_t key, uint64_t counter_lo, uint64_t counter_hi);
};

// Stream kinds; the kind participates in key derivation so that the streams
// attached to one particle are mutually independent.
enum class StreamKind : uint32_t {
    Brownian = 1,     // diffusion increments
    Poisson = 2,      // event-clock draws
    UniformMark = 3,  // offspring-selection marks
    Action = 4,       // randomized-policy draws
};

// A deterministic random stream: a Philox key plus a position. Copying a
// Stream forks its position; identical keys always yield identical output
// sequences.
class Stream {
  public:
    explicit Stream(uint64_t key) : key_(key) {}

    uint32_t next_u32() {
        if (pos_ == 4) {
            buf_ = Philox4x32::block(key_, block_++, 0);
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // Uniform on (0,1); never returns 0 or 1.
    double uniform() { return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32; }

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal();

    double exponential(double rate);

    // Uniform integer in [0, n).
    uint64_t uniform_below(uint64_t n);

    uint64_t key() const { return key_; }

  private:
    uint64_t key_;
    uint64_t block_ = 0;
    std::array<uint32_t, 4> buf_{};
    int pos_ = 4;
};

// Stream keyed by (master seed, particle label, kind).
Stream label_stream(uint64_t master_seed, const Label& label, StreamKind kind);

// Per-replication master seed from an experiment seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) { return mix(seed, index); }

}  // namespace bdlab::rng
