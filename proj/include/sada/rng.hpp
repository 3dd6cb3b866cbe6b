// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "sada/common.hpp"

namespace sada {

/// Deterministic, serializable PRNG (xoshiro256**, splitmix64-seeded).
/// Used everywhere instead of <random> engines so that runs are bit-identical
/// across platforms and rng state can be checkpointed as four words.
class Rng {
  public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the full state
        std::uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            w = z ^ (z >> 31);
        }
        draws_ = 0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        ++draws_;
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw ContractError("uniform_index: n must be positive");
        // modulo bias is < 2^-40 for any n we use; acceptable and deterministic
        return next_u64() % n;
    }

    /// Uniform integer in [lo, hi] inclusive.
    long long uniform_int(long long lo, long long hi) {
        if (hi < lo) throw ContractError("uniform_int: empty range");
        return lo + static_cast<long long>(uniform_index(std::uint64_t(hi - lo + 1)));
    }

    /// Standard normal via Box-Muller. Stateless apart from the counter
    /// (no cached spare) so serialization stays a plain word copy.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t draw_count() const { return draws_; }

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s, std::uint64_t draws) {
        s_ = s;
        draws_ = draws;
    }

    std::string describe() const {
        std::ostringstream os;
        os << std::hex << s_[0] << ":" << s_[1] << ":" << s_[2] << ":" << s_[3]
           << std::dec << " draws=" << draws_;
        return os.str();
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_{};
    std::uint64_t draws_ = 0;
};

/// Named rng streams derived from one master seed. Keeping the streams
/// separate is what makes recipe comparisons meaningful: e.g. consuming
/// strong-augmentation draws never perturbs action sampling.
struct RngStreams {
    Rng env;           // environment episode seeds / dynamics
    Rng weak;          // weak (pad-and-shift) augmentation draws
    Rng strong;        // strong augmentation draws, online path
    Rng strong_target; // strong augmentation draws, target path (naive mode only)
    Rng actor_noise;   // reparameterized action noise in actor updates
    Rng target_noise;  // action noise for Q-target bootstrapping
    Rng buffer;        // replay sampling
    Rng init;          // network parameter initialization
    Rng explore;       // uniform exploration actions

    explicit RngStreams(std::uint64_t master_seed = 1) { reseed(master_seed); }

    void reseed(std::uint64_t master_seed) {
        env.reseed(mix(master_seed, 0xe17));
        weak.reseed(mix(master_seed, 0x3ea));
        strong.reseed(mix(master_seed, 0x57f));
        strong_target.reseed(mix(master_seed, 0x57e));
        actor_noise.reseed(mix(master_seed, 0xac7));
        target_noise.reseed(mix(master_seed, 0x7a9));
        buffer.reseed(mix(master_seed, 0xbff));
        init.reseed(mix(master_seed, 0x171));
        explore.reseed(mix(master_seed, 0xe8b));
    }

  private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

}  // namespace sada
