// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace densreach {

/// splitmix64 step; used to expand a 64-bit seed into generator state.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// xoshiro256** seeded through splitmix64. All randomness in the library
/// goes through explicit instances of this type, and every distribution
/// transform below is implemented here rather than via <random>, whose
/// distributions are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller (caches the second variate).
    double normal() noexcept;

    /// Independent stream derived from this seed and a stream id.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) noexcept;

  private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace densreach
