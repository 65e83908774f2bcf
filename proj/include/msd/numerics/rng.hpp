// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace msd {

/// Portable seeded generator: SplitMix64 (Steele, Lea & Flood 2014).
///
/// state += 0x9E3779B97F4A7C15, then the output is the state passed through
/// the MurmurHash3-style finalizer with shifts 30/27/31. Only integer
/// arithmetic is involved, so identical seeds give identical streams on
/// every platform. Derived quantities (uniform doubles, normals, bounded
/// integers) are computed with fixed formulas below and never through the
/// standard library's distribution classes, whose output is
/// implementation-defined.
///
/// `split(stream)` derives an independent generator for a sub-task; the
/// child's seed is mix(seed ^ mix(stream)), so it depends only on the
/// parent's seed and the stream id, never on how far the parent has run.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed), state_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n); n must be > 0. Multiply-high reduction.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller (cosine branch only; two draws per call).
    double normal() noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    Rng split(std::uint64_t stream) const noexcept;

    static std::uint64_t mix(std::uint64_t z) noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace msd
