#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spoofsim {

/// Seeded random stream used by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. All variate transforms are implemented here rather than through
/// std::*_distribution so that streams are bit-identical across standard
/// library implementations. Each variate consumes a documented number of
/// engine draws:
///   uniform(), exponential(), normal()  -> exactly one draw
///   below(n)                            -> one or more (rejection)
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed);
    explicit RandomStream(std::seed_seq& seq);

    /// Raw 64-bit engine output.
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given mean (inverse-CDF).
    double exponential(double mean);

    /// Standard normal (inverse-CDF).
    double normal();

    /// Uniform integer in [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// Stable 64-bit FNV-1a hash of a purpose tag.
std::uint64_t hash_tag(std::string_view tag);

/// Derives an independent stream for (master seed, purpose tag, index).
///
/// The (seed, tag, index) triple is expanded through std::seed_seq, so
/// distinct triples give unrelated engine states and equal triples give the
/// identical stream regardless of call order or thread.
RandomStream rng_substream(std::uint64_t master_seed, std::string_view tag, std::uint64_t index = 0);

}  // namespace spoofsim
