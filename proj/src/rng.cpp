#include "spoofsim/rng.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

namespace spoofsim {

RandomStream::RandomStream(std::uint64_t seed) : engine_(seed) {}

RandomStream::RandomStream(std::seed_seq& seq) : engine_(seq) {}

double RandomStream::uniform() {
    // 53 random mantissa bits, shifted half a step off zero so log() and the
    // normal quantile are always finite.
    constexpr double kStep = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(engine_() >> 11) + 0.5) * kStep;
}

double RandomStream::exponential(double mean) { return -mean * std::log(uniform()); }

double RandomStream::normal() {
    const double u = uniform();
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

std::uint64_t RandomStream::below(std::uint64_t n) {
    // Lemire-style rejection on the top of the range to stay unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

RandomStream rng_substream(std::uint64_t master_seed, std::string_view tag, std::uint64_t index) {
    const std::uint64_t th = hash_tag(tag);
    std::array<std::uint32_t, 6> words{
        static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(th),          static_cast<std::uint32_t>(th >> 32),
        static_cast<std::uint32_t>(index),       static_cast<std::uint32_t>(index >> 32),
    };
    std::seed_seq seq(words.begin(), words.end());
    return RandomStream(seq);
}

}  // namespace spoofsim
