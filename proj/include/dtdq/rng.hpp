#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dtdq {

/// Seedable generator used by every sampling path.
///
/// Uniform doubles are built from the top 53 bits of each draw so that the
/// stream is identical across standard library implementations (the
/// std::uniform_real_distribution algorithm is not pinned by the standard).
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return engine_(); }

    std::uint64_t seed() const { return seed_; }

    /// Independent child stream; children with different ids do not overlap
    /// in practice (distinct seed_seq expansions).
    Rng split(std::uint64_t stream_id) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
        std::uint32_t words[2];
        seq.generate(words, words + 2);
        return Rng((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace dtdq
