#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dswarm {

namespace detail {

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream. A stream is a key derived from a master seed
/// and a path of child indices; draw `d` of a stream is a pure function of
/// (key, d), so results never depend on evaluation order or thread schedule.
///
///     RngStream root(seed);
///     double r = root.child(iteration).child(particle).uniform(draw);
class RngStream {
public:
    constexpr explicit RngStream(std::uint64_t master_seed = 0) noexcept
        : key_(detail::mix64(master_seed ^ 0x44535741524D0001ULL)) {}

    constexpr RngStream child(std::uint64_t index) const noexcept {
        RngStream s;
        s.key_ = detail::mix64(key_ ^ detail::mix64(index ^ 0xC6A4A7935BD1E995ULL));
        return s;
    }

    constexpr std::uint64_t bits(std::uint64_t draw) const noexcept {
        return detail::mix64(key_ ^ detail::mix64(draw + 0x2545F4914F6CDD1DULL));
    }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform(std::uint64_t draw) const noexcept {
        return static_cast<double>(bits(draw) >> 11) * 0x1.0p-53;
    }

    std::uint64_t key() const noexcept { return key_; }

    // Sequential convenience: consumes draws 0, 1, 2, ... of this stream.
    double next_uniform() noexcept { return uniform(cursor_++); }

    /// Standard normal via Box-Muller; consumes two draws.
    double next_normal() noexcept {
        const double u1 = 1.0 - next_uniform();  // (0, 1]
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) by rejection on the top bits; n > 0.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            const std::uint64_t b = bits(cursor_++);
            if (b < limit) return b % n;
        }
    }

    std::uint64_t cursor() const noexcept { return cursor_; }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::uint64_t key_ = 0;
    std::uint64_t cursor_ = 0;
};

// Top-level stream domains. Keeping them fixed lets the adversarial data swarm
// replay exactly the draws of a plain data-swarm run.
namespace stream {
inline constexpr std::uint64_t kVelocity = 1;
inline constexpr std::uint64_t kSampling = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kModelVelocity = 4;
inline constexpr std::uint64_t kJoint = 5;
inline constexpr std::uint64_t kHeldOut = 6;
inline constexpr std::uint64_t kGrid = 7;
inline constexpr std::uint64_t kCluster = 8;
inline constexpr std::uint64_t kPrompts = 9;
inline constexpr std::uint64_t kSeedData = 10;
}  // namespace stream

}  // namespace dswarm
