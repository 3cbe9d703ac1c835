#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <cstddef>

namespace crband {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Hierarchical stream key: a seed refined by role tags and indices, e.g.
/// StreamKey(seed).with("wb").with(b). Distinct paths give unrelated streams.
class StreamKey {
public:
    constexpr explicit StreamKey(std::uint64_t seed) noexcept : key_(detail::mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    constexpr StreamKey with(std::string_view tag) const noexcept
    {
        return StreamKey(Raw{}, detail::mix64(key_ ^ detail::mix64(detail::fnv1a(tag) + 0x3c6ef372fe94f82bULL)));
    }

    constexpr StreamKey with(std::uint64_t index) const noexcept
    {
        return StreamKey(Raw{}, detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * (index + 1) + 0xa54ff53a5f1d36f1ULL));
    }

    constexpr std::uint64_t value() const noexcept { return key_; }

private:
    struct Raw {};
    constexpr StreamKey(Raw, std::uint64_t k) noexcept : key_(k) {}
    std::uint64_t key_;
};

/// Counter-based generator: the k-th output is a bijective mix of (key, k),
/// so a stream is fully determined by its key and never shares state.
/// Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(StreamKey key) noexcept : key_(key.value()) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        ++counter_;
        return detail::mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on the open interval (0,1).
    double uniform() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal()
    {
        return normal_(*this);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n)
    {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this);
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Stream make_stream(StreamKey key) { return Stream(key); }

} // namespace crband
