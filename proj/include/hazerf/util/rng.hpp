#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace hazerf {

/// splitmix64 finaliser
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based key: a pure function of its arguments, so any stream can be
/// regenerated without carrying generator state around.
constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto p : parts)
        h = mix64(h ^ mix64(p));
    return h;
}

constexpr std::uint64_t hash_name(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Uniform in [0, 1) from a key.
constexpr double uniform01(std::uint64_t key)
{
    return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
}

}  // namespace hazerf
