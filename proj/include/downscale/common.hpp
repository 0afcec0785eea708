#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace downscale {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy shared across the library. Everything derives from
// std::runtime_error so callers can catch coarsely or precisely.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct AlignmentError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IngestionError : Error {
    using Error::Error;
};
struct SamplingError : Error {
    using Error::Error;
};
struct DependencyError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};

template <typename E = Error>
[[noreturn]] inline void fail(const std::string& msg) {
    throw E(msg);
}

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// FNV-1a over bytes; used for config hashes and frozen-weight guards.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace downscale
