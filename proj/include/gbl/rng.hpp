#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gbl {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a stream name
/// (FNV-1a of the name mixed through splitmix64). Adding a new named stream
/// never changes the draws of an existing one.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

/// Seed for a per-round stream; rounds are indexed from 1.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

inline Rng make_rng(std::uint64_t base, std::string_view stream) {
    return Rng(derive_seed(base, stream));
}

} // namespace gbl
