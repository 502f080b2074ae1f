#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace opbench {

using Rng = std::mt19937_64;

/// Seed for one component of a run: FNV-1a of the component name, mixed with
/// the master seed and an index through splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::uint64_t index = 0);

}  // namespace opbench
