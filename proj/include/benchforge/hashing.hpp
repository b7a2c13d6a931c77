#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <initializer_list>

namespace benchforge {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Stable 64-bit stream seed derived from a run seed and a list of labels.
/// Independent of thread scheduling and of std library implementation.
std::uint64_t derive_seed(std::uint64_t run_seed, std::initializer_list<std::string_view> labels);

/// Uniform integer in [0, n) using rejection sampling on raw mt19937_64 output,
/// so results are identical across standard library implementations.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// Uniform real in [0, 1) built from the top 53 bits of one draw.
double uniform_unit(std::mt19937_64& rng);

}  // namespace benchforge
