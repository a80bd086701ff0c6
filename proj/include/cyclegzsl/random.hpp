#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cyclegzsl/matrix.hpp"

namespace cyclegzsl {

using Rng = std::mt19937_64;

/// Independent stream seed for a named purpose, so adding a consumer of
/// randomness in one stage does not shift the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng &rng);
/// N(0, stddev²) resampled until |x| <= bound_sigmas · stddev.
Matrix truncated_normal(std::size_t rows, std::size_t cols, double stddev, double bound_sigmas,
                        Rng &rng);

/// 64-bit FNV-1a, used for content fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

} // namespace cyclegzsl
