// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace cgrs {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, counter), so independent consumers never perturb each other.

enum class RngStream : std::uint64_t {
  kSuppression = 0x5u,
  kSampling = 0x9u,
  kSeedDerivation = 0xdu,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, RngStream stream,
                                     std::uint64_t counter) noexcept {
  return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(stream))) ^ counter);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, RngStream stream,
                                 std::uint64_t counter) noexcept {
  return static_cast<double>(counter_hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Derives a child seed, e.g. one per (repetition seed, problem index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return counter_hash(seed, RngStream::kSeedDerivation, index);
}

}  // namespace cgrs
