// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "cgrs/lexicon.hpp"

namespace cgrs {

/// Temperature + nucleus sampling driven by an externally supplied uniform
/// draw `u` in [0, 1), so the caller owns the randomness.
///
/// Candidates are ordered by probability (ties: lower id first) and the
/// smallest prefix whose mass reaches `top_p` is kept and renormalized.
TokenId sample_top_p(std::span<const double> logits, double temperature, double top_p, double u);

/// Index of the largest logit; ties resolve to the lowest id.
TokenId argmax(std::span<const double> logits);

}  // namespace cgrs
