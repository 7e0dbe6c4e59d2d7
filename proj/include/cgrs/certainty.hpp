// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cgrs/lexicon.hpp"

namespace cgrs {

inline constexpr double kNormalizationTolerance = 1e-6;

/// Next-token probabilities for one decoding step.
///
/// Dense distributions have one entry per vocabulary id. Distributions
/// rebuilt from a top-k log-prob listing are sparse: `outcome_ids` names the
/// observed ids and, when `has_residual` is set, the final entry is the
/// unobserved mass lumped into a single synthetic outcome.
struct TokenDistribution {
  std::vector<double> probs;
  bool log_space_available = false;
  std::vector<TokenId> outcome_ids;
  bool has_residual = false;

  bool dense() const noexcept { return outcome_ids.empty() && !has_residual; }
  std::size_t outcomes() const noexcept { return probs.size(); }

  /// Token id of outcome `i`, or -1 for the residual bucket.
  TokenId id_of(std::size_t i) const;
  /// Most probable real token (ties: lowest id). Never the residual.
  TokenId argmax() const;
  /// Probability of `id` (0 if unobserved in a sparse distribution).
  double prob(TokenId id) const;

  /// Throws std::invalid_argument when entries are negative, not finite,
  /// or do not sum to one within kNormalizationTolerance.
  void validate() const;

  static TokenDistribution from_logits(std::span<const double> logits);
};

struct CertaintyScore {
  double value = 0.0;         // 1 - mean_entropy / ln|V|
  double mean_entropy = 0.0;  // nats
  std::size_t n_tokens = 0;
  /// Some distribution came from a truncated top-k listing, so mean_entropy
  /// is a lower bound and value an upper bound.
  bool truncated = false;
};

/// -sum p log p with 0 log 0 = 0, in units of `log_base` (nats by default).
double token_entropy(const TokenDistribution& dist, double log_base = std::numbers::e);

/// Normalized certainty of a probed answer from its per-token distributions.
/// Entropies and the ln|V| normalizer share `log_base`, which therefore cancels.
CertaintyScore certainty_score(std::span<const TokenDistribution> dists, std::size_t vocab_size,
                               double log_base = std::numbers::e);

}  // namespace cgrs
