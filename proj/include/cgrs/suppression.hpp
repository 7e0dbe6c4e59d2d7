// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cgrs/certainty.hpp"
#include "cgrs/lexicon.hpp"

namespace cgrs {

/// Logit value for masked tokens. Underflows to zero probability after
/// softmax in single and double precision without producing NaN.
inline constexpr double kDefaultMaskValue = -1e9;

/// Pre-softmax scores for one decoding step. All entries finite.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> logits);

  std::span<const double> values() const noexcept { return logits_; }
  std::size_t size() const noexcept { return logits_.size(); }
  double operator[](std::size_t i) const { return logits_[i]; }

  bool operator==(const LogitVector&) const = default;

 private:
  std::vector<double> logits_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// max(0, (C - delta) / (1 - delta)). Requires C in [0,1] and delta in [0,1).
double suppression_probability(double certainty, double delta);

struct MaskOptions {
  double neg_value = kDefaultMaskValue;
  /// Masking every position leaves nothing to sample; rejected unless set.
  bool allow_full_mask = false;
};

/// Copy of `logits` with every trigger position set to `options.neg_value`.
LogitVector mask_triggers(const LogitVector& logits, const TriggerTokenSet& triggers,
                          const MaskOptions& options = {});

/// Suppression probability and the Bernoulli draw stream for one generation.
struct SuppressionState {
  double p = 0.0;
  double delta = 0.9;
  std::optional<CertaintyScore> last_certainty;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream_position = 0;
  /// Ablation mode: p is pinned and never driven by certainty.
  bool fixed = false;

  static SuppressionState certainty_guided(double delta, std::uint64_t seed);
  static SuppressionState fixed_probability(double p, std::uint64_t seed);

  /// Recomputes p from a new certainty score.
  void update(const CertaintyScore& certainty);
  void validate() const;
};

/// Draws r ~ Bernoulli(state.p) at the state's stream position and
/// advances the position by one.
std::pair<bool, SuppressionState> should_suppress(SuppressionState state);

}  // namespace cgrs
