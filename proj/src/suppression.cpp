// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cgrs/rng.hpp"

namespace cgrs {

LogitVector::LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    if (!std::isfinite(logits_[i])) {
      throw std::invalid_argument("logit " + std::to_string(i) + " is not finite");
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double suppression_probability(double certainty, double delta) {
  if (!(certainty >= 0.0 && certainty <= 1.0)) {
    throw std::invalid_argument("certainty must lie in [0, 1]");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in [0, 1]");
  if (delta == 1.0) {
    throw std::invalid_argument("delta = 1 is degenerate; disable suppression instead");
  }
  if (certainty <= delta) return 0.0;
  return std::min(1.0, (certainty - delta) / (1.0 - delta));
}

LogitVector mask_triggers(const LogitVector& logits, const TriggerTokenSet& triggers,
                          const MaskOptions& options) {
  if (triggers.empty()) return logits;
  if (triggers.max_id() >= static_cast<TokenId>(logits.size()) || *triggers.ids().begin() < 0) {
    throw std::invalid_argument("trigger id outside logit vector of length " +
                                std::to_string(logits.size()));
  }
  if (triggers.size() == logits.size() && !options.allow_full_mask) {
    throw std::invalid_argument("trigger set covers the entire vocabulary");
  }
  std::vector<double> out(logits.values().begin(), logits.values().end());
  for (TokenId id : triggers.ids()) out[static_cast<std::size_t>(id)] = options.neg_value;
  return LogitVector(std::move(out));
}

SuppressionState SuppressionState::certainty_guided(double delta, std::uint64_t seed) {
  SuppressionState state;
  state.delta = delta;
  state.rng_seed = seed;
  state.validate();
  return state;
}

SuppressionState SuppressionState::fixed_probability(double p, std::uint64_t seed) {
  SuppressionState state;
  state.p = p;
  state.fixed = true;
  state.rng_seed = seed;
  state.validate();
  return state;
}

void SuppressionState::update(const CertaintyScore& certainty) {
  last_certainty = certainty;
  if (!fixed) p = suppression_probability(certainty.value, delta);
}

void SuppressionState::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("suppression probability outside [0, 1]");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  if (!fixed && !last_certainty && p != 0.0) {
    throw std::invalid_argument("p must be 0 before any certainty has been observed");
  }
}

std::pair<bool, SuppressionState> should_suppress(SuppressionState state) {
  double u = counter_uniform(state.rng_seed, RngStream::kSuppression, state.rng_stream_position);
  ++state.rng_stream_position;
  return {u < state.p, state};
}

}  // namespace cgrs
