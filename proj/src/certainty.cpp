// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/certainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cgrs {

TokenId TokenDistribution::id_of(std::size_t i) const {
  if (i >= probs.size()) throw std::invalid_argument("outcome index out of range");
  if (dense()) return static_cast<TokenId>(i);
  if (has_residual && i + 1 == probs.size()) return -1;
  return outcome_ids.at(i);
}

TokenId TokenDistribution::argmax() const {
  TokenId best = -1;
  double best_p = -1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    TokenId id = id_of(i);
    if (id < 0) continue;
    if (probs[i] > best_p || (probs[i] == best_p && id < best)) {
      best = id;
      best_p = probs[i];
    }
  }
  if (best < 0) throw std::invalid_argument("distribution has no real token outcome");
  return best;
}

double TokenDistribution::prob(TokenId id) const {
  if (dense()) {
    if (id < 0 || static_cast<std::size_t>(id) >= probs.size()) return 0.0;
    return probs[static_cast<std::size_t>(id)];
  }
  for (std::size_t i = 0; i < outcome_ids.size(); ++i) {
    if (outcome_ids[i] == id) return probs[i];
  }
  return 0.0;
}

void TokenDistribution::validate() const {
  if (probs.empty()) throw std::invalid_argument("distribution is empty");
  if (!dense() && outcome_ids.size() + (has_residual ? 1 : 0) != probs.size()) {
    throw std::invalid_argument("sparse distribution ids do not match its outcomes");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("distribution entry " + std::to_string(p) + " is not a probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw std::invalid_argument("distribution sums to " + std::to_string(sum) + ", not 1");
  }
}

TokenDistribution TokenDistribution::from_logits(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logit vector");
  double max_logit = *std::max_element(logits.begin(), logits.end());
  TokenDistribution dist;
  dist.log_space_available = true;
  dist.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dist.probs[i] = std::exp(logits[i] - max_logit);
    sum += dist.probs[i];
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

double token_entropy(const TokenDistribution& dist, double log_base) {
  dist.validate();
  if (!(log_base > 1.0)) throw std::invalid_argument("log base must exceed 1");
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  // Rounding can push a near-one-hot entropy slightly negative.
  h = std::max(h, 0.0);
  return h / std::log(log_base);
}

CertaintyScore certainty_score(std::span<const TokenDistribution> dists, std::size_t vocab_size,
                               double log_base) {
  if (dists.empty()) throw std::invalid_argument("certainty_score needs at least one distribution");
  if (vocab_size < 2) throw std::invalid_argument("certainty_score needs vocab_size >= 2");

  CertaintyScore score;
  score.n_tokens = dists.size();
  double total = 0.0;
  for (const auto& dist : dists) {
    if (dist.dense() && dist.probs.size() != vocab_size) {
      throw std::invalid_argument("distribution length " + std::to_string(dist.probs.size()) +
                                  " does not match vocab size " + std::to_string(vocab_size));
    }
    if (!dist.dense() && dist.probs.size() > vocab_size + 1) {
      throw std::invalid_argument("sparse distribution has more outcomes than the vocabulary");
    }
    score.truncated = score.truncated || dist.has_residual;
    total += token_entropy(dist, log_base);
  }
  double mean = total / static_cast<double>(dists.size());
  double max_entropy = std::log(static_cast<double>(vocab_size)) / std::log(log_base);
  score.value = std::clamp(1.0 - mean / max_entropy, 0.0, 1.0);
  score.mean_entropy = mean * std::log(log_base);
  return score;
}

}  // namespace cgrs
