// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cgrs {

TokenId sample_top_p(std::span<const double> logits, double temperature, double top_p, double u) {
  if (logits.empty()) throw std::invalid_argument("cannot sample from an empty logit vector");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must lie in (0, 1]");
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("uniform draw must lie in [0, 1)");

  double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> weights(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp((logits[i] - max_logit) / temperature);
    total += weights[i];
  }

  std::vector<TokenId> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return weights[a] > weights[b]; });

  std::size_t keep = 0;
  double kept_mass = 0.0;
  while (keep < order.size()) {
    kept_mass += weights[order[keep]];
    ++keep;
    if (kept_mass >= top_p * total) break;
  }

  double target = u * kept_mass;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    cumulative += weights[order[i]];
    if (target < cumulative) return order[i];
  }
  // Only reachable through rounding at the very top of the range.
  for (std::size_t i = keep; i-- > 0;) {
    if (weights[order[i]] > 0.0) return order[i];
  }
  return order.front();
}

TokenId argmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax of an empty vector");
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace cgrs
