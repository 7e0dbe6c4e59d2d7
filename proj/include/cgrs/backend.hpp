// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Model backend abstraction.
 *
 * A backend answers "what is the next-token distribution given this token
 * context?". Full-distribution backends (the toy model) expose logits so
 * masking and sampling happen locally. Remote OpenAI-compatible endpoints
 * only expose top-k log-probs and sample server side; masking is then
 * carried by the request's logit_bias field.
 *
 * Contexts are plain token sequences held by value, so forking is a copy
 * and a fork can never disturb the context it was taken from.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgrs/certainty.hpp"
#include "cgrs/lexicon.hpp"
#include "cgrs/suppression.hpp"

namespace cgrs {

struct BackendCapabilities {
  bool full_distribution = true;
  bool logit_bias = false;
  std::optional<int> top_k_logprobs;
};

/// Token context of one decoding stream.
class Context {
 public:
  Context() = default;
  explicit Context(std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {}

  Context fork() const { return *this; }
  void append(TokenId token) { tokens_.push_back(token); }
  void append(std::span<const TokenId> tokens) { tokens_.insert(tokens_.end(), tokens.begin(), tokens.end()); }

  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

 private:
  std::vector<TokenId> tokens_;
};

/// Endpoint-domain limit of the OpenAI logit_bias field.
inline constexpr int kMaxNegativeLogitBias = -100;

/// Request body of an OpenAI-compatible /completions call.
struct CompletionRequest {
  std::string model;
  std::vector<TokenId> prompt;
  int max_tokens = 1;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> logprobs;
  std::map<TokenId, int> logit_bias;
  std::vector<std::string> stop;
  std::optional<std::uint64_t> seed;

  nlohmann::json to_json() const;
  static CompletionRequest from_json(const nlohmann::json& j);
};

struct CompletionToken {
  TokenId id = -1;  // -1 when the text has no vocabulary entry
  std::string text;
  double logprob = 0.0;
  /// Top-k alternatives; ids of -1 are alternatives without a vocabulary entry.
  std::vector<std::pair<TokenId, double>> top_logprobs;
};

struct CompletionResponse {
  std::string text;
  std::vector<CompletionToken> tokens;
  std::string finish_reason;

  /// Parses choices[0]. Token strings of the form "token_id:<n>" are taken
  /// as ids directly; anything else is looked up in `vocab`.
  static CompletionResponse from_json(const nlohmann::json& j, const Vocabulary& vocab);
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  virtual BackendCapabilities capabilities() const = 0;
  virtual std::optional<TokenId> eos_token() const = 0;

  /// Greedy longest-match over the vocabulary. Throws std::invalid_argument
  /// when some part of `text` matches no token.
  virtual std::vector<TokenId> tokenize(std::string_view text) const;
  /// Concatenated token surfaces; end-of-sequence renders as nothing.
  virtual std::string detokenize(std::span<const TokenId> tokens) const;
  std::string token_text(TokenId token) const;

  virtual TokenDistribution next_distribution(std::span<const TokenId> context) const = 0;
  /// Defaults to log-probabilities with zero-probability entries floored at
  /// kZeroProbabilityLogit.
  virtual LogitVector next_logits(std::span<const TokenId> context) const;
  /// Server-side sampling. Only remote backends implement it.
  virtual CompletionResponse complete(const CompletionRequest& request) const;

  Context fork(const Context& context) const { return context.fork(); }

  static constexpr double kZeroProbabilityLogit = -1e4;
};

/// Rebuilds a distribution from a top-k log-prob listing: the k observed
/// outcomes plus one residual outcome holding 1 - sum(exp(lp)).
/// `unmapped` carries listed alternatives that have no vocabulary id.
TokenDistribution reconstruct_distribution(const std::map<TokenId, double>& top_k_logprobs,
                                           std::size_t vocab_size,
                                           std::span<const double> unmapped = {});

/// Residual mass at or below this is treated as rounding noise in the listing.
inline constexpr double kResidualRoundingTolerance = 1e-5;

/// Adds bias -100 for every trigger id. Throws UnsupportedOperation when the
/// backend cannot honor logit_bias.
CompletionRequest apply_remote_suppression(CompletionRequest request, const TriggerTokenSet& triggers,
                                           const BackendCapabilities& capabilities);

}  // namespace cgrs
