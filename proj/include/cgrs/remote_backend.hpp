// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "cgrs/backend.hpp"

namespace cgrs {

struct RemoteConfig {
  /// e.g. "http://localhost:8000/v1"; requests go to <base_url>/completions.
  std::string base_url;
  std::string api_key;
  std::string model;
  /// Largest top-k the endpoint returns; used for every distribution query.
  int top_k_logprobs = 20;
  bool logit_bias = true;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds retry_backoff{200};
  std::optional<std::string> eos_token;

  /// Reads CGRS_API_BASE (required), CGRS_API_KEY and CGRS_MODEL.
  static RemoteConfig from_env();
};

/// OpenAI-compatible completions client.
///
/// Prompts are sent as token-id arrays so the endpoint sees exactly the
/// local context. Returned token strings are mapped back through the
/// vocabulary (or parsed from "token_id:<n>").
class RemoteBackend final : public ModelBackend {
 public:
  RemoteBackend(RemoteConfig config, Vocabulary vocab);

  const Vocabulary& vocabulary() const override { return vocab_; }
  BackendCapabilities capabilities() const override;
  std::optional<TokenId> eos_token() const override { return eos_; }

  /// One greedy single-token request with top-k log-probs, rebuilt through
  /// reconstruct_distribution.
  TokenDistribution next_distribution(std::span<const TokenId> context) const override;
  CompletionResponse complete(const CompletionRequest& request) const override;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  RemoteConfig config_;
  Vocabulary vocab_;
  std::optional<TokenId> eos_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace cgrs
