// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/remote_backend.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "cgrs/errors.hpp"

namespace cgrs {

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig config;
  const char* base = std::getenv("CGRS_API_BASE");
  if (!base || !*base) throw std::invalid_argument("CGRS_API_BASE is not set");
  config.base_url = base;
  if (const char* key = std::getenv("CGRS_API_KEY")) config.api_key = key;
  if (const char* model = std::getenv("CGRS_MODEL")) config.model = model;
  return config;
}

RemoteBackend::RemoteBackend(RemoteConfig config, Vocabulary vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  if (vocab_.empty()) throw std::invalid_argument("remote backend needs a vocabulary");
  if (config_.top_k_logprobs < 1) throw std::invalid_argument("top_k_logprobs must be at least 1");
  if (config_.eos_token) {
    eos_ = vocab_.find(*config_.eos_token);
    if (!eos_) throw std::invalid_argument("eos token '" + *config_.eos_token + "' not in vocabulary");
  }

  std::string url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base URL needs a scheme: " + url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.compare(0, scheme_end, "https") == 0) {
    throw std::invalid_argument("https endpoints need a build with OpenSSL: " + url);
  }
#endif
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

BackendCapabilities RemoteBackend::capabilities() const {
  return {false, config_.logit_bias, config_.top_k_logprobs};
}

TokenDistribution RemoteBackend::next_distribution(std::span<const TokenId> context) const {
  CompletionRequest request;
  request.model = config_.model;
  request.prompt.assign(context.begin(), context.end());
  request.max_tokens = 1;
  request.temperature = 0.0;
  request.logprobs = config_.top_k_logprobs;
  CompletionResponse response = complete(request);
  if (response.tokens.empty()) {
    if (eos_ && (response.finish_reason == "stop" || response.finish_reason == "eos")) {
      // The endpoint ended the sequence without reporting the token itself.
      return reconstruct_distribution({{*eos_, 0.0}}, vocab_.size());
    }
    throw BackendError("completion response carries no log-probs");
  }

  std::map<TokenId, double> observed;
  std::vector<double> unmapped;
  for (const auto& [id, lp] : response.tokens.front().top_logprobs) {
    if (id >= 0) {
      observed.emplace(id, lp);
    } else {
      unmapped.push_back(lp);
    }
  }
  const auto& chosen = response.tokens.front();
  if (observed.empty() && unmapped.empty() && chosen.id >= 0) observed.emplace(chosen.id, chosen.logprob);
  return reconstruct_distribution(observed, vocab_.size(), unmapped);
}

CompletionResponse RemoteBackend::complete(const CompletionRequest& request) const {
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  CompletionRequest body_request = request;
  if (body_request.model.empty()) body_request.model = config_.model;
  const std::string body = body_request.to_json().dump();
  const std::string path = path_prefix_ + "/completions";

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry_backoff * attempt);

    httplib::Client client(scheme_host_port_);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(seconds);
    client.set_read_timeout(seconds);
    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status) + ": " + result->body;
      continue;
    }
    if (result->status != 200) {
      throw BackendError("HTTP " + std::to_string(result->status) + ": " + result->body);
    }
    try {
      return CompletionResponse::from_json(nlohmann::json::parse(result->body), vocab_);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unparsable completion response: ") + e.what());
    }
  }
  throw BackendError("request to " + scheme_host_port_ + path + " failed after " +
                         std::to_string(config_.max_retries + 1) + " attempts: " + last_error,
                     true);
}

}  // namespace cgrs
