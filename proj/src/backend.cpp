// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/backend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cgrs/errors.hpp"

namespace cgrs {

nlohmann::json CompletionRequest::to_json() const {
  nlohmann::json j = {
      {"prompt", prompt},
      {"max_tokens", max_tokens},
      {"temperature", temperature},
      {"top_p", top_p},
  };
  if (!model.empty()) j["model"] = model;
  if (logprobs) j["logprobs"] = *logprobs;
  if (!logit_bias.empty()) {
    nlohmann::json bias = nlohmann::json::object();
    for (const auto& [id, value] : logit_bias) bias[std::to_string(id)] = value;
    j["logit_bias"] = std::move(bias);
  }
  if (!stop.empty()) j["stop"] = stop;
  if (seed) j["seed"] = *seed;
  return j;
}

CompletionRequest CompletionRequest::from_json(const nlohmann::json& j) {
  CompletionRequest request;
  request.model = j.value("model", std::string{});
  request.prompt = j.at("prompt").get<std::vector<TokenId>>();
  request.max_tokens = j.value("max_tokens", 16);
  request.temperature = j.value("temperature", 1.0);
  request.top_p = j.value("top_p", 1.0);
  if (j.contains("logprobs") && !j["logprobs"].is_null()) request.logprobs = j["logprobs"].get<int>();
  if (j.contains("logit_bias")) {
    for (const auto& [key, value] : j["logit_bias"].items()) {
      request.logit_bias[std::stoi(key)] = static_cast<int>(std::lround(value.get<double>()));
    }
  }
  if (j.contains("stop")) {
    if (j["stop"].is_string()) {
      request.stop.push_back(j["stop"].get<std::string>());
    } else {
      request.stop = j["stop"].get<std::vector<std::string>>();
    }
  }
  if (j.contains("seed") && !j["seed"].is_null()) request.seed = j["seed"].get<std::uint64_t>();
  return request;
}

namespace {

TokenId lookup_token(const std::string& text, const Vocabulary& vocab) {
  constexpr std::string_view kPrefix = "token_id:";
  if (text.rfind(kPrefix, 0) == 0) {
    TokenId id = std::stoi(text.substr(kPrefix.size()));
    return vocab.contains(id) ? id : -1;
  }
  return vocab.find(text).value_or(-1);
}

}  // namespace

CompletionResponse CompletionResponse::from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  try {
    const auto& choice = j.at("choices").at(0);
    CompletionResponse response;
    response.text = choice.value("text", std::string{});
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
      response.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return response;

    const auto& lp = choice["logprobs"];
    const auto& tokens = lp.at("tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      CompletionToken token;
      token.text = tokens[i].get<std::string>();
      token.id = lookup_token(token.text, vocab);
      if (lp.contains("token_logprobs") && !lp["token_logprobs"][i].is_null()) {
        token.logprob = lp["token_logprobs"][i].get<double>();
      }
      if (lp.contains("top_logprobs") && i < lp["top_logprobs"].size() &&
          lp["top_logprobs"][i].is_object()) {
        for (const auto& [alt, value] : lp["top_logprobs"][i].items()) {
          token.top_logprobs.emplace_back(lookup_token(alt, vocab), value.get<double>());
        }
      }
      response.tokens.push_back(std::move(token));
    }
    return response;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

std::vector<TokenId> ModelBackend::tokenize(std::string_view text) const {
  const Vocabulary& vocab = vocabulary();
  std::size_t longest = 0;
  for (const auto& token : vocab.tokens()) longest = std::max(longest, token.size());
  auto eos = eos_token();

  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::optional<TokenId> match;
    std::size_t match_len = 0;
    for (std::size_t len = std::min(longest, text.size() - pos); len > 0; --len) {
      auto id = vocab.find(text.substr(pos, len));
      if (id && id != eos) {
        match = id;
        match_len = len;
        break;
      }
    }
    if (!match) {
      throw std::invalid_argument("text is not tokenizable at offset " + std::to_string(pos) + ": '" +
                                  std::string(text.substr(pos, 16)) + "'");
    }
    ids.push_back(*match);
    pos += match_len;
  }
  return ids;
}

std::string ModelBackend::detokenize(std::span<const TokenId> tokens) const {
  std::string text;
  for (TokenId token : tokens) text += token_text(token);
  return text;
}

std::string ModelBackend::token_text(TokenId token) const {
  if (token == eos_token()) return {};
  return vocabulary().token(token);
}

LogitVector ModelBackend::next_logits(std::span<const TokenId> context) const {
  TokenDistribution dist = next_distribution(context);
  if (!dist.dense()) {
    throw UnsupportedOperation("backend does not expose a full next-token distribution");
  }
  std::vector<double> logits(dist.probs.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = dist.probs[i] > 0.0 ? std::max(std::log(dist.probs[i]), kZeroProbabilityLogit)
                                    : kZeroProbabilityLogit;
  }
  return LogitVector(std::move(logits));
}

CompletionResponse ModelBackend::complete(const CompletionRequest&) const {
  throw UnsupportedOperation("backend does not support server-side completion");
}

TokenDistribution reconstruct_distribution(const std::map<TokenId, double>& top_k_logprobs,
                                           std::size_t vocab_size, std::span<const double> unmapped) {
  if (top_k_logprobs.empty() && unmapped.empty()) {
    throw std::invalid_argument("reconstruct_distribution needs at least one log-prob");
  }
  if (vocab_size == 0) throw std::invalid_argument("vocab_size must be positive");

  TokenDistribution dist;
  dist.has_residual = true;
  double observed = 0.0;
  auto add = [&](TokenId id, double lp) {
    if (!std::isfinite(lp) && !(lp < 0.0)) throw std::invalid_argument("log-prob is not finite");
    double p = std::isfinite(lp) ? std::exp(lp) : 0.0;
    dist.outcome_ids.push_back(id);
    dist.probs.push_back(p);
    observed += p;
  };
  for (const auto& [id, lp] : top_k_logprobs) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(id) + " outside vocabulary");
    }
    add(id, lp);
  }
  for (double lp : unmapped) add(-1, lp);

  if (observed > 1.0 + 1e-3) {
    throw std::invalid_argument("top-k probabilities sum to " + std::to_string(observed) + " > 1");
  }
  double residual = 1.0 - observed;
  if (residual <= kResidualRoundingTolerance) {
    for (double& p : dist.probs) p /= observed;
    residual = 0.0;
  }
  dist.probs.push_back(residual);
  return dist;
}

CompletionRequest apply_remote_suppression(CompletionRequest request, const TriggerTokenSet& triggers,
                                           const BackendCapabilities& capabilities) {
  if (!capabilities.logit_bias) {
    throw UnsupportedOperation("backend does not support logit_bias");
  }
  for (TokenId id : triggers.ids()) request.logit_bias[id] = kMaxNegativeLogitBias;
  return request;
}

}  // namespace cgrs
