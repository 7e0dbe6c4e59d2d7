// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Deterministic toy language model.
 *
 * The model is a finite state machine driven by the token context: starting
 * from `start`, each context token either follows an outgoing edge of the
 * current state or leaves the state unchanged. The emission rule of the
 * final state is chosen by the longest rule suffix that matches the end of
 * the context (the state's default rule when none matches).
 *
 * next_distribution is therefore a pure function of the context and every
 * expected value the tests use can be derived from the spec tables alone.
 */

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgrs/backend.hpp"

namespace cgrs {

/// "Emit `script`, except emit `trigger` with probability q."
struct ScriptedEmission {
  TokenId script = 0;
  TokenId trigger = 0;
  double q = 0.0;
};

struct EmissionRule {
  std::vector<TokenId> suffix;
  std::map<TokenId, double> dist;
  /// Set when the rule was written in scripted form; `dist` is derived from it.
  std::optional<ScriptedEmission> scripted;

  static EmissionRule fixed(std::vector<TokenId> suffix, std::map<TokenId, double> dist);
  static EmissionRule script(std::vector<TokenId> suffix, ScriptedEmission emission);
};

struct ToyState {
  std::string name;
  EmissionRule emit;
  std::vector<EmissionRule> rules;
  std::map<TokenId, std::string> next;
};

struct ToyModelSpec {
  Vocabulary vocab;
  TokenId eos = 0;
  std::string start;
  std::vector<ToyState> states;

  /// Throws std::invalid_argument on unknown tokens or states, invalid
  /// distributions, or states unreachable from `start`.
  void validate() const;
  const ToyState& state(const std::string& name) const;

  static ToyModelSpec from_json(const nlohmann::json& j);
  static ToyModelSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

class ToyBackend final : public ModelBackend {
 public:
  explicit ToyBackend(ToyModelSpec spec);

  const Vocabulary& vocabulary() const override { return spec_.vocab; }
  BackendCapabilities capabilities() const override { return {true, false, std::nullopt}; }
  std::optional<TokenId> eos_token() const override { return spec_.eos; }
  TokenDistribution next_distribution(std::span<const TokenId> context) const override;

  const ToyModelSpec& spec() const noexcept { return spec_; }
  /// State reached after replaying `context` from the start state.
  const ToyState& state_after(std::span<const TokenId> context) const;
  const EmissionRule& rule_for(std::span<const TokenId> context) const;

 private:
  ToyModelSpec spec_;
  std::map<std::string, std::size_t> index_;
};

/// Vocabulary entries of the bundled overthinking model.
namespace toy_tokens {
inline constexpr const char* kEos = "<eos>";
inline constexpr const char* kQuestion = "<q>";
inline constexpr const char* kBreak = "\n\n";
inline constexpr const char* kStep = " step";
inline constexpr const char* kSo = " so";
inline constexpr const char* kWait = "Wait";
inline constexpr const char* kBut = " But";
inline constexpr const char* kHmm = "Hmm";
inline constexpr const char* kAlternatively = "Alternatively";
inline constexpr const char* kCheck = " check";
inline constexpr const char* kThinkEnd = "</think>";
inline constexpr const char* kBoxedOpen = "\\boxed{";
inline constexpr const char* kAnswer = "42";
inline constexpr const char* kWrongAnswer = "41";
inline constexpr const char* kClose = "}";
inline constexpr const char* kProbe = "**Final Answer: \\boxed";
inline constexpr const char* kLowerWait = " wait";
inline constexpr const char* kNewline = "\n";
}  // namespace toy_tokens

/**
 * The overthinking model used throughout the tests and benchmarks.
 *
 *   work    -- reasoning; " so" moves to found. Probes here are unsure (42|41 at 50/50).
 *   found   -- emits "\n\n" and moves to loop.
 *   loop    -- emits "</think>" (to conclude) or, with probability q, "Wait" (to reflect).
 *   reflect -- re-checks; "\n\n" returns to loop.
 *   conclude-- emits "\boxed{", "42", "}", <eos>.
 *
 * From found onwards probes answer 42 with probability 0.97.
 */
ToyModelSpec make_overthinking_spec(double q = 0.3);

}  // namespace cgrs
