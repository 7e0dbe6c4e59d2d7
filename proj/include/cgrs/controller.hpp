// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Certainty-guided decode loop.
 *
 * Each step draws r ~ Bernoulli(p), masks the trigger tokens when r is set,
 * and samples the next token with temperature and nucleus filtering. When
 * the decoded text completes a checkpoint marker, a probe forks the context
 * (including the token just sampled), appends the probe prompt, greedily
 * decodes a tentative answer and turns its entropy into a certainty score;
 * that score sets p for the following steps.
 *
 * Randomness is counter based and keyed by (seed, step), with separate
 * streams for the Bernoulli draw and the token draw. A step where r = 0
 * therefore samples exactly the token an unmodified sampler would.
 */

#include <cstddef>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cgrs/backend.hpp"
#include "cgrs/certainty.hpp"
#include "cgrs/lexicon.hpp"
#include "cgrs/suppression.hpp"

namespace cgrs {

struct GenerationConfig {
  double temperature = 0.6;
  double top_p = 0.95;
  double delta = 0.9;
  std::size_t max_tokens = 4096;
  std::string checkpoint_marker = "\n\n";
  std::string probe_prompt = "**Final Answer: \\boxed";
  std::size_t probe_max_tokens = 32;
  std::vector<std::string> probe_stop_strings = {"}", "\n"};
  std::size_t min_tokens_between_probes = 0;
  bool suppression_enabled = true;
  /// Ablation: pin p to this value and skip probing entirely.
  std::optional<double> fixed_p;
  std::uint64_t seed = 0;
  /// Keep decoding with the previous p while a probe runs on another thread.
  bool async_probe = false;
  /// Stop suppressing once `think_end_marker` has been emitted.
  bool restrict_to_thinking = false;
  std::string think_end_marker = "</think>";
  double mask_value = kDefaultMaskValue;
  /// Reject-and-resample budget for endpoints without logit_bias.
  int max_resample_attempts = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static GenerationConfig from_json(const nlohmann::json& j);
};

enum class ProbeStopReason { kStopString, kMaxTokens, kEos };
std::string_view to_string(ProbeStopReason reason);

struct ProbeResult {
  std::vector<TokenId> answer_tokens;
  std::string answer_text;
  std::vector<TokenDistribution> distributions;
  /// Per-token entropies read back from a saved trace, where the
  /// distributions themselves are not kept.
  std::vector<double> saved_entropies;
  CertaintyScore certainty;
  ProbeStopReason stop_reason = ProbeStopReason::kMaxTokens;

  std::vector<double> token_entropies() const;
};

struct CheckpointEvent {
  std::size_t step = 0;
  ProbeResult probe;
  double p = 0.0;
};

struct SuppressionDecision {
  std::size_t step = 0;
  bool r = false;
  double p = 0.0;
};

struct ProbeFailure {
  std::size_t step = 0;
  std::string message;
};

/// Logged when masking had to fall back to reject-and-resample.
struct SoftSuppression {
  std::size_t step = 0;
  int attempts = 0;
  bool trigger_emitted = false;
};

struct DecodeTrace {
  std::string prompt;
  std::vector<TokenId> prompt_tokens;
  std::vector<TokenId> tokens;
  std::string text;
  std::vector<CheckpointEvent> checkpoint_events;
  std::vector<SuppressionDecision> suppression_decisions;
  std::vector<ProbeFailure> probe_failures;
  std::vector<SoftSuppression> soft_suppressions;
  std::size_t token_count = 0;
  bool truncated = false;
  GenerationConfig config;

  /// Distributions are summarized as per-token entropies.
  nlohmann::json to_json() const;
  /// Reads back what to_json wrote; probe distributions come back as
  /// their entropies only.
  static DecodeTrace from_json(const nlohmann::json& j);
};

/// Fires once per newly completed marker occurrence in a stream of decoded
/// text pieces. Occurrences that overlap or directly follow the previous
/// one belong to the same run and do not fire again.
class CheckpointDetector {
 public:
  explicit CheckpointDetector(std::string marker);
  bool feed(std::string_view piece);

 private:
  std::string marker_;
  std::string text_;
  std::size_t run_end_ = 0;
  bool in_run_ = false;
};

/// One-shot form of CheckpointDetector.
bool detect_checkpoint(std::string_view recent_text, std::string_view marker);

/// Greedy side-channel answer probe on a fork of `context`.
/// Throws ProbeEmptyError when no answer token precedes the stop, and
/// BackendError (annotated with the probe context) on backend failure.
ProbeResult run_probe(const ModelBackend& backend, const Context& context, const GenerationConfig& config,
                      std::size_t vocab_size);

/// Decode state bundle for one generation.
class Decoder {
 public:
  Decoder(const ModelBackend& backend, const TriggerTokenSet& triggers, GenerationConfig config,
          std::string prompt);
  ~Decoder();
  Decoder(const Decoder&) = delete;
  Decoder& operator=(const Decoder&) = delete;

  bool finished() const noexcept { return finished_; }
  /// One step of the certainty-guided token prediction.
  TokenId next_token();
  /// Completes pending probes and hands over the trace.
  DecodeTrace finish();

  const SuppressionState& suppression() const noexcept { return suppression_; }
  const DecodeTrace& trace() const noexcept { return trace_; }

 private:
  struct PendingProbe;

  bool suppression_active() const;
  bool probing_enabled() const;
  TokenId sample_local(std::size_t step, bool masked);
  TokenId sample_remote(std::size_t step, bool masked);
  void on_checkpoint(std::size_t step);
  void apply_probe(std::size_t step, std::future<ProbeResult>& result);
  void drain_pending(bool wait);

  const ModelBackend& backend_;
  const TriggerTokenSet& triggers_;
  GenerationConfig config_;
  DecodeTrace trace_;
  Context context_;
  SuppressionState suppression_;
  CheckpointDetector detector_;
  std::optional<std::size_t> last_probe_step_;
  std::unique_ptr<PendingProbe> pending_;
  bool think_ended_ = false;
  bool finished_ = false;
};

DecodeTrace generate(const ModelBackend& backend, std::string_view prompt, const GenerationConfig& config,
                     const TriggerTokenSet& triggers);

}  // namespace cgrs
