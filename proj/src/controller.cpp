// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cgrs/errors.hpp"
#include "cgrs/rng.hpp"
#include "cgrs/sampling.hpp"

namespace cgrs {

void GenerationConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must lie in (0, 1]");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  if (probe_max_tokens < 1) throw std::invalid_argument("probe_max_tokens must be at least 1");
  if (checkpoint_marker.empty()) throw std::invalid_argument("checkpoint marker must be nonempty");
  if (probe_prompt.empty()) throw std::invalid_argument("probe prompt must be nonempty");
  if (fixed_p && !(*fixed_p >= 0.0 && *fixed_p <= 1.0)) {
    throw std::invalid_argument("fixed suppression probability must lie in [0, 1]");
  }
  if (!(mask_value < 0.0) || !std::isfinite(mask_value)) {
    throw std::invalid_argument("mask value must be a finite negative number");
  }
  if (max_resample_attempts < 1) throw std::invalid_argument("max_resample_attempts must be at least 1");
}

nlohmann::json GenerationConfig::to_json() const {
  nlohmann::json j = {
      {"temperature", temperature},
      {"top_p", top_p},
      {"delta", delta},
      {"max_tokens", max_tokens},
      {"checkpoint_marker", checkpoint_marker},
      {"probe_prompt", probe_prompt},
      {"probe_max_tokens", probe_max_tokens},
      {"probe_stop_strings", probe_stop_strings},
      {"min_tokens_between_probes", min_tokens_between_probes},
      {"suppression_enabled", suppression_enabled},
      {"fixed_p", fixed_p ? nlohmann::json(*fixed_p) : nlohmann::json(nullptr)},
      {"seed", seed},
      {"async_probe", async_probe},
      {"restrict_to_thinking", restrict_to_thinking},
      {"think_end_marker", think_end_marker},
      {"mask_value", mask_value},
      {"max_resample_attempts", max_resample_attempts},
  };
  return j;
}

GenerationConfig GenerationConfig::from_json(const nlohmann::json& j) {
  GenerationConfig c;
  c.temperature = j.value("temperature", c.temperature);
  c.top_p = j.value("top_p", c.top_p);
  c.delta = j.value("delta", c.delta);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.checkpoint_marker = j.value("checkpoint_marker", c.checkpoint_marker);
  c.probe_prompt = j.value("probe_prompt", c.probe_prompt);
  c.probe_max_tokens = j.value("probe_max_tokens", c.probe_max_tokens);
  c.probe_stop_strings = j.value("probe_stop_strings", c.probe_stop_strings);
  c.min_tokens_between_probes = j.value("min_tokens_between_probes", c.min_tokens_between_probes);
  c.suppression_enabled = j.value("suppression_enabled", c.suppression_enabled);
  if (j.contains("fixed_p") && !j["fixed_p"].is_null()) c.fixed_p = j["fixed_p"].get<double>();
  c.seed = j.value("seed", c.seed);
  c.async_probe = j.value("async_probe", c.async_probe);
  c.restrict_to_thinking = j.value("restrict_to_thinking", c.restrict_to_thinking);
  c.think_end_marker = j.value("think_end_marker", c.think_end_marker);
  c.mask_value = j.value("mask_value", c.mask_value);
  c.max_resample_attempts = j.value("max_resample_attempts", c.max_resample_attempts);
  c.validate();
  return c;
}

std::string_view to_string(ProbeStopReason reason) {
  switch (reason) {
    case ProbeStopReason::kStopString: return "stop_string";
    case ProbeStopReason::kMaxTokens: return "max_tokens";
    case ProbeStopReason::kEos: return "eos";
  }
  return "unknown";
}

namespace {

ProbeStopReason parse_stop_reason(std::string_view name) {
  if (name == "stop_string") return ProbeStopReason::kStopString;
  if (name == "eos") return ProbeStopReason::kEos;
  return ProbeStopReason::kMaxTokens;
}

std::string trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return std::string(s);
}

/// Earliest position in `text` where any stop string begins, if any.
std::optional<std::size_t> find_stop(std::string_view text, const std::vector<std::string>& stops) {
  std::optional<std::size_t> best;
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    auto pos = text.find(stop);
    if (pos != std::string_view::npos && (!best || pos < *best)) best = pos;
  }
  return best;
}

}  // namespace

std::vector<double> ProbeResult::token_entropies() const {
  if (distributions.empty()) return saved_entropies;
  std::vector<double> out;
  out.reserve(distributions.size());
  for (const auto& dist : distributions) out.push_back(token_entropy(dist));
  return out;
}

ProbeResult run_probe(const ModelBackend& backend, const Context& context, const GenerationConfig& config,
                      std::size_t vocab_size) {
  if (context.empty()) throw std::invalid_argument("probe context is empty");
  try {
    Context probe = backend.fork(context);
    probe.append(backend.tokenize(config.probe_prompt));
    const auto eos = backend.eos_token();

    ProbeResult result;
    std::size_t generated = 0;
    bool stopped = false;
    while (generated < config.probe_max_tokens) {
      TokenDistribution dist = backend.next_distribution(probe.tokens());
      TokenId token = dist.argmax();
      ++generated;
      if (token == eos) {
        result.stop_reason = ProbeStopReason::kEos;
        stopped = true;
        break;
      }
      std::string piece = backend.token_text(token);
      // The opening brace of \boxed{ is format scaffolding, not answer content.
      if (result.answer_tokens.empty() && result.answer_text.empty() && trim(piece) == "{") {
        probe.append(token);
        continue;
      }
      std::string combined = result.answer_text + piece;
      if (auto stop = find_stop(combined, config.probe_stop_strings)) {
        // A token like "7}" still carries answer content before the stop.
        if (*stop > result.answer_text.size()) {
          result.answer_tokens.push_back(token);
          result.distributions.push_back(std::move(dist));
        }
        result.answer_text = combined.substr(0, *stop);
        result.stop_reason = ProbeStopReason::kStopString;
        stopped = true;
        break;
      }
      result.answer_tokens.push_back(token);
      result.distributions.push_back(std::move(dist));
      result.answer_text = std::move(combined);
      probe.append(token);
    }
    if (!stopped) result.stop_reason = ProbeStopReason::kMaxTokens;
    if (result.answer_tokens.empty()) {
      throw ProbeEmptyError("probe produced no answer tokens (stop: " +
                            std::string(to_string(result.stop_reason)) + ")");
    }
    result.certainty = certainty_score(result.distributions, vocab_size);
    return result;
  } catch (const BackendError& e) {
    throw BackendError("probe at context length " + std::to_string(context.size()) + ": " + e.what(),
                       e.retryable());
  }
}

struct Decoder::PendingProbe {
  std::size_t step = 0;
  std::future<ProbeResult> result;
};

Decoder::Decoder(const ModelBackend& backend, const TriggerTokenSet& triggers, GenerationConfig config,
                 std::string prompt)
    : backend_(backend), triggers_(triggers), config_(std::move(config)), detector_(config_.checkpoint_marker) {
  config_.validate();
  if (triggers_.max_id() >= static_cast<TokenId>(backend_.vocabulary().size())) {
    throw std::invalid_argument("trigger set references ids outside the backend vocabulary");
  }
  trace_.prompt = std::move(prompt);
  trace_.prompt_tokens = backend_.tokenize(trace_.prompt);
  trace_.config = config_;
  context_ = Context(trace_.prompt_tokens);
  suppression_ = config_.fixed_p ? SuppressionState::fixed_probability(*config_.fixed_p, config_.seed)
                                 : SuppressionState::certainty_guided(config_.delta, config_.seed);
  if (config_.max_tokens == 0) {
    finished_ = true;
    trace_.truncated = true;
  }
}

Decoder::~Decoder() {
  if (pending_ && pending_->result.valid()) pending_->result.wait();
}

bool Decoder::suppression_active() const {
  return config_.suppression_enabled && !(config_.restrict_to_thinking && think_ended_);
}

bool Decoder::probing_enabled() const { return config_.suppression_enabled && !config_.fixed_p; }

TokenId Decoder::next_token() {
  if (finished_) throw std::logic_error("next_token called on a finished generation");
  const std::size_t step = trace_.tokens.size();
  drain_pending(false);

  bool masked = false;
  if (suppression_active()) {
    suppression_.rng_stream_position = step;
    auto [r, next_state] = should_suppress(suppression_);
    trace_.suppression_decisions.push_back({step, r, suppression_.p});
    suppression_ = next_state;
    masked = r;
  }

  TokenId token = backend_.capabilities().full_distribution ? sample_local(step, masked)
                                                             : sample_remote(step, masked);

  context_.append(token);
  trace_.tokens.push_back(token);
  trace_.token_count = trace_.tokens.size();
  const std::string piece = backend_.token_text(token);
  const std::size_t text_before = trace_.text.size();
  trace_.text += piece;

  if (!think_ended_ && !config_.think_end_marker.empty()) {
    std::size_t from = text_before >= config_.think_end_marker.size() ? text_before - config_.think_end_marker.size() : 0;
    think_ended_ = trace_.text.find(config_.think_end_marker, from) != std::string::npos;
  }

  if (token == backend_.eos_token()) {
    finished_ = true;
  } else if (trace_.tokens.size() >= config_.max_tokens) {
    finished_ = true;
    trace_.truncated = true;
  }

  const bool checkpoint = detector_.feed(piece);
  if (checkpoint && !finished_ && probing_enabled()) {
    const bool throttled = last_probe_step_ && step - *last_probe_step_ < config_.min_tokens_between_probes;
    if (!throttled) on_checkpoint(step);
  }
  return token;
}

TokenId Decoder::sample_local(std::size_t step, bool masked) {
  LogitVector logits = backend_.next_logits(context_.tokens());
  if (masked) logits = mask_triggers(logits, triggers_, {config_.mask_value, false});
  const double u = counter_uniform(config_.seed, RngStream::kSampling, step);
  return sample_top_p(logits.values(), config_.temperature, config_.top_p, u);
}

TokenId Decoder::sample_remote(std::size_t step, bool masked) {
  CompletionRequest request;
  request.prompt.assign(context_.tokens().begin(), context_.tokens().end());
  request.max_tokens = 1;
  request.temperature = config_.temperature;
  request.top_p = config_.top_p;
  request.logprobs = 1;  // the sampled token's id comes back through the logprobs listing

  auto draw = [&](std::uint64_t attempt, const CompletionRequest& base) {
    CompletionRequest r = base;
    r.seed = derive_seed(derive_seed(config_.seed, step), attempt);
    CompletionResponse response = backend_.complete(r);
    if (response.tokens.empty()) {
      auto eos = backend_.eos_token();
      if (eos && (response.finish_reason == "stop" || response.finish_reason == "eos")) return *eos;
      throw BackendError("completion returned no token at step " + std::to_string(step));
    }
    TokenId id = response.tokens.front().id;
    if (id < 0) {
      throw BackendError("completion token '" + response.tokens.front().text + "' is not in the vocabulary");
    }
    return id;
  };

  if (!masked) return draw(0, request);
  if (backend_.capabilities().logit_bias) {
    return draw(0, apply_remote_suppression(std::move(request), triggers_, backend_.capabilities()));
  }

  TokenId token = -1;
  int attempts = 0;
  while (attempts < config_.max_resample_attempts) {
    token = draw(static_cast<std::uint64_t>(attempts), request);
    ++attempts;
    if (!triggers_.contains(token)) break;
  }
  trace_.soft_suppressions.push_back({step, attempts, triggers_.contains(token)});
  return token;
}

void Decoder::on_checkpoint(std::size_t step) {
  last_probe_step_ = step;
  const std::size_t vocab_size = backend_.vocabulary().size();
  if (!config_.async_probe) {
    std::promise<ProbeResult> promise;
    auto future = promise.get_future();
    try {
      promise.set_value(run_probe(backend_, context_, config_, vocab_size));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    apply_probe(step, future);
    return;
  }

  drain_pending(true);
  pending_ = std::make_unique<PendingProbe>();
  pending_->step = step;
  pending_->result = std::async(std::launch::async, [this, snapshot = context_.fork(), vocab_size] {
    return run_probe(backend_, snapshot, config_, vocab_size);
  });
}

void Decoder::apply_probe(std::size_t step, std::future<ProbeResult>& result) {
  try {
    ProbeResult probe = result.get();
    suppression_.update(probe.certainty);
    trace_.checkpoint_events.push_back({step, std::move(probe), suppression_.p});
  } catch (const ProbeEmptyError& e) {
    trace_.probe_failures.push_back({step, e.what()});
  }
}

void Decoder::drain_pending(bool wait) {
  if (!pending_) return;
  if (!wait && pending_->result.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
  auto pending = std::move(pending_);
  apply_probe(pending->step, pending->result);
}

DecodeTrace Decoder::finish() {
  drain_pending(true);
  finished_ = true;
  return std::move(trace_);
}

DecodeTrace generate(const ModelBackend& backend, std::string_view prompt, const GenerationConfig& config,
                     const TriggerTokenSet& triggers) {
  Decoder decoder(backend, triggers, config, std::string(prompt));
  while (!decoder.finished()) decoder.next_token();
  return decoder.finish();
}

namespace {

nlohmann::json certainty_json(const CertaintyScore& c) {
  return {{"value", c.value}, {"mean_entropy", c.mean_entropy}, {"n_tokens", c.n_tokens}, {"truncated", c.truncated}};
}

}  // namespace

nlohmann::json DecodeTrace::to_json() const {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : checkpoint_events) {
    events.push_back({{"step", e.step},
                      {"p", e.p},
                      {"probe",
                       {{"answer_tokens", e.probe.answer_tokens},
                        {"answer_text", e.probe.answer_text},
                        {"token_entropies", e.probe.token_entropies()},
                        {"certainty", certainty_json(e.probe.certainty)},
                        {"stop_reason", to_string(e.probe.stop_reason)}}}});
  }
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& d : suppression_decisions) decisions.push_back({{"step", d.step}, {"r", d.r}, {"p", d.p}});
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : probe_failures) failures.push_back({{"step", f.step}, {"message", f.message}});
  nlohmann::json soft = nlohmann::json::array();
  for (const auto& s : soft_suppressions) {
    soft.push_back({{"step", s.step}, {"attempts", s.attempts}, {"trigger_emitted", s.trigger_emitted}});
  }
  return {{"prompt", prompt},
          {"prompt_tokens", prompt_tokens},
          {"tokens", tokens},
          {"text", text},
          {"checkpoint_events", std::move(events)},
          {"suppression_decisions", std::move(decisions)},
          {"probe_failures", std::move(failures)},
          {"soft_suppressions", std::move(soft)},
          {"token_count", token_count},
          {"truncated", truncated},
          {"config", config.to_json()}};
}

DecodeTrace DecodeTrace::from_json(const nlohmann::json& j) {
  try {
    DecodeTrace t;
    t.prompt = j.value("prompt", std::string{});
    t.prompt_tokens = j.value("prompt_tokens", std::vector<TokenId>{});
    t.tokens = j.at("tokens").get<std::vector<TokenId>>();
    t.text = j.value("text", std::string{});
    t.token_count = j.value("token_count", t.tokens.size());
    t.truncated = j.value("truncated", false);
    if (j.contains("config")) t.config = GenerationConfig::from_json(j["config"]);
    for (const auto& e : j.value("checkpoint_events", nlohmann::json::array())) {
      CheckpointEvent event;
      event.step = e.at("step").get<std::size_t>();
      event.p = e.at("p").get<double>();
      const auto& probe = e.at("probe");
      event.probe.answer_tokens = probe.at("answer_tokens").get<std::vector<TokenId>>();
      event.probe.answer_text = probe.at("answer_text").get<std::string>();
      event.probe.saved_entropies = probe.value("token_entropies", std::vector<double>{});
      const auto& c = probe.at("certainty");
      event.probe.certainty = {c.at("value").get<double>(), c.at("mean_entropy").get<double>(),
                               c.at("n_tokens").get<std::size_t>(), c.value("truncated", false)};
      event.probe.stop_reason = parse_stop_reason(probe.value("stop_reason", std::string{}));
      t.checkpoint_events.push_back(std::move(event));
    }
    for (const auto& d : j.value("suppression_decisions", nlohmann::json::array())) {
      t.suppression_decisions.push_back({d.at("step").get<std::size_t>(), d.at("r").get<bool>(), d.at("p").get<double>()});
    }
    for (const auto& f : j.value("probe_failures", nlohmann::json::array())) {
      t.probe_failures.push_back({f.at("step").get<std::size_t>(), f.at("message").get<std::string>()});
    }
    for (const auto& s : j.value("soft_suppressions", nlohmann::json::array())) {
      t.soft_suppressions.push_back(
          {s.at("step").get<std::size_t>(), s.at("attempts").get<int>(), s.at("trigger_emitted").get<bool>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("decode trace: ") + e.what());
  }
}

}  // namespace cgrs
