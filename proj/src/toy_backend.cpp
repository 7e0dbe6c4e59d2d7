// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/toy_backend.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

#include "cgrs/errors.hpp"

namespace cgrs {

EmissionRule EmissionRule::fixed(std::vector<TokenId> suffix, std::map<TokenId, double> dist) {
  EmissionRule rule;
  rule.suffix = std::move(suffix);
  rule.dist = std::move(dist);
  return rule;
}

EmissionRule EmissionRule::script(std::vector<TokenId> suffix, ScriptedEmission emission) {
  EmissionRule rule;
  rule.suffix = std::move(suffix);
  rule.scripted = emission;
  if (emission.script == emission.trigger) {
    rule.dist[emission.script] = 1.0;
  } else {
    if (emission.q < 1.0) rule.dist[emission.script] = 1.0 - emission.q;
    if (emission.q > 0.0) rule.dist[emission.trigger] = emission.q;
  }
  return rule;
}

namespace {

void validate_rule(const EmissionRule& rule, const Vocabulary& vocab, const std::string& where) {
  for (TokenId id : rule.suffix) {
    if (!vocab.contains(id)) throw std::invalid_argument(where + ": suffix token id out of range");
  }
  if (rule.scripted && !(rule.scripted->q >= 0.0 && rule.scripted->q <= 1.0)) {
    throw std::invalid_argument(where + ": q must lie in [0, 1]");
  }
  if (rule.dist.empty()) throw std::invalid_argument(where + ": empty emission distribution");
  double sum = 0.0;
  for (const auto& [id, p] : rule.dist) {
    if (!vocab.contains(id)) throw std::invalid_argument(where + ": emission token id out of range");
    if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument(where + ": negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw std::invalid_argument(where + ": emission probabilities sum to " + std::to_string(sum));
  }
}

TokenId token_id(const Vocabulary& vocab, const std::string& token) {
  auto id = vocab.find(token);
  if (!id) throw std::invalid_argument("toy spec references unknown token '" + token + "'");
  return *id;
}

std::vector<TokenId> token_ids(const Vocabulary& vocab, const nlohmann::json& tokens) {
  std::vector<TokenId> ids;
  for (const auto& token : tokens) ids.push_back(token_id(vocab, token.get<std::string>()));
  return ids;
}

EmissionRule rule_from_json(const Vocabulary& vocab, const nlohmann::json& j,
                            std::vector<TokenId> suffix) {
  if (j.contains("script")) {
    return EmissionRule::script(std::move(suffix),
                                {token_id(vocab, j.at("script").get<std::string>()),
                                 token_id(vocab, j.at("trigger").get<std::string>()),
                                 j.at("q").get<double>()});
  }
  std::map<TokenId, double> dist;
  for (const auto& [token, p] : j.at("dist").items()) dist[token_id(vocab, token)] = p.get<double>();
  return EmissionRule::fixed(std::move(suffix), std::move(dist));
}

nlohmann::json rule_to_json(const Vocabulary& vocab, const EmissionRule& rule) {
  if (rule.scripted) {
    return {{"script", vocab.token(rule.scripted->script)},
            {"trigger", vocab.token(rule.scripted->trigger)},
            {"q", rule.scripted->q}};
  }
  nlohmann::json dist = nlohmann::json::object();
  for (const auto& [id, p] : rule.dist) dist[vocab.token(id)] = p;
  return {{"dist", std::move(dist)}};
}

bool ends_with(std::span<const TokenId> context, const std::vector<TokenId>& suffix) {
  if (suffix.size() > context.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), context.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

}  // namespace

void ToyModelSpec::validate() const {
  if (vocab.size() < 2) throw std::invalid_argument("toy vocabulary needs at least two tokens");
  if (!vocab.contains(eos)) throw std::invalid_argument("toy eos token out of range");

  std::map<std::string, const ToyState*> by_name;
  for (const auto& s : states) {
    if (!by_name.emplace(s.name, &s).second) {
      throw std::invalid_argument("duplicate toy state '" + s.name + "'");
    }
  }
  if (!by_name.count(start)) throw std::invalid_argument("unknown start state '" + start + "'");

  for (const auto& s : states) {
    validate_rule(s.emit, vocab, "state " + s.name);
    for (const auto& rule : s.rules) {
      if (rule.suffix.empty()) throw std::invalid_argument("state " + s.name + ": rule without suffix");
      validate_rule(rule, vocab, "state " + s.name);
    }
    for (const auto& [token, target] : s.next) {
      if (!vocab.contains(token)) throw std::invalid_argument("state " + s.name + ": bad edge token");
      if (!by_name.count(target)) {
        throw std::invalid_argument("state " + s.name + ": edge to unknown state '" + target + "'");
      }
    }
  }

  std::set<std::string> reached{start};
  std::deque<std::string> frontier{start};
  while (!frontier.empty()) {
    const ToyState& s = *by_name.at(frontier.front());
    frontier.pop_front();
    for (const auto& [token, target] : s.next) {
      if (reached.insert(target).second) frontier.push_back(target);
    }
  }
  for (const auto& s : states) {
    if (!reached.count(s.name)) {
      throw std::invalid_argument("toy state '" + s.name + "' is unreachable from the start state");
    }
  }
}

const ToyState& ToyModelSpec::state(const std::string& name) const {
  for (const auto& s : states) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown toy state '" + name + "'");
}

ToyModelSpec ToyModelSpec::from_json(const nlohmann::json& j) {
  try {
    ToyModelSpec spec;
    spec.vocab = Vocabulary::from_json(j.at("vocab"));
    spec.eos = token_id(spec.vocab, j.at("eos").get<std::string>());
    spec.start = j.at("start").get<std::string>();
    for (const auto& sj : j.at("states")) {
      ToyState state;
      state.name = sj.at("name").get<std::string>();
      state.emit = rule_from_json(spec.vocab, sj.at("emit"), {});
      const nlohmann::json rules = sj.value("rules", nlohmann::json::array());
      for (const auto& rj : rules) {
        state.rules.push_back(rule_from_json(spec.vocab, rj.at("emit"), token_ids(spec.vocab, rj.at("suffix"))));
      }
      const nlohmann::json next = sj.value("next", nlohmann::json::object());
      for (const auto& [token, target] : next.items()) {
        state.next[token_id(spec.vocab, token)] = target.get<std::string>();
      }
      spec.states.push_back(std::move(state));
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("toy model spec: ") + e.what());
  }
}

ToyModelSpec ToyModelSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open toy model spec " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ToyModelSpec::to_json() const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : states) {
    nlohmann::json sj = {{"name", s.name}, {"emit", rule_to_json(vocab, s.emit)}};
    if (!s.rules.empty()) {
      nlohmann::json rules = nlohmann::json::array();
      for (const auto& rule : s.rules) {
        nlohmann::json suffix = nlohmann::json::array();
        for (TokenId id : rule.suffix) suffix.push_back(vocab.token(id));
        rules.push_back({{"suffix", std::move(suffix)}, {"emit", rule_to_json(vocab, rule)}});
      }
      sj["rules"] = std::move(rules);
    }
    if (!s.next.empty()) {
      nlohmann::json next = nlohmann::json::object();
      for (const auto& [token, target] : s.next) next[vocab.token(token)] = target;
      sj["next"] = std::move(next);
    }
    js.push_back(std::move(sj));
  }
  return {{"vocab", vocab.to_json()}, {"eos", vocab.token(eos)}, {"start", start}, {"states", std::move(js)}};
}

ToyBackend::ToyBackend(ToyModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t i = 0; i < spec_.states.size(); ++i) index_[spec_.states[i].name] = i;
}

const ToyState& ToyBackend::state_after(std::span<const TokenId> context) const {
  std::size_t current = index_.at(spec_.start);
  for (TokenId token : context) {
    if (!spec_.vocab.contains(token)) {
      throw std::invalid_argument("context token id " + std::to_string(token) + " outside toy vocabulary");
    }
    const auto& next = spec_.states[current].next;
    if (auto it = next.find(token); it != next.end()) current = index_.at(it->second);
  }
  return spec_.states[current];
}

const EmissionRule& ToyBackend::rule_for(std::span<const TokenId> context) const {
  const ToyState& state = state_after(context);
  const EmissionRule* best = &state.emit;
  std::size_t best_len = 0;
  for (const auto& rule : state.rules) {
    if (rule.suffix.size() > best_len && ends_with(context, rule.suffix)) {
      best = &rule;
      best_len = rule.suffix.size();
    }
  }
  return *best;
}

TokenDistribution ToyBackend::next_distribution(std::span<const TokenId> context) const {
  const EmissionRule& rule = rule_for(context);
  TokenDistribution dist;
  dist.probs.assign(spec_.vocab.size(), 0.0);
  for (const auto& [id, p] : rule.dist) dist.probs[static_cast<std::size_t>(id)] = p;
  return dist;
}

ToyModelSpec make_overthinking_spec(double q) {
  using namespace toy_tokens;
  ToyModelSpec spec;
  spec.vocab = Vocabulary({kEos, kQuestion, kBreak, kStep, kSo, kWait, kBut, kHmm, kAlternatively, kCheck,
                           kThinkEnd, kBoxedOpen, kAnswer, kWrongAnswer, kClose, kProbe, kLowerWait,
                           kNewline});
  auto id = [&](const char* token) { return *spec.vocab.find(token); };
  spec.eos = id(kEos);
  spec.start = "work";

  auto probe_rules = [&](std::map<TokenId, double> answer) {
    return std::vector<EmissionRule>{
        EmissionRule::fixed({id(kProbe)}, std::move(answer)),
        EmissionRule::fixed({id(kProbe), id(kAnswer)}, {{id(kClose), 1.0}}),
        EmissionRule::fixed({id(kProbe), id(kWrongAnswer)}, {{id(kClose), 1.0}}),
    };
  };
  auto unsure = probe_rules({{id(kAnswer), 0.5}, {id(kWrongAnswer), 0.5}});
  auto sure = probe_rules({{id(kAnswer), 0.97}, {id(kWrongAnswer), 0.03}});

  ToyState work{"work",
                EmissionRule::fixed({}, {{id(kStep), 0.30},
                                         {id(kBreak), 0.20},
                                         {id(kSo), 0.30},
                                         {id(kBut), 0.12},
                                         {id(kAlternatively), 0.08}}),
                unsure,
                {{id(kSo), "found"}}};
  ToyState found{"found", EmissionRule::fixed({}, {{id(kBreak), 1.0}}), sure, {{id(kBreak), "loop"}}};
  ToyState loop{"loop",
                EmissionRule::script({}, {id(kThinkEnd), id(kWait), q}),
                sure,
                {{id(kWait), "reflect"}, {id(kThinkEnd), "conclude"}}};
  ToyState reflect{"reflect",
                   EmissionRule::fixed({}, {{id(kCheck), 0.70}, {id(kHmm), 0.15}, {id(kBreak), 0.15}}),
                   sure,
                   {{id(kBreak), "loop"}}};
  ToyState conclude{"conclude",
                    EmissionRule::fixed({}, {{id(kEos), 1.0}}),
                    {
                        EmissionRule::fixed({id(kThinkEnd)}, {{id(kBoxedOpen), 1.0}}),
                        EmissionRule::fixed({id(kBoxedOpen)}, {{id(kAnswer), 1.0}}),
                        EmissionRule::fixed({id(kBoxedOpen), id(kAnswer)}, {{id(kClose), 1.0}}),
                    },
                    {}};
  spec.states = {work, found, loop, reflect, conclude};
  spec.validate();
  return spec;
}

}  // namespace cgrs
