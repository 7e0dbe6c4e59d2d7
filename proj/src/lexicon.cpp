// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "cgrs/errors.hpp"
#include "csv.hpp"

namespace cgrs {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
  token_to_id_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw std::invalid_argument("duplicate vocabulary entry '" + id_to_token_[i] + "' at ids " +
                                  std::to_string(it->second) + " and " + std::to_string(i));
    }
  }
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (j.is_array()) {
    return Vocabulary(j.get<std::vector<std::string>>());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("vocabulary must be a JSON array or object");
  }
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& [token, id_json] : j.items()) {
    auto id = id_json.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size() || seen[id]) {
      throw std::invalid_argument("vocabulary ids must be dense and unique; bad id " +
                                  std::to_string(id) + " for '" + token + "'");
    }
    tokens[id] = token;
    seen[id] = true;
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open vocabulary file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json Vocabulary::to_json() const { return id_to_token_; }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) {
    throw std::invalid_argument("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string_view to_string(TriggerCategory category) {
  switch (category) {
    case TriggerCategory::kHesitationTransition: return "hesitation_transition";
    case TriggerCategory::kAlternativeProposal: return "alternative_proposal";
    case TriggerCategory::kContemplationCue: return "contemplation_cue";
  }
  return "unknown";
}

TriggerCategory parse_trigger_category(std::string_view name) {
  if (name == "hesitation_transition") return TriggerCategory::kHesitationTransition;
  if (name == "alternative_proposal") return TriggerCategory::kAlternativeProposal;
  if (name == "contemplation_cue") return TriggerCategory::kContemplationCue;
  throw std::invalid_argument("unknown trigger category '" + std::string(name) + "'");
}

std::vector<TriggerWord> default_trigger_words() {
  return {
      {"Wait", TriggerCategory::kHesitationTransition},
      {"But", TriggerCategory::kHesitationTransition},
      {"Alternatively", TriggerCategory::kAlternativeProposal},
      {"Hmm", TriggerCategory::kContemplationCue},
  };
}

namespace {

std::string fold(std::string_view s, int (*fn)(int)) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(fn(static_cast<unsigned char>(c)));
  return out;
}

bool has_outer_whitespace(std::string_view s) {
  auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  return !s.empty() && (ws(s.front()) || ws(s.back()));
}

}  // namespace

std::set<std::string> expand_variants(std::string_view base) {
  if (base.empty()) throw std::invalid_argument("trigger word base must be nonempty");
  if (has_outer_whitespace(base)) {
    throw std::invalid_argument("trigger word base '" + std::string(base) +
                                "' has leading or trailing whitespace");
  }
  std::set<std::string> forms;
  for (std::string cased : {std::string(base), fold(base, ::tolower), fold(base, ::toupper)}) {
    forms.insert(" " + cased);
    forms.insert(std::move(cased));
  }
  return forms;
}

std::set<std::string> expand_variants(const TriggerWord& word) { return expand_variants(word.base); }

void TriggerTokenSet::insert(TokenId id, TriggerProvenance origin) {
  if (ids_.insert(id).second) provenance_.emplace(id, std::move(origin));
}

void TriggerTokenSet::record_skipped(TriggerProvenance origin) { skipped_.push_back(std::move(origin)); }

void TriggerTokenSet::merge(const TriggerTokenSet& other) {
  for (const auto& [id, origin] : other.provenance_) insert(id, origin);
  skipped_.insert(skipped_.end(), other.skipped_.begin(), other.skipped_.end());
}

TriggerTokenSet map_to_token_ids(const std::set<std::string>& forms, const Vocabulary& vocab,
                                 std::string_view base_word) {
  TriggerTokenSet result;
  for (const auto& form : forms) {
    TriggerProvenance origin{form, std::string(base_word)};
    if (auto id = vocab.find(form)) {
      result.insert(*id, std::move(origin));
    } else {
      result.record_skipped(std::move(origin));
    }
  }
  return result;
}

TriggerTokenSet trigger_set_for(std::span<const TriggerWord> base_words, const Vocabulary& vocab) {
  TriggerTokenSet result;
  for (const auto& word : base_words) {
    result.merge(map_to_token_ids(expand_variants(word), vocab, word.base));
  }
  return result;
}

TriggerLexicon build_from_traces(std::span<const std::vector<TokenId>> traces,
                                 const Vocabulary& vocab,
                                 std::span<const TriggerWord> base_words,
                                 std::size_t min_count) {
  if (min_count > 0 && traces.empty()) {
    throw std::invalid_argument("build_from_traces: min_count > 0 requires at least one trace");
  }
  TriggerTokenSet candidates = trigger_set_for(base_words, vocab);

  std::map<TokenId, std::size_t> counts;
  for (TokenId id : candidates.ids()) counts[id] = 0;
  for (const auto& trace : traces) {
    for (TokenId id : trace) {
      auto it = counts.find(id);
      if (it != counts.end()) ++it->second;
    }
  }

  TriggerLexicon lexicon;
  for (const auto& [id, count] : counts) {
    const auto& origin = candidates.provenance().at(id);
    lexicon.frequencies.push_back({id, origin.surface_form, origin.base_word, count});
    if (count >= min_count) lexicon.triggers.insert(id, origin);
  }
  for (const auto& skipped : candidates.skipped()) lexicon.triggers.record_skipped(skipped);
  return lexicon;
}

void write_frequency_csv(std::ostream& out, std::span<const TriggerFrequency> rows) {
  out << "token_id,surface_form,base_word,count\n";
  for (const auto& row : rows) {
    out << row.token_id << ',' << detail::csv_field(row.surface_form) << ','
        << detail::csv_field(row.base_word) << ',' << row.count << '\n';
  }
}

TriggerConfig TriggerConfig::from_json(const nlohmann::json& j) {
  TriggerConfig config;
  config.base_words.clear();
  for (const auto& entry : j.at("base_words")) {
    TriggerWord word{entry.at("base").get<std::string>(),
                     parse_trigger_category(entry.at("category").get<std::string>())};
    expand_variants(word);  // validates the base
    config.base_words.push_back(std::move(word));
  }
  if (j.contains("min_count")) {
    auto min_count = j.at("min_count").get<long long>();
    if (min_count < 0) throw std::invalid_argument("min_count must be nonnegative");
    config.min_count = static_cast<std::size_t>(min_count);
  }
  return config;
}

TriggerConfig TriggerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trigger config " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json TriggerConfig::to_json() const {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& word : base_words) {
    words.push_back({{"base", word.base}, {"category", to_string(word.category)}});
  }
  return {{"base_words", std::move(words)}, {"min_count", min_count}};
}

void TriggerConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write trigger config " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace cgrs
