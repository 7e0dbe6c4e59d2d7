// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Reflection-trigger lexicon.
 *
 * A trigger word ("Wait", "But", ...) is expanded into its surface-form
 * variants, each variant is looked up as a single token in the model
 * vocabulary, and the resulting ids form the trigger token set that the
 * suppression step masks. Optionally the candidate ids are filtered by how
 * often they occur in recorded reasoning traces.
 *
 * Variants that the vocabulary does not hold as one token are recorded as
 * skipped; multi-token encodings are never masked.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace cgrs {

using TokenId = std::int32_t;

/// Bidirectional token <-> id table. Ids are dense in [0, size()).
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Accepts either a JSON array (index = id) or an object {token: id}.
  static Vocabulary from_json(const nlohmann::json& j);
  static Vocabulary load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::size_t size() const noexcept { return id_to_token_.size(); }
  bool empty() const noexcept { return id_to_token_.empty(); }
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < id_to_token_.size();
  }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

enum class TriggerCategory {
  kHesitationTransition,
  kAlternativeProposal,
  kContemplationCue,
};

std::string_view to_string(TriggerCategory category);
TriggerCategory parse_trigger_category(std::string_view name);

struct TriggerWord {
  std::string base;
  TriggerCategory category = TriggerCategory::kHesitationTransition;

  bool operator==(const TriggerWord&) const = default;
};

/// Wait, But, Alternatively, Hmm.
std::vector<TriggerWord> default_trigger_words();

/// {identity, lower, upper} x {no prefix, one leading space}, deduplicated.
std::set<std::string> expand_variants(const TriggerWord& word);
std::set<std::string> expand_variants(std::string_view base);

struct TriggerProvenance {
  std::string surface_form;
  std::string base_word;  // empty when the form was not derived from a base word

  bool operator==(const TriggerProvenance&) const = default;
};

/// Deduplicated set of trigger token ids plus where each id came from.
class TriggerTokenSet {
 public:
  const std::set<TokenId>& ids() const noexcept { return ids_; }
  bool contains(TokenId id) const { return ids_.count(id) != 0; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  const std::map<TokenId, TriggerProvenance>& provenance() const noexcept { return provenance_; }
  /// Forms that are not a single vocabulary token.
  const std::vector<TriggerProvenance>& skipped() const noexcept { return skipped_; }

  void insert(TokenId id, TriggerProvenance origin);
  void record_skipped(TriggerProvenance origin);
  /// Set union; provenance of ids already present is kept.
  void merge(const TriggerTokenSet& other);

  /// Largest id, or -1 when empty.
  TokenId max_id() const noexcept { return ids_.empty() ? -1 : *ids_.rbegin(); }

 private:
  std::set<TokenId> ids_;
  std::map<TokenId, TriggerProvenance> provenance_;
  std::vector<TriggerProvenance> skipped_;
};

TriggerTokenSet map_to_token_ids(const std::set<std::string>& forms, const Vocabulary& vocab,
                                 std::string_view base_word = {});

/// Union of map_to_token_ids over the variants of every base word.
TriggerTokenSet trigger_set_for(std::span<const TriggerWord> base_words, const Vocabulary& vocab);

struct TriggerFrequency {
  TokenId token_id = 0;
  std::string surface_form;
  std::string base_word;
  std::size_t count = 0;
};

struct TriggerLexicon {
  TriggerTokenSet triggers;
  /// One row per candidate id, ordered by id.
  std::vector<TriggerFrequency> frequencies;
};

TriggerLexicon build_from_traces(std::span<const std::vector<TokenId>> traces,
                                 const Vocabulary& vocab,
                                 std::span<const TriggerWord> base_words,
                                 std::size_t min_count);

/// CSV with header token_id,surface_form,base_word,count.
void write_frequency_csv(std::ostream& out, std::span<const TriggerFrequency> rows);

/// Trigger configuration document: {"base_words": [{"base", "category"}], "min_count"}.
struct TriggerConfig {
  std::vector<TriggerWord> base_words = default_trigger_words();
  std::size_t min_count = 1;

  static TriggerConfig from_json(const nlohmann::json& j);
  static TriggerConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  bool operator==(const TriggerConfig&) const = default;
};

}  // namespace cgrs
