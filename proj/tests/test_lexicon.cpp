// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "cgrs/lexicon.hpp"

using namespace cgrs;

namespace {

Vocabulary ten_token_vocab() {
  return Vocabulary({"<eos>", "the", "But", "x", "but", "Wait", " Wait", "y", "z", "hmm"});
}

}  // namespace

TEST_CASE("vocabulary maps are mutual inverses") {
  auto vocab = ten_token_vocab();
  CHECK(vocab.size() == 10);
  for (TokenId id = 0; id < static_cast<TokenId>(vocab.size()); ++id) {
    CHECK(vocab.find(vocab.token(id)) == id);
  }
  CHECK_FALSE(vocab.find("nope"));
  CHECK_THROWS_AS(vocab.token(10), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary({"a", "b", "a"}), std::invalid_argument);
}

TEST_CASE("vocabulary json forms") {
  auto from_array = Vocabulary::from_json(nlohmann::json::array({"a", "b", "c"}));
  auto from_object = Vocabulary::from_json({{"c", 2}, {"a", 0}, {"b", 1}});
  CHECK(from_array == from_object);
  CHECK(Vocabulary::from_json(from_array.to_json()) == from_array);
  CHECK_THROWS(Vocabulary::from_json({{"a", 0}, {"b", 2}}));
}

TEST_CASE("expand_variants") {
  SUBCASE("But gives the six case and space forms") {
    std::set<std::string> expected;
    for (const char* cased : {"But", "but", "BUT"}) {
      expected.insert(cased);
      expected.insert(std::string(" ") + cased);
    }
    CHECK(expand_variants("But") == expected);
    CHECK(expected.size() == 6);
  }
  SUBCASE("lowercase wait and spaced Hmm") {
    CHECK(expand_variants("Wait").count("wait") == 1);
    CHECK(expand_variants("Hmm").count(" Hmm") == 1);
  }
  SUBCASE("case folds collapse") {
    CHECK(expand_variants("ok").size() == 4);  // ok, OK and their spaced forms
    CHECK(expand_variants("42").size() == 2);
  }
  SUBCASE("always contains the base") {
    for (const auto& w : default_trigger_words()) CHECK(expand_variants(w).count(w.base) == 1);
  }
  SUBCASE("rejects bad bases") {
    CHECK_THROWS_AS(expand_variants(""), std::invalid_argument);
    CHECK_THROWS_AS(expand_variants(" Wait"), std::invalid_argument);
    CHECK_THROWS_AS(expand_variants("Wait\n"), std::invalid_argument);
  }
}

TEST_CASE("map_to_token_ids") {
  auto vocab = ten_token_vocab();
  SUBCASE("only single-token forms are kept") {
    Vocabulary only_wait({"<eos>", "Wait", "x"});
    auto set = map_to_token_ids({"Wait", " Wait"}, only_wait);
    CHECK(set.size() == 1);
    CHECK(set.contains(1));
    REQUIRE(set.skipped().size() == 1);
    CHECK(set.skipped().front().surface_form == " Wait");
  }
  SUBCASE("empty input") { CHECK(map_to_token_ids({}, vocab).empty()); }
  SUBCASE("But variants over the ten-token vocabulary") {
    // Hand lookup: "But" -> 2, "but" -> 4; the other four forms are absent.
    auto set = map_to_token_ids(expand_variants("But"), vocab, "But");
    CHECK(set.ids() == std::set<TokenId>{2, 4});
    CHECK(set.skipped().size() == 4);
    CHECK(set.provenance().at(4) == TriggerProvenance{"but", "But"});
  }
  SUBCASE("union homomorphism") {
    std::set<std::string> a = {"But", "y", "nope"}, b = {"but", "y", " Wait"};
    std::set<std::string> both = a;
    both.insert(b.begin(), b.end());
    auto merged = map_to_token_ids(a, vocab);
    merged.merge(map_to_token_ids(b, vocab));
    CHECK(map_to_token_ids(both, vocab).ids() == merged.ids());
  }
}

TEST_CASE("build_from_traces") {
  Vocabulary vocab({"<eos>", "a", "b", "c", "d", "e", "f", "Wait", "g", "hmm", "h"});
  const std::vector<TriggerWord> words = {{"Wait", TriggerCategory::kHesitationTransition},
                                          {"Hmm", TriggerCategory::kContemplationCue}};

  SUBCASE("hand-built corpus") {
    // id 7 ("Wait") occurs 5 times, id 9 ("hmm") never.
    std::vector<std::vector<TokenId>> traces = {{1, 7, 2, 7}, {7, 3, 7}, {4, 5, 7, 6}};
    auto lexicon = build_from_traces(traces, vocab, words, 1);
    CHECK(lexicon.triggers.ids() == std::set<TokenId>{7});
    REQUIRE(lexicon.frequencies.size() == 2);
    CHECK(lexicon.frequencies[0].token_id == 7);
    CHECK(lexicon.frequencies[0].count == 5);
    CHECK(lexicon.frequencies[1].token_id == 9);
    CHECK(lexicon.frequencies[1].count == 0);
  }
  SUBCASE("threshold disabled keeps every candidate") {
    auto all = trigger_set_for(words, vocab);
    std::vector<std::vector<TokenId>> traces = {{1, 2, 3}};
    CHECK(build_from_traces(traces, vocab, words, 0).triggers.ids() == all.ids());
    CHECK(build_from_traces({}, vocab, words, 0).triggers.ids() == all.ids());
  }
  SUBCASE("no occurrences") {
    std::vector<std::vector<TokenId>> traces = {{1, 2}, {3}};
    CHECK(build_from_traces(traces, vocab, words, 1).triggers.empty());
  }
  SUBCASE("empty corpus with a threshold") {
    CHECK_THROWS_AS(build_from_traces({}, vocab, words, 1), std::invalid_argument);
  }
  SUBCASE("frequency csv") {
    std::vector<std::vector<TokenId>> traces = {{7, 7}};
    std::ostringstream out;
    write_frequency_csv(out, build_from_traces(traces, vocab, words, 1).frequencies);
    CHECK(out.str() == "token_id,surface_form,base_word,count\n7,Wait,Wait,2\n9,hmm,Hmm,0\n");
  }
}

TEST_CASE("trigger config round trip") {
  TriggerConfig config;
  config.base_words.push_back({"Hold on", TriggerCategory::kHesitationTransition});
  config.min_count = 3;
  auto path = std::filesystem::temp_directory_path() / "cgrs_trigger_config_test.json";
  config.save(path);
  CHECK(TriggerConfig::load(path) == config);
  std::filesystem::remove(path);

  CHECK_THROWS(TriggerConfig::from_json({{"base_words", {{{"base", "x"}, {"category", "nope"}}}}}));
  CHECK_THROWS(TriggerConfig::from_json({{"base_words", {{{"base", " x"}, {"category", "contemplation_cue"}}}}}));
  CHECK(TriggerConfig::load(CGRS_DATA_DIR "/triggers.json") == TriggerConfig{});
}
