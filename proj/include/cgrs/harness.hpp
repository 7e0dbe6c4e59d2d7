// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Benchmark runner: JSONL datasets in, per-mode reports out.
 *
 * Every mode sees the same per-generation seeds (derived from the
 * repetition seed and the problem index), so vanilla, fixed-p and
 * certainty-guided runs are directly comparable problem by problem.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cgrs/backend.hpp"
#include "cgrs/controller.hpp"
#include "cgrs/lexicon.hpp"

namespace cgrs {

enum class AnswerStyle { kMath, kChoice };

struct Problem {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  AnswerStyle answer_style = AnswerStyle::kMath;
};

/// One problem per JSONL line; blank lines are skipped. Writes a warning to
/// `warn` (when given) for an empty file.
std::vector<Problem> load_dataset(const std::filesystem::path& path, std::ostream* warn = nullptr);
std::vector<Problem> parse_dataset(std::istream& in, std::ostream* warn = nullptr);

/// Brace-balanced content of the last \boxed{...}. Throws ExtractionError.
std::string extract_boxed_answer(std::string_view text);

/// Whitespace removed, balanced outer parentheses and a leading '+' dropped.
std::string canonicalize_answer(std::string_view answer);
bool score(std::string_view predicted, std::string_view gold, AnswerStyle style = AnswerStyle::kMath);

struct Mode {
  enum class Kind { kVanilla, kFixedP, kCgrs };
  Kind kind = Kind::kVanilla;
  double value = 0.0;  // p for fixed-p, delta for cgrs

  static Mode vanilla() { return {Kind::kVanilla, 0.0}; }
  static Mode fixed_p(double p);
  static Mode cgrs(double delta);
  /// "vanilla", "fixed-p=<p>", "cgrs" or "cgrs=<delta>".
  static Mode parse(std::string_view text, double default_delta = 0.9);

  /// Stable label used in report names: vanilla, fixed_p(0.25), cgrs(0.9).
  std::string label() const;
  /// Applies the mode on top of a base generation config.
  GenerationConfig configure(GenerationConfig base) const;

  bool operator==(const Mode&) const = default;
};

struct LengthRecord {
  std::string problem_id;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::size_t tokens = 0;
};

struct ProblemFailure {
  std::string problem_id;
  std::size_t repetition = 0;
  std::string kind;  // "backend" or "unparsable"
  std::string message;
};

struct DatasetMetrics {
  std::string dataset;
  double accuracy = 0.0;     // percent
  double mean_length = 0.0;  // tokens
  std::optional<double> length_reduction;  // percent vs vanilla
  std::vector<double> accuracy_per_rep;
  std::vector<double> length_per_rep;
};

struct RunReport {
  Mode mode;
  std::vector<DatasetMetrics> datasets;
  double accuracy = 0.0;
  double mean_length = 0.0;
  std::optional<double> length_reduction;
  std::map<std::string, std::size_t> trigger_frequencies;
  std::vector<LengthRecord> length_distribution;
  std::vector<ProblemFailure> failures;
  std::size_t repetitions = 0;
  std::vector<std::uint64_t> seeds;
  GenerationConfig config;
  /// Only filled when traces are requested.
  std::vector<DecodeTrace> traces;

  nlohmann::json to_json() const;
};

struct Dataset {
  std::string name;
  std::vector<Problem> problems;
};

struct BenchmarkOptions {
  std::vector<Mode> modes;
  std::vector<std::uint64_t> seeds;  // one per repetition
  std::size_t repetitions = 1;
  GenerationConfig base_config;
  std::vector<std::string> trigger_words = {"Wait", "But", "Alternatively", "Hmm"};
  std::size_t parallelism = 1;
  bool keep_traces = false;
};

/// (vanilla - method) / vanilla * 100.
double length_reduction(double vanilla_len, double method_len);

/// Case-insensitive whole-word occurrences of each word in `text`.
std::map<std::string, std::size_t> count_trigger_words(std::string_view text,
                                                       const std::vector<std::string>& words);

std::vector<RunReport> run_benchmark(const std::vector<Dataset>& datasets, const ModelBackend& backend,
                                     const TriggerTokenSet& triggers, const BenchmarkOptions& options);

/// Table-style summary: Method, then Acc/Len/LR per dataset, then averages.
void write_summary_csv(std::ostream& out, const std::vector<RunReport>& reports);
/// One JSON file per mode plus summary.csv. Returns the files written.
std::vector<std::filesystem::path> write_reports(const std::filesystem::path& dir,
                                                 const std::vector<RunReport>& reports);

/// Trace analysis: per-word trigger counts and the per-trace lengths.
void write_trigger_table(std::ostream& out, const std::map<std::string, std::size_t>& counts);
void write_length_table(std::ostream& out, const std::vector<LengthRecord>& lengths);

}  // namespace cgrs
