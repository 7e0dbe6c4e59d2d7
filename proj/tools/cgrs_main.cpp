// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: benchmark runs, lexicon building, trace analysis.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cgrs/errors.hpp"
#include "cgrs/harness.hpp"
#include "cgrs/lexicon.hpp"
#include "cgrs/remote_backend.hpp"
#include "cgrs/toy_backend.hpp"

namespace {

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

std::unique_ptr<cgrs::ModelBackend> make_backend(const std::string& spec, const std::string& vocab_path) {
  if (spec.rfind("toy:", 0) == 0) {
    return std::make_unique<cgrs::ToyBackend>(cgrs::ToyModelSpec::load(spec.substr(4)));
  }
  if (spec == "remote") {
    if (vocab_path.empty()) throw std::invalid_argument("--backend remote needs --vocab");
    return std::make_unique<cgrs::RemoteBackend>(cgrs::RemoteConfig::from_env(), cgrs::Vocabulary::load(vocab_path));
  }
  throw std::invalid_argument("unknown backend '" + spec + "' (expected toy:<spec.json> or remote)");
}

std::vector<cgrs::DecodeTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<cgrs::DecodeTrace> traces;
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw cgrs::ParseError(path.string() + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& t : j) traces.push_back(cgrs::DecodeTrace::from_json(t));
    } else {
      traces.push_back(cgrs::DecodeTrace::from_json(j));
    }
    return traces;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      traces.push_back(cgrs::DecodeTrace::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw cgrs::ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return traces;
}

std::vector<std::string> base_word_names(const cgrs::TriggerConfig& config) {
  std::vector<std::string> words;
  for (const auto& w : config.base_words) words.push_back(w.base);
  return words;
}

struct RunArgs {
  std::vector<std::string> datasets;
  std::string backend;
  std::string vocab;
  std::vector<std::string> modes = {"vanilla", "cgrs"};
  double delta = 0.9;
  std::vector<std::string> seeds;
  std::size_t reps = 0;
  std::size_t max_tokens = 4096;
  std::string out;
  std::string triggers;
  std::size_t parallel = 1;
  bool save_traces = false;
  double temperature = 0.6;
  double top_p = 0.95;
};

int run_command(const RunArgs& args) {
  std::vector<cgrs::Dataset> datasets;
  for (const auto& path : args.datasets) {
    datasets.push_back({std::filesystem::path(path).stem().string(), cgrs::load_dataset(path, &std::cerr)});
  }
  auto backend = make_backend(args.backend, args.vocab);

  cgrs::BenchmarkOptions options;
  for (const auto& m : split_commas(args.modes)) options.modes.push_back(cgrs::Mode::parse(m, args.delta));
  for (const auto& s : split_commas(args.seeds)) options.seeds.push_back(std::stoull(s));
  options.repetitions = args.reps;
  if (options.seeds.empty()) {
    if (options.repetitions == 0) options.repetitions = 1;
    for (std::size_t i = 0; i < options.repetitions; ++i) options.seeds.push_back(i);
  } else if (options.repetitions == 0) {
    options.repetitions = options.seeds.size();
  }
  options.base_config.max_tokens = args.max_tokens;
  options.base_config.delta = args.delta;
  options.base_config.temperature = args.temperature;
  options.base_config.top_p = args.top_p;
  options.parallelism = args.parallel;
  options.keep_traces = args.save_traces;

  cgrs::TriggerConfig trigger_config = args.triggers.empty() ? cgrs::TriggerConfig{} : cgrs::TriggerConfig::load(args.triggers);
  options.trigger_words = base_word_names(trigger_config);
  const auto triggers = cgrs::trigger_set_for(trigger_config.base_words, backend->vocabulary());
  if (triggers.empty()) std::cerr << "warning: no trigger word maps to a single token\n";

  const auto reports = cgrs::run_benchmark(datasets, *backend, triggers, options);
  for (const auto& path : cgrs::write_reports(args.out, reports)) std::cerr << "wrote " << path.string() << '\n';
  cgrs::write_summary_csv(std::cout, reports);
  return 0;
}

int lexicon_build(const std::string& traces_dir, const std::string& vocab_path, std::size_t min_count,
                  const std::string& config_path, const std::string& out_path) {
  const auto vocab = cgrs::Vocabulary::load(vocab_path);
  cgrs::TriggerConfig config = config_path.empty() ? cgrs::TriggerConfig{} : cgrs::TriggerConfig::load(config_path);

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(traces_dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<cgrs::TokenId>> sequences;
  for (const auto& f : files) {
    for (auto& t : read_traces(f)) sequences.push_back(std::move(t.tokens));
  }

  const auto lexicon = cgrs::build_from_traces(sequences, vocab, config.base_words, min_count);
  if (out_path.empty()) {
    cgrs::write_frequency_csv(std::cout, lexicon.frequencies);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    cgrs::write_frequency_csv(out, lexicon.frequencies);
  }
  std::cerr << lexicon.triggers.size() << " trigger ids kept from " << sequences.size() << " traces\n";
  return 0;
}

int analyze(const std::string& trace_path, const std::string& config_path, const std::string& out_dir) {
  const auto traces = read_traces(trace_path);
  cgrs::TriggerConfig config = config_path.empty() ? cgrs::TriggerConfig{} : cgrs::TriggerConfig::load(config_path);
  const auto words = base_word_names(config);

  std::map<std::string, std::size_t> counts;
  for (const auto& w : words) counts[w] = 0;
  std::vector<cgrs::LengthRecord> lengths;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (const auto& [word, n] : cgrs::count_trigger_words(traces[i].text, words)) counts[word] += n;
    lengths.push_back({std::to_string(i), 0, traces[i].config.seed, traces[i].token_count});
  }

  if (out_dir.empty()) {
    cgrs::write_trigger_table(std::cout, counts);
    std::cout << '\n';
    cgrs::write_length_table(std::cout, lengths);
    return 0;
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream trig(std::filesystem::path(out_dir) / "trigger_frequencies.csv");
  std::ofstream len(std::filesystem::path(out_dir) / "length_distribution.csv");
  if (!trig || !len) throw std::runtime_error("cannot write into " + out_dir);
  cgrs::write_trigger_table(trig, counts);
  cgrs::write_length_table(len, lengths);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trigger suppression driven by answer certainty"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Benchmark decoding modes on JSONL datasets");
  run_cmd->add_option("--dataset", run.datasets, "JSONL dataset (repeatable)")->required();
  run_cmd->add_option("--backend", run.backend, "toy:<spec.json> or remote")->required();
  run_cmd->add_option("--vocab", run.vocab, "Vocabulary file for the remote backend");
  run_cmd->add_option("--mode", run.modes, "vanilla, fixed-p=<p>, cgrs (repeatable or comma separated)");
  run_cmd->add_option("--delta", run.delta, "Certainty threshold");
  run_cmd->add_option("--seeds", run.seeds, "Comma separated seeds, one per repetition");
  run_cmd->add_option("--reps", run.reps, "Repetitions");
  run_cmd->add_option("--max-tokens", run.max_tokens, "Generation budget per problem");
  run_cmd->add_option("--out", run.out, "Report directory")->required();
  run_cmd->add_option("--triggers", run.triggers, "Trigger config JSON");
  run_cmd->add_option("--parallel", run.parallel, "Concurrent problems");
  run_cmd->add_option("--temperature", run.temperature, "Sampling temperature");
  run_cmd->add_option("--top-p", run.top_p, "Nucleus mass");
  run_cmd->add_flag("--save-traces", run.save_traces, "Write decode traces next to the reports");

  auto* lexicon_cmd = app.add_subcommand("lexicon", "Trigger lexicon tools");
  lexicon_cmd->require_subcommand(1);
  std::string traces_dir, vocab_path, lex_config, lex_out;
  std::size_t min_count = 1;
  auto* build_cmd = lexicon_cmd->add_subcommand("build", "Count trigger ids in decode traces");
  build_cmd->add_option("--traces", traces_dir, "Directory of trace files")->required();
  build_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  build_cmd->add_option("--min-count", min_count, "Drop ids seen fewer times");
  build_cmd->add_option("--config", lex_config, "Trigger config JSON");
  build_cmd->add_option("--out", lex_out, "CSV output (default stdout)");

  std::string trace_file, analyze_config, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Trigger-frequency and length tables for traces");
  analyze_cmd->add_option("--trace", trace_file, "Trace file (.jsonl or .json)")->required();
  analyze_cmd->add_option("--triggers", analyze_config, "Trigger config JSON");
  analyze_cmd->add_option("--out", analyze_out, "Directory for CSV tables (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_command(run);
    if (*build_cmd) return lexicon_build(traces_dir, vocab_path, min_count, lex_config, lex_out);
    if (*analyze_cmd) return analyze(trace_file, analyze_config, analyze_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
