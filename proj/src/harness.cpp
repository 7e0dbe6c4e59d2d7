// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include "cgrs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "cgrs/errors.hpp"
#include "cgrs/rng.hpp"

namespace cgrs {

namespace {

AnswerStyle parse_answer_style(const std::string& name, std::size_t line) {
  if (name == "math") return AnswerStyle::kMath;
  if (name == "choice") return AnswerStyle::kChoice;
  throw ParseError("unknown answer_style '" + name + "'", line);
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

/// True when s[0] == '(' is closed by the final character.
bool wrapped_in_parens(std::string_view s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth == 0 && i + 1 < s.size()) return false;
  }
  return depth == 0;
}

std::optional<char> choice_letter(std::string_view answer) {
  std::string c = canonicalize_answer(answer);
  if (c.size() != 1 || !std::isalpha(static_cast<unsigned char>(c[0]))) return std::nullopt;
  return static_cast<char>(std::toupper(static_cast<unsigned char>(c[0])));
}

}  // namespace

std::vector<Problem> parse_dataset(std::istream& in, std::ostream* warn) {
  std::vector<Problem> problems;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
    Problem p;
    try {
      p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      p.prompt = j.at("prompt").get<std::string>();
      const auto& gold = j.at("gold_answer");
      p.gold_answer = gold.is_string() ? gold.get<std::string>() : gold.dump();
      if (j.contains("answer_style")) p.answer_style = parse_answer_style(j["answer_style"].get<std::string>(), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (p.gold_answer.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty gold_answer");
    if (!seen.insert(p.id).second) {
      throw ValidationError("duplicate problem id '" + p.id + "' at line " + std::to_string(line_no));
    }
    problems.push_back(std::move(p));
  }
  if (problems.empty() && warn) *warn << "warning: dataset contains no problems\n";
  return problems;
}

std::vector<Problem> load_dataset(const std::filesystem::path& path, std::ostream* warn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return parse_dataset(in, warn);
}

std::string extract_boxed_answer(std::string_view text) {
  static constexpr std::string_view kOpen = "\\boxed{";
  auto start = text.rfind(kOpen);
  if (start == std::string_view::npos) throw ExtractionError("no \\boxed{ in output");
  std::size_t begin = start + kOpen.size();
  int depth = 1;
  for (std::size_t i = begin; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(begin, i - begin));
  }
  throw ExtractionError("unbalanced braces after last \\boxed{");
}

std::string canonicalize_answer(std::string_view answer) {
  std::string s;
  for (char c : answer) {
    if (!is_space(c)) s += c;
  }
  for (;;) {
    if (wrapped_in_parens(s)) {
      s = s.substr(1, s.size() - 2);
    } else if (!s.empty() && s.front() == '+') {
      s.erase(0, 1);
    } else {
      return s;
    }
  }
}

bool score(std::string_view predicted, std::string_view gold, AnswerStyle style) {
  if (gold.empty()) throw std::invalid_argument("gold answer is empty");
  if (style == AnswerStyle::kChoice) {
    auto p = choice_letter(predicted);
    auto g = choice_letter(gold);
    return p && g && *p == *g;
  }
  return canonicalize_answer(predicted) == canonicalize_answer(gold);
}

Mode Mode::fixed_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fixed p must lie in [0, 1]");
  return {Kind::kFixedP, p};
}

Mode Mode::cgrs(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  return {Kind::kCgrs, delta};
}

Mode Mode::parse(std::string_view text, double default_delta) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw std::invalid_argument("bad number in mode '" + std::string(text) + "'");
    }
    return v;
  };
  if (text == "vanilla") return vanilla();
  if (text == "cgrs") return cgrs(default_delta);
  if (text.rfind("cgrs=", 0) == 0) return cgrs(number(text.substr(5)));
  if (text.rfind("fixed-p=", 0) == 0) return fixed_p(number(text.substr(8)));
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

std::string Mode::label() const {
  switch (kind) {
    case Kind::kVanilla: return "vanilla";
    case Kind::kFixedP: return "fixed_p(" + shortest(value) + ")";
    case Kind::kCgrs: return "cgrs(" + shortest(value) + ")";
  }
  return "unknown";
}

GenerationConfig Mode::configure(GenerationConfig base) const {
  base.fixed_p.reset();
  switch (kind) {
    case Kind::kVanilla:
      base.suppression_enabled = false;
      break;
    case Kind::kFixedP:
      base.suppression_enabled = true;
      base.fixed_p = value;
      break;
    case Kind::kCgrs:
      base.suppression_enabled = true;
      base.delta = value;
      break;
  }
  return base;
}

double length_reduction(double vanilla_len, double method_len) {
  if (!(vanilla_len > 0.0)) throw std::invalid_argument("vanilla length must be positive");
  return (vanilla_len - method_len) / vanilla_len * 100.0;
}

std::map<std::string, std::size_t> count_trigger_words(std::string_view text,
                                                       const std::vector<std::string>& words) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };
  const std::string haystack = lower(text);
  std::map<std::string, std::size_t> counts;
  for (const auto& word : words) {
    const std::string needle = lower(word);
    std::size_t n = 0;
    if (!needle.empty()) {
      for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
        bool left = pos == 0 || !word_char(haystack[pos - 1]);
        std::size_t end = pos + needle.size();
        bool right = end == haystack.size() || !word_char(haystack[end]);
        if (left && right) ++n;
      }
    }
    counts[word] = n;
  }
  return counts;
}

namespace {

struct Job {
  std::size_t dataset = 0;
  std::size_t rep = 0;
  std::size_t problem = 0;
};

struct Outcome {
  std::size_t tokens = 0;
  bool correct = false;
  std::optional<ProblemFailure> failure;
  std::string text;
  std::optional<DecodeTrace> trace;
};

Outcome run_one(const ModelBackend& backend, const TriggerTokenSet& triggers, const Problem& problem,
                const GenerationConfig& config, std::size_t rep, bool keep_trace) {
  Outcome out;
  Decoder decoder(backend, triggers, config, problem.prompt);
  try {
    while (!decoder.finished()) decoder.next_token();
  } catch (const BackendError& e) {
    out.failure = ProblemFailure{problem.id, rep, "backend", e.what()};
  }
  DecodeTrace trace = decoder.finish();
  out.tokens = trace.token_count;
  out.text = trace.text;
  if (!out.failure) {
    try {
      out.correct = score(extract_boxed_answer(trace.text), problem.gold_answer, problem.answer_style);
    } catch (const ExtractionError& e) {
      out.failure = ProblemFailure{problem.id, rep, "unparsable", e.what()};
    }
  }
  if (keep_trace) out.trace = std::move(trace);
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

RunReport run_mode(const std::vector<Dataset>& datasets, const ModelBackend& backend, const TriggerTokenSet& triggers,
                   const BenchmarkOptions& options, const Mode& mode) {
  const GenerationConfig base = mode.configure(options.base_config);

  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      for (std::size_t i = 0; i < datasets[d].problems.size(); ++i) jobs.push_back({d, r, i});
    }
  }
  auto seed_of = [&](const Job& job) { return derive_seed(options.seeds[job.rep], job.problem); };

  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const Job& job = jobs[k];
        GenerationConfig config = base;
        config.seed = seed_of(job);
        outcomes[k] = run_one(backend, triggers, datasets[job.dataset].problems[job.problem], config, job.rep,
                              options.keep_traces);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.parallelism, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  RunReport report;
  report.mode = mode;
  report.repetitions = options.repetitions;
  report.seeds = options.seeds;
  report.config = base;
  for (const auto& w : options.trigger_words) report.trigger_frequencies[w] = 0;

  for (std::size_t d = 0; d < datasets.size(); ++d) {
    DatasetMetrics m;
    m.dataset = datasets[d].name;
    const std::size_t n = datasets[d].problems.size();
    std::vector<std::size_t> correct(options.repetitions, 0), tokens(options.repetitions, 0);
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].dataset != d) continue;
      correct[jobs[k].rep] += outcomes[k].correct ? 1 : 0;
      tokens[jobs[k].rep] += outcomes[k].tokens;
    }
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      m.accuracy_per_rep.push_back(n ? 100.0 * static_cast<double>(correct[r]) / static_cast<double>(n) : 0.0);
      m.length_per_rep.push_back(n ? static_cast<double>(tokens[r]) / static_cast<double>(n) : 0.0);
    }
    m.accuracy = mean(m.accuracy_per_rep);
    m.mean_length = mean(m.length_per_rep);
    report.datasets.push_back(std::move(m));
  }

  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    Outcome& o = outcomes[k];
    report.length_distribution.push_back(
        {datasets[job.dataset].problems[job.problem].id, job.rep, seed_of(job), o.tokens});
    for (const auto& [word, count] : count_trigger_words(o.text, options.trigger_words)) {
      report.trigger_frequencies[word] += count;
    }
    if (o.failure) report.failures.push_back(*o.failure);
    if (o.trace) report.traces.push_back(std::move(*o.trace));
  }

  std::vector<double> accs, lens;
  for (const auto& m : report.datasets) {
    accs.push_back(m.accuracy);
    lens.push_back(m.mean_length);
  }
  report.accuracy = mean(accs);
  report.mean_length = mean(lens);
  return report;
}

}  // namespace

std::vector<RunReport> run_benchmark(const std::vector<Dataset>& datasets, const ModelBackend& backend,
                                     const TriggerTokenSet& triggers, const BenchmarkOptions& options) {
  if (options.repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
  if (options.seeds.size() != options.repetitions) {
    throw std::invalid_argument("expected one seed per repetition (" + std::to_string(options.repetitions) +
                                "), got " + std::to_string(options.seeds.size()));
  }
  if (options.modes.empty()) throw std::invalid_argument("no modes requested");
  options.base_config.validate();

  std::vector<RunReport> reports;
  for (const auto& mode : options.modes) reports.push_back(run_mode(datasets, backend, triggers, options, mode));

  auto vanilla = std::find_if(reports.begin(), reports.end(),
                              [](const RunReport& r) { return r.mode.kind == Mode::Kind::kVanilla; });
  if (vanilla == reports.end()) return reports;
  for (auto& report : reports) {
    std::vector<double> reductions;
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      const double base_len = vanilla->datasets[d].mean_length;
      if (base_len > 0.0) {
        report.datasets[d].length_reduction = length_reduction(base_len, report.datasets[d].mean_length);
        reductions.push_back(*report.datasets[d].length_reduction);
      }
    }
    if (!reductions.empty()) report.length_reduction = mean(reductions);
  }
  return reports;
}

}  // namespace cgrs
