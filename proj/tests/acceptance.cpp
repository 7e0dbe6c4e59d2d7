// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
// exits non-zero if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "cgrs/certainty.hpp"
#include "cgrs/controller.hpp"
#include "cgrs/harness.hpp"
#include "cgrs/lexicon.hpp"
#include "cgrs/suppression.hpp"
#include "cgrs/toy_backend.hpp"
#include "overthinking_oracle.hpp"
#include "reference_sampler.hpp"

using namespace cgrs;
namespace fs = std::filesystem;

namespace {

class Criterion {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  void note(const std::string& text) { notes_ += (notes_.empty() ? "" : "; ") + text; }
  bool failed() const { return failed_; }
  const std::string& notes() const { return notes_; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
  std::string notes_;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

// Every main-stream token sequence produced during the run, for the probe
// isolation check.
std::vector<std::vector<TokenId>>& collected_traces() {
  static std::vector<std::vector<TokenId>> traces;
  return traces;
}

DecodeTrace collect(DecodeTrace t) {
  collected_traces().push_back(t.tokens);
  return t;
}

const ToyBackend& overthinking_model() {
  static const ToyBackend backend(make_overthinking_spec(0.3));
  return backend;
}

const TriggerTokenSet& overthinking_triggers() {
  static const TriggerTokenSet triggers = trigger_set_for(default_trigger_words(), overthinking_model().vocabulary());
  return triggers;
}

DecodeTrace run_toy(std::uint64_t seed, bool suppression, std::optional<double> fixed_p) {
  GenerationConfig config;
  config.seed = seed;
  config.suppression_enabled = suppression;
  config.fixed_p = fixed_p;
  return collect(generate(overthinking_model(), "<q>", config, overthinking_triggers()));
}

// P(Bin(n, 1/2) >= k).
double sign_test_upper_tail(int k, int n) {
  double tail = 0.0;
  for (int i = k; i <= n; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  }
  return tail;
}

TokenDistribution dense(std::vector<double> probs) {
  TokenDistribution d;
  d.probs = std::move(probs);
  return d;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) total += (x = e(rng));
  for (auto& x : p) x /= total;
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void certainty_suite(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> uniform(4, 0.25);
  const std::vector<double> one_hot = {0.0, 1.0, 0.0, 0.0};
  const std::vector<TokenDistribution> all_uniform = {dense(uniform), dense(uniform), dense(uniform)};
  const std::vector<TokenDistribution> all_one_hot = {dense(one_hot), dense(one_hot)};
  const std::vector<TokenDistribution> mixed = {dense(uniform), dense(one_hot)};
  c.expect(std::abs(certainty_score(all_uniform, 4).value) <= 1e-9, "uniform inputs do not give 0");
  c.expect(std::abs(certainty_score(all_one_hot, 4).value - 1.0) <= 1e-9, "one-hot inputs do not give 1");
  c.expect(std::abs(certainty_score(mixed, 4).value - 0.5) <= 1e-9, "uniform + one-hot does not give 0.5");

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t v = 2 + rng() % 40;
    std::vector<TokenDistribution> dists;
    for (std::size_t k = 0, n = 1 + rng() % 6; k < n; ++k) dists.push_back(dense(random_simplex(rng, v)));
    const double nats = certainty_score(dists, v).value;
    const double bits = certainty_score(dists, v, 2.0).value;
    c.expect(std::abs(nats - bits) <= 1e-12, "base dependence at trial " + std::to_string(trial));
    c.expect(nats >= 0.0 && nats <= 1.0, "certainty out of [0,1]: " + fmt(nats));

    // Raising every distribution to a power > 1 lowers its entropy.
    auto sharpened = dists;
    const double power = 1.0 + std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    for (auto& d : sharpened) {
      double total = 0.0;
      for (auto& x : d.probs) total += (x = std::pow(x, power));
      for (auto& x : d.probs) x /= total;
    }
    c.expect(certainty_score(sharpened, v).value >= nats - 1e-12, "sharpening lowered certainty");
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 1.0, "took " + fmt(elapsed) + " s");
}

void suppression_suite(Criterion& c) {
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double certainty = i / 100.0, delta = j / 100.0;
      const double expected = std::max(0.0, (certainty - delta) / (1.0 - delta));
      const double got = suppression_probability(certainty, delta);
      c.expect(std::abs(got - expected) <= 1e-12,
               "grid C=" + fmt(certainty) + " delta=" + fmt(delta) + " gave " + fmt(got));
    }
  }
  const double worked = suppression_probability(0.926, 0.9);
  c.expect(std::abs(worked - 0.26) <= 1e-12, "p(0.926, 0.9) = " + fmt(worked));
  for (int j = 0; j < 100; ++j) {
    const double delta = j / 100.0;
    const double below = suppression_probability(delta - 1e-9 < 0.0 ? 0.0 : delta - 1e-9, delta);
    const double above = suppression_probability(delta + 1e-9, delta);
    c.expect(below == 0.0, "p below delta=" + fmt(delta) + " is " + fmt(below));
    c.expect(suppression_probability(delta, delta) == 0.0, "p at delta=" + fmt(delta) + " is not 0");
    c.expect(above >= 0.0 && above <= 1e-9 / (1.0 - delta) + 1e-15,
             "jump above delta=" + fmt(delta) + ": " + fmt(above));
  }
}

void masking_suite(Criterion& c) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> raw(n);
    for (auto& x : raw) x = normal(rng);
    TriggerTokenSet triggers;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 4 == 0) triggers.insert(static_cast<TokenId>(i), {});
    }
    if (triggers.size() == n) continue;
    const LogitVector logits(raw);
    const auto masked = mask_triggers(logits, triggers);
    const auto probs = softmax(masked.values());
    for (TokenId id : triggers.ids()) c.expect(probs[id] < 1e-9, "trigger probability " + fmt(probs[id]));

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
      if (!triggers.contains(static_cast<TokenId>(i))) kept.push_back(i);
    }
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        const double ratio = probs[kept[a]] / probs[kept[b]];
        const double expected = std::exp(raw[kept[a]] - raw[kept[b]]);
        c.expect(std::abs(ratio - expected) <= 1e-12 * expected, "ratio drift at trial " + std::to_string(trial));
      }
    }

    c.expect(mask_triggers(masked, triggers) == masked, "masking is not idempotent");

    const double shift = normal(rng);
    std::vector<double> shifted_raw(raw);
    for (auto& x : shifted_raw) x += shift;
    const auto shifted = softmax(mask_triggers(LogitVector(shifted_raw), triggers).values());
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(shifted[i] - probs[i]));
    c.expect(worst <= 1e-12, "shift changed the masked distribution by " + fmt(worst));
  }
}

void decode_loop_conformance(Criterion& c) {
  const auto& backend = overthinking_model();
  const auto& triggers = overthinking_triggers();

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto t = run_toy(seed, false, std::nullopt);
    const auto ref = reference::vanilla_sample(backend, t.prompt_tokens, seed, t.config.max_tokens, 0.6, 0.95);
    c.expect(t.tokens == ref, "vanilla run diverges from the reference at seed " + std::to_string(seed));
  }

  std::size_t generated = 0, trigger_count = 0;
  for (std::uint64_t seed = 1000; generated < 10000; ++seed) {
    const auto t = run_toy(seed, true, 1.0);
    generated += t.tokens.size();
    for (TokenId id : t.tokens) trigger_count += triggers.contains(id);
  }
  c.expect(trigger_count == 0, std::to_string(trigger_count) + " triggers under p=1 in " +
                                   std::to_string(generated) + " tokens");

  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto t = run_toy(seed, true, std::nullopt);
    c.expect(t.suppression_decisions.size() == t.tokens.size(), "missing suppression decisions");
    const std::size_t first = t.checkpoint_events.empty() ? t.tokens.size() : t.checkpoint_events.front().step;
    std::size_t next_event = 0;
    double p = 0.0;
    for (const auto& d : t.suppression_decisions) {
      if (d.step <= first) c.expect(d.p == 0.0, "p != 0 before the first checkpoint");
      while (next_event < t.checkpoint_events.size() && t.checkpoint_events[next_event].step < d.step) {
        p = t.checkpoint_events[next_event++].p;
      }
      c.expect(d.p == p, "p changed between checkpoints at seed " + std::to_string(seed));
    }
    for (const auto& e : t.checkpoint_events) {
      const double expected = std::max(0.0, (e.probe.certainty.value - 0.9) / (1.0 - 0.9));
      c.expect(e.p == std::min(1.0, expected), "recorded (C, p) off the rule: C=" + fmt(e.probe.certainty.value) +
                                                   " p=" + fmt(e.p));
    }
  }
}

struct Moments {
  double mean = 0.0;
  double standard_error = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return m;
}

std::optional<std::string> answer_of(const DecodeTrace& t) {
  try {
    return extract_boxed_answer(t.text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void reduction_oracle(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  oracle::Settings none, full;
  none.fixed_p = 0.0;
  full.fixed_p = 1.0;
  const double analytic_none = oracle::expected_length(none);
  const double analytic_full = oracle::expected_length(full);

  std::vector<double> vanilla, forced, guided;
  std::size_t same_answer = 0;
  constexpr std::uint64_t kSeeds = 1000;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto v = run_toy(seed, false, std::nullopt);
    const auto g = run_toy(seed, true, std::nullopt);
    vanilla.push_back(static_cast<double>(v.token_count));
    forced.push_back(static_cast<double>(run_toy(seed, true, 1.0).token_count));
    guided.push_back(static_cast<double>(g.token_count));
    same_answer += answer_of(v) && answer_of(v) == answer_of(g);
  }
  const auto mv = moments(vanilla), mf = moments(forced), mg = moments(guided);
  c.expect(std::abs(mv.mean - analytic_none) <= 3.0 * mv.standard_error,
           "p=0 mean " + fmt(mv.mean) + " vs " + fmt(analytic_none) + " (se " + fmt(mv.standard_error) + ")");
  c.expect(std::abs(mf.mean - analytic_full) <= 3.0 * mf.standard_error,
           "p=1 mean " + fmt(mf.mean) + " vs " + fmt(analytic_full) + " (se " + fmt(mf.standard_error) + ")");
  c.expect(mg.mean > analytic_full && mg.mean < analytic_none, "guided mean " + fmt(mg.mean) + " outside the band");
  c.expect(static_cast<double>(same_answer) >= 0.99 * kSeeds,
           "answers agree on " + std::to_string(same_answer) + " of " + std::to_string(kSeeds) + " seeds");
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 120.0, "took " + fmt(elapsed) + " s");
}

std::vector<std::vector<double>> fixed_p_lengths(const std::vector<double>& ps, std::uint64_t seeds) {
  std::vector<std::vector<double>> lengths(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      lengths[i].push_back(static_cast<double>(run_toy(seed, true, ps[i]).token_count));
    }
  }
  return lengths;
}

void fixed_p_trend(Criterion& c) {
  const std::vector<double> ps = {0.0, 0.25, 0.5, 1.0};

  // Non-increasing at 200 seeds: no consecutive pair may show a significant
  // rise under a one-sided sign test, and the means must not rise.
  const auto lengths = fixed_p_lengths(ps, 200);
  for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
    int shorter = 0, longer = 0;
    for (std::size_t s = 0; s < lengths[i].size(); ++s) {
      shorter += lengths[i + 1][s] < lengths[i][s];
      longer += lengths[i + 1][s] > lengths[i][s];
    }
    const double rise = sign_test_upper_tail(longer, shorter + longer);
    const double fall = sign_test_upper_tail(shorter, shorter + longer);
    c.note("p=" + fmt(ps[i]) + "->" + fmt(ps[i + 1]) + " " + std::to_string(shorter) + "/" +
           std::to_string(longer) + " rise " + fmt(rise) + " fall " + fmt(fall));
    c.expect(rise >= 0.05, "significant rise from p=" + fmt(ps[i]) + " to p=" + fmt(ps[i + 1]));
    c.expect(moments(lengths[i + 1]).mean <= moments(lengths[i]).mean,
             "mean length rose from p=" + fmt(ps[i]) + " to p=" + fmt(ps[i + 1]));
  }

  // Strict decrease. Matched seeds tie on roughly 85% of pairs, so 200 seeds
  // leave this direction at about 60% power per pair; 1000 seeds put it
  // near 1.
  const auto more = fixed_p_lengths(ps, 1000);
  for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
    int shorter = 0, longer = 0;
    for (std::size_t s = 0; s < more[i].size(); ++s) {
      shorter += more[i + 1][s] < more[i][s];
      longer += more[i + 1][s] > more[i][s];
    }
    const double fall = sign_test_upper_tail(shorter, shorter + longer);
    c.expect(fall < 0.05, "no significant fall from p=" + fmt(ps[i]) + " to p=" + fmt(ps[i + 1]) + " (" +
                              std::to_string(shorter) + "/" + std::to_string(longer) + ", " + fmt(fall) + ")");
  }

  const std::vector<int> reported = {5861, 3729, 3266, 2373};
  c.expect(std::is_sorted(reported.rbegin(), reported.rend()), "reported ablation lengths are not decreasing");
}

void probe_isolation(Criterion& c) {
  const auto probe = overthinking_model().tokenize(GenerationConfig{}.probe_prompt);
  const auto& traces = collected_traces();
  c.expect(!traces.empty(), "no traces collected");
  for (const auto& t : traces) {
    c.expect(std::search(t.begin(), t.end(), probe.begin(), probe.end()) == t.end(),
             "a main trace contains the probe prompt");
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Criterion& c) {
  const auto root = fs::temp_directory_path() / "cgrs_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::map<std::string, std::string>> outputs;
  for (const char* run : {"a", "b"}) {
    const auto out = root / run;
    const std::string cmd = std::string("\"") + CGRS_CLI_PATH + "\" run --dataset " CGRS_DATA_DIR
                            "/toy_dataset.jsonl --backend toy:" CGRS_DATA_DIR
                            "/toy_overthinking.json --mode vanilla,fixed-p=0.5,cgrs --seeds 3,4,5 --reps 3"
                            " --parallel 4 --save-traces --out \"" +
                            out.string() + "\" > \"" + (root / (std::string(run) + ".stdout")).string() +
                            "\" 2> /dev/null";
    const int status = std::system(cmd.c_str());
    c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "cgrs run failed");
    std::map<std::string, std::string> files;
    if (fs::exists(out)) {
      for (const auto& entry : fs::directory_iterator(out)) files[entry.path().filename().string()] = slurp(entry.path());
    }
    files["<stdout>"] = slurp(root / (std::string(run) + ".stdout"));
    outputs.push_back(std::move(files));
  }
  c.expect(outputs[0].size() >= 7, "expected reports, summary and traces");
  c.expect(outputs[0] == outputs[1], "report files differ between invocations");
}

// Emits filler until a fixed position, where it all but certainly says
// "Wait" (and otherwise stops), then stops at a second fixed position.
class FixedLengthBackend final : public ModelBackend {
 public:
  FixedLengthBackend() : vocab_({"<eos>", "<q>", " x", "Wait"}) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  BackendCapabilities capabilities() const override { return {}; }
  std::optional<TokenId> eos_token() const override { return 0; }
  TokenDistribution next_distribution(std::span<const TokenId> context) const override {
    const std::size_t generated = context.size() - 1;
    if (generated == kVanillaLength - 1) return dense({1.0, 0.0, 0.0, 0.0});
    if (generated == kMaskedLength - 1) return dense({1e-6, 0.0, 0.0, 1.0 - 1e-6});
    return dense({0.0, 0.0, 1.0, 0.0});
  }

  static constexpr std::size_t kVanillaLength = 5861;
  static constexpr std::size_t kMaskedLength = 3406;

 private:
  Vocabulary vocab_;
};

void harness_metric(Criterion& c) {
  FixedLengthBackend backend;
  const auto triggers = trigger_set_for(default_trigger_words(), backend.vocabulary());
  BenchmarkOptions options;
  options.modes = {Mode::vanilla(), Mode::fixed_p(1.0)};
  options.seeds = {0};
  options.base_config.max_tokens = 8192;
  const std::vector<Dataset> datasets = {{"synthetic", {{"s1", "<q>", "0"}}}};
  const auto reports = run_benchmark(datasets, backend, triggers, options);
  c.expect(reports[0].mean_length == 5861.0, "vanilla Len " + fmt(reports[0].mean_length));
  c.expect(reports[1].mean_length == 3406.0, "method Len " + fmt(reports[1].mean_length));
  c.expect(reports[1].length_reduction && std::abs(*reports[1].length_reduction - 41.9) <= 0.05,
           "LR " + fmt(reports[1].length_reduction.value_or(-1.0)));

  const auto dir = fs::temp_directory_path() / "cgrs_acceptance_metric";
  fs::remove_all(dir);
  write_reports(dir, reports);
  const auto csv = slurp(dir / "summary.csv");
  c.expect(csv.find("\nfixed_p(1),0.0,3406,41.9,0.0,41.9\n") != std::string::npos, "summary row: " + csv);
  const auto json = nlohmann::json::parse(slurp(dir / "fixed_p_1.json"));
  c.expect(std::abs(json["length_reduction"].get<double>() - 41.9) <= 0.05, "report json LR");
}

void lexicon_suite(Criterion& c) {
  const std::set<std::string> but = {"But", "but", "BUT", " But", " but", " BUT"};
  c.expect(expand_variants("But") == but, "expand_variants(\"But\") is not the six forms");

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> tokens = {"<eos>"};
    for (const auto& w : default_trigger_words()) {
      for (const auto& form : expand_variants(w)) {
        if (rng() % 2) tokens.push_back(form);
      }
    }
    for (int i = 0; i < 10; ++i) tokens.push_back("t" + std::to_string(i));
    std::shuffle(tokens.begin() + 1, tokens.end(), rng);
    const Vocabulary vocab(tokens);
    std::vector<std::vector<TokenId>> corpus(1 + rng() % 20);
    for (auto& seq : corpus) {
      for (std::size_t i = 0, n = rng() % 50; i < n; ++i) seq.push_back(static_cast<TokenId>(rng() % vocab.size()));
    }
    const auto words = default_trigger_words();
    std::set<TokenId> previous;
    for (std::size_t min_count = 0; min_count <= 12; ++min_count) {
      const auto ids = build_from_traces(corpus, vocab, words, min_count).triggers.ids();
      if (min_count > 0) {
        c.expect(std::includes(previous.begin(), previous.end(), ids.begin(), ids.end()),
                 "raising min_count added ids at trial " + std::to_string(trial));
      }
      previous = ids;
    }
  }

  TriggerConfig config;
  config.base_words.push_back({"Hold on", TriggerCategory::kContemplationCue});
  config.min_count = 4;
  const auto path = fs::temp_directory_path() / "cgrs_acceptance_triggers.json";
  config.save(path);
  c.expect(TriggerConfig::load(path) == config, "trigger config did not survive a save/load cycle");
  c.expect(TriggerConfig::from_json(config.to_json()) == config, "trigger config json round trip");
  fs::remove(path);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
      {"certainty score oracle suite", certainty_suite},
      {"suppression probability suite", suppression_suite},
      {"trigger masking suite", masking_suite},
      {"decode loop conformance", decode_loop_conformance},
      {"overthinking reduction oracle", reduction_oracle},
      {"fixed-p ablation trend", fixed_p_trend},
      {"probe isolation", probe_isolation},
      {"cli determinism", determinism},
      {"harness length reduction metric", harness_metric},
      {"trigger lexicon suite", lexicon_suite},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion c;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    std::printf("%s %2zu %s (%.2f s)%s%s\n", c.failed() ? "FAIL" : "PASS", i + 1, criteria[i].first.c_str(), elapsed,
                c.failed() ? ": " : "", c.summary().c_str());
    if (!c.notes().empty()) std::printf("        %s\n", c.notes().c_str());
    failed += c.failed();
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
