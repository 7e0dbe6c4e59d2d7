// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cgrs/harness.hpp"
#include "csv.hpp"

namespace cgrs {

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string file_stem(const Mode& mode) {
  std::string out;
  for (char c : mode.label()) {
    if (c == '(') {
      out += '_';
    } else if (c != ')') {
      out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

nlohmann::json RunReport::to_json() const {
  nlohmann::json per_dataset = nlohmann::json::array();
  for (const auto& d : datasets) {
    per_dataset.push_back({{"dataset", d.dataset},
                           {"accuracy", d.accuracy},
                           {"mean_length", d.mean_length},
                           {"length_reduction", optional_number(d.length_reduction)},
                           {"accuracy_per_rep", d.accuracy_per_rep},
                           {"length_per_rep", d.length_per_rep}});
  }
  nlohmann::json lengths = nlohmann::json::array();
  for (const auto& l : length_distribution) {
    lengths.push_back({{"problem_id", l.problem_id}, {"rep", l.repetition}, {"seed", l.seed}, {"tokens", l.tokens}});
  }
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : failures) {
    fails.push_back({{"problem_id", f.problem_id}, {"rep", f.repetition}, {"kind", f.kind}, {"message", f.message}});
  }
  nlohmann::json mode_json = {{"label", mode.label()}};
  switch (mode.kind) {
    case Mode::Kind::kVanilla: mode_json["kind"] = "vanilla"; break;
    case Mode::Kind::kFixedP: mode_json["kind"] = "fixed_p"; mode_json["p"] = mode.value; break;
    case Mode::Kind::kCgrs: mode_json["kind"] = "cgrs"; mode_json["delta"] = mode.value; break;
  }
  return {{"mode", std::move(mode_json)},
          {"accuracy", accuracy},
          {"mean_length", mean_length},
          {"length_reduction", optional_number(length_reduction)},
          {"datasets", std::move(per_dataset)},
          {"trigger_frequencies", trigger_frequencies},
          {"length_distribution", std::move(lengths)},
          {"failures", std::move(fails)},
          {"repetitions", repetitions},
          {"seeds", seeds},
          {"config", config.to_json()}};
}

void write_summary_csv(std::ostream& out, const std::vector<RunReport>& reports) {
  if (reports.empty()) return;
  out << "Method";
  for (const auto& d : reports.front().datasets) {
    out << ',' << detail::csv_field(d.dataset + " Acc") << ',' << detail::csv_field(d.dataset + " Len") << ','
        << detail::csv_field(d.dataset + " LR");
  }
  out << ",AVG Acc,AVG LR\n";
  for (const auto& r : reports) {
    out << detail::csv_field(r.mode.label());
    for (const auto& d : r.datasets) {
      out << ',' << fixed(d.accuracy, 1) << ',' << fixed(d.mean_length, 0) << ','
          << (d.length_reduction ? fixed(*d.length_reduction, 1) : "");
    }
    out << ',' << fixed(r.accuracy, 1) << ',' << (r.length_reduction ? fixed(*r.length_reduction, 1) : "") << '\n';
  }
}

std::vector<std::filesystem::path> write_reports(const std::filesystem::path& dir,
                                                 const std::vector<RunReport>& reports) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& r : reports) {
    auto path = dir / (file_stem(r.mode) + ".json");
    write_file(path, r.to_json().dump(2) + "\n");
    written.push_back(path);
    if (!r.traces.empty()) {
      std::string lines;
      for (const auto& t : r.traces) lines += t.to_json().dump() + "\n";
      auto trace_path = dir / (file_stem(r.mode) + ".traces.jsonl");
      write_file(trace_path, lines);
      written.push_back(trace_path);
    }
  }
  std::ostringstream csv;
  write_summary_csv(csv, reports);
  auto csv_path = dir / "summary.csv";
  write_file(csv_path, csv.str());
  written.push_back(csv_path);
  return written;
}

void write_trigger_table(std::ostream& out, const std::map<std::string, std::size_t>& counts) {
  out << "trigger,count\n";
  for (const auto& [word, count] : counts) out << detail::csv_field(word) << ',' << count << '\n';
}

void write_length_table(std::ostream& out, const std::vector<LengthRecord>& lengths) {
  out << "problem_id,rep,seed,tokens\n";
  for (const auto& l : lengths) {
    out << detail::csv_field(l.problem_id) << ',' << l.repetition << ',' << l.seed << ',' << l.tokens << '\n';
  }
}

}  // namespace cgrs
