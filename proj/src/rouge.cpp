#include "topicflow/rouge.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "topicflow/corpus.h"

namespace topicflow {

namespace {

RougeScore from_counts(double matched, double candidate_total, double reference_total) {
  RougeScore s;
  if (candidate_total <= 0.0 || reference_total <= 0.0) return s;
  s.precision = matched / candidate_total;
  s.recall = matched / reference_total;
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

std::map<std::string, long long> ngram_counts(const std::vector<std::string>& tokens,
                                              int n) {
  std::map<std::string, long long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n < 1) throw IoError("rouge_n: n must be at least 1");
  std::map<std::string, long long> cand = ngram_counts(candidate, n);
  std::map<std::string, long long> ref = ngram_counts(reference, n);
  long long matched = 0, cand_total = 0, ref_total = 0;
  for (const auto& [key, count] : cand) {
    cand_total += count;
    auto it = ref.find(key);
    if (it != ref.end()) matched += std::min(count, it->second);
  }
  for (const auto& [key, count] : ref) ref_total += count;
  return from_counts(static_cast<double>(matched), static_cast<double>(cand_total),
                     static_cast<double>(ref_total));
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  const size_t nc = candidate.size(), nr = reference.size();
  if (nc == 0 || nr == 0) return {};
  std::vector<long long> prev(nr + 1, 0), cur(nr + 1, 0);
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return from_counts(static_cast<double>(prev[nr]), static_cast<double>(nc),
                     static_cast<double>(nr));
}

EvalReport evaluate_texts(
    const std::vector<std::pair<std::string, std::string>>& candidate_reference) {
  EvalReport report;
  double s1 = 0.0, s2 = 0.0, sl = 0.0;
  for (size_t i = 0; i < candidate_reference.size(); ++i) {
    std::vector<std::string> cand = tokenize(candidate_reference[i].first);
    std::vector<std::string> ref = tokenize(candidate_reference[i].second);
    ExampleRouge row;
    row.id = std::to_string(i);
    row.r1 = rouge_n(cand, ref, 1);
    row.r2 = rouge_n(cand, ref, 2);
    row.rl = rouge_l(cand, ref);
    s1 += row.r1.f1;
    s2 += row.r2.f1;
    sl += row.rl.f1;
    report.examples.push_back(std::move(row));
  }
  if (!report.examples.empty()) {
    const double n = static_cast<double>(report.examples.size());
    report.rouge1 = round2(100.0 * s1 / n);
    report.rouge2 = round2(100.0 * s2 / n);
    report.rougeL = round2(100.0 * sl / n);
  }
  return report;
}

std::unordered_map<std::string, std::string> load_summaries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::unordered_map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("summary") || !obj["summary"].is_string()) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected {\"id\": string, \"summary\": string}");
    }
    const std::string id = obj["id"].get<std::string>();
    if (out.count(id)) {
      throw IoError(path + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    out[id] = obj["summary"].get<std::string>();
  }
  return out;
}

EvalReport evaluate_run(const std::string& outputs_path,
                        const std::string& references_path) {
  auto outputs = load_summaries(outputs_path);
  auto references = load_summaries(references_path);

  std::set<std::string> missing_from_outputs, missing_from_references;
  for (const auto& [id, text] : references) {
    if (!outputs.count(id)) missing_from_outputs.insert(id);
  }
  for (const auto& [id, text] : outputs) {
    if (!references.count(id)) missing_from_references.insert(id);
  }
  if (!missing_from_outputs.empty() || !missing_from_references.empty()) {
    std::string msg = "id mismatch between " + outputs_path + " and " + references_path;
    auto append = [&msg](const std::string& label, const std::set<std::string>& ids) {
      if (ids.empty()) return;
      msg += "; missing from " + label + ":";
      for (const std::string& id : ids) msg += " " + id;
    };
    append("outputs", missing_from_outputs);
    append("references", missing_from_references);
    throw IoError(msg);
  }

  std::vector<std::string> ids;
  ids.reserve(outputs.size());
  for (const auto& [id, text] : outputs) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(ids.size());
  for (const std::string& id : ids) pairs.push_back({outputs[id], references[id]});
  EvalReport report = evaluate_texts(pairs);
  for (size_t i = 0; i < ids.size(); ++i) report.examples[i].id = ids[i];
  return report;
}

}  // namespace topicflow
