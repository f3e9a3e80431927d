#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace topicflow {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram multiset overlap. Empty n-gram sets (input shorter than n)
// give all-zero scores.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest-common-subsequence overlap.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

struct ExampleRouge {
  std::string id;
  RougeScore r1, r2, rl;
};

struct EvalReport {
  // Mean F1 over examples, x100, rounded to 2 decimals.
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  std::vector<ExampleRouge> examples;
};

// Scores candidate/reference text pairs after running both through the
// corpus tokenizer. Ids in the report are the pair indices.
EvalReport evaluate_texts(
    const std::vector<std::pair<std::string, std::string>>& candidate_reference);

// JSON-lines {"id","summary"} reader.
std::unordered_map<std::string, std::string> load_summaries(const std::string& path);

// Aligns two {"id","summary"} files by id and scores them. Ids present in
// only one file raise IoError naming every missing id.
EvalReport evaluate_run(const std::string& outputs_path,
                        const std::string& references_path);

}  // namespace topicflow
