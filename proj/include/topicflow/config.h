#pragma once

#include <string>

#include "topicflow/model.h"
#include "topicflow/ntm.h"
#include "topicflow/training.h"

namespace topicflow {

// Merged settings for one run. Every field has a default; a config file
// overrides defaults and command-line flags override the file.
struct RunConfig {
  unsigned long long seed = 0;

  struct Paths {
    std::string train;
    std::string valid;
    std::string test;
    std::string vocab = "vocab.tsv";
    std::string bow_vocab = "bow_vocab.tsv";
    std::string stopwords = "data/stopwords_en.txt";
    std::string checkpoint = "model.bin";
    std::string ntm_checkpoint = "ntm.bin";
    std::string out_dir = "out";
  } paths;

  struct Corpus {
    int min_count = 1;
    int bow_max_size = 0;  // 0 keeps every eligible token
    int n_max = 256;
    int m_max = 64;
  } corpus;

  NtmConfig ntm;              // v_bow is taken from the built vocabulary
  TransformerConfig summarizer;  // v_tok likewise
  TrainConfig training;

  struct Eval {
    int beam = 8;
    double length_penalty = 1.0;
    int decode_max_len = 64;
    int coherence_window = 110;
    int topic_top_k = 10;
  } eval;
};

// Applies a config file over the current values. The format is chosen by
// extension: ".json" parses as JSON, anything else as a TOML subset
// ([section] headers, key = value, # comments, quoted or bare values).
// Unknown sections or keys and malformed lines raise IoError naming the
// location.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Applies a single "section.key" (or bare "seed") assignment from a string
// value. `where` prefixes error messages. Unknown names raise IoError.
void set_config_value(RunConfig& cfg, const std::string& name, const std::string& value,
                      const std::string& where);

// One row per configurable field: "section.key<TAB>current value". Drives
// help output so every field and default is listed exactly once.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace topicflow
