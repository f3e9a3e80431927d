#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "topicflow/beam.h"
#include "topicflow/coherence.h"
#include "topicflow/config.h"
#include "topicflow/corpus.h"
#include "topicflow/model.h"
#include "topicflow/ntm.h"
#include "topicflow/ops.h"
#include "topicflow/rouge.h"
#include "topicflow/tensor.h"
#include "topicflow/training.h"

namespace topicflow {
namespace {

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// Emits either to stdout or, when a path is given, atomically to that file.
void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    write_text_atomic(path, content);
  }
}

// Options shared by every subcommand. Dedicated flags funnel their raw string
// values into flag_values so one code path applies types, errors, and the
// defaults < config file < --set < flags precedence.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flag_values;
};

void bind_value(CLI::App* sc, Common& c, const std::string& flag, const std::string& dotted,
                const std::string& desc) {
  sc->add_option_function<std::string>(
      flag, [&c, dotted](const std::string& v) { c.flag_values.emplace_back(dotted, v); },
      desc + " [" + dotted + "]");
}

void bind_switch(CLI::App* sc, Common& c, const std::string& flag, const std::string& dotted,
                 const std::string& desc) {
  sc->add_flag_function(
      flag,
      [&c, dotted](int64_t count) {
        if (count > 0) c.flag_values.emplace_back(dotted, "true");
      },
      desc + " [" + dotted + "]");
}

void add_common(CLI::App* sc, Common& c) {
  sc->add_option("--config", c.config_path, "configuration file (.json parses as JSON, else TOML)");
  sc->add_option("--set", c.sets, "override one configuration key as section.key=value (repeatable)");
  bind_value(sc, c, "--seed", "seed", "seed for every random stream");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (const char* env = std::getenv("TOPICFLOW_SEED")) {
    set_config_value(cfg, "seed", env, "TOPICFLOW_SEED");
  }
  if (!c.config_path.empty()) apply_config_file(cfg, c.config_path);
  for (const std::string& item : c.sets) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw IoError("--set expects section.key=value, got '" + item + "'");
    }
    set_config_value(cfg, item.substr(0, eq), item.substr(eq + 1), "--set");
  }
  for (const auto& [name, value] : c.flag_values) {
    set_config_value(cfg, name, value, "--" + name);
  }
  return cfg;
}

std::string config_listing() {
  std::string out = "Configuration keys and defaults (config file, --set, or the bracketed flags):\n";
  for (const auto& [name, value] : config_entries(RunConfig{})) {
    out += "  " + name + " = " + (value.empty() ? "\"\"" : value) + "\n";
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& flag, const std::string& raw) {
  std::vector<int> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw IoError(flag + ": expected comma-separated positive integers, got '" + raw + "'");
    }
  }
  if (out.empty()) throw IoError(flag + ": empty list");
  return out;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.training;
  t.seed = cfg.seed;
  t.validate();
  return t;
}

std::vector<EncodedExample> encode_records(const std::vector<DocumentRecord>& records,
                                           const Vocabulary& vocab, const BowVocabulary& bow,
                                           const RunConfig& cfg) {
  std::vector<EncodedExample> out;
  out.reserve(records.size());
  for (const DocumentRecord& r : records) {
    out.push_back(encode(r, vocab, bow, cfg.corpus.n_max, cfg.corpus.m_max));
  }
  return out;
}

std::vector<std::string> summaries_of(const std::vector<DocumentRecord>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const DocumentRecord& r : records) out.push_back(r.summary);
  return out;
}

// Mean posterior pushed through the flow; the deterministic mixture used
// whenever a single document is summarized or inspected.
Tensor mean_theta(const NtmModel& ntm, const std::vector<double>& x_bow) {
  Tensor bow = Tensor::from({1, static_cast<int>(x_bow.size())}, x_bow);
  auto [mu, log_sigma] = ntm.encode_bow(bow);
  (void)log_sigma;
  return ntm.topic_mixture(ntm.apply_flow(mu).first);
}

int cmd_build_vocab(const RunConfig& cfg) {
  const std::vector<DocumentRecord> records = load_jsonl(cfg.paths.train);
  const std::set<std::string> stopwords = load_stopwords(cfg.paths.stopwords);
  auto [vocab, bow] = build_vocabs(records, cfg.corpus.min_count, stopwords,
                                   cfg.corpus.bow_max_size);
  vocab.save(cfg.paths.vocab);
  bow.save(cfg.paths.bow_vocab);
  std::printf("token vocabulary: %d entries -> %s\n", vocab.size(), cfg.paths.vocab.c_str());
  std::printf("bow vocabulary: %d entries -> %s\n", bow.size(), cfg.paths.bow_vocab.c_str());
  return 0;
}

int cmd_pretrain(const RunConfig& cfg) {
  const Vocabulary vocab = Vocabulary::load(cfg.paths.vocab);
  const BowVocabulary bow_vocab = BowVocabulary::load(cfg.paths.bow_vocab);
  const std::vector<DocumentRecord> records = load_jsonl(cfg.paths.train);
  std::vector<std::vector<double>> bows;
  bows.reserve(records.size());
  for (const DocumentRecord& r : records) {
    bows.push_back(encode(r, vocab, bow_vocab, cfg.corpus.n_max, cfg.corpus.m_max).x_bow);
  }

  NtmConfig ncfg = cfg.ntm;
  ncfg.v_bow = bow_vocab.size();
  NtmModel model(ncfg, Rng(cfg.seed).derive("init-ntm"));

  std::filesystem::create_directories(cfg.paths.out_dir);
  std::ofstream metrics(cfg.paths.out_dir + "/pretrain_metrics.csv");
  const PretrainResult res = pretrain_ntm(model, bows, train_config(cfg), &metrics);

  model.save(cfg.paths.ntm_checkpoint);
  nlohmann::json j{{"epochs", res.epoch_loss.size()},
                   {"final_loss", res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back()},
                   {"aborted", res.aborted},
                   {"checkpoint", cfg.paths.ntm_checkpoint}};
  std::cout << j.dump() << "\n";
  return 0;
}

struct LoadedSplits {
  Vocabulary vocab;
  BowVocabulary bow_vocab;
  std::vector<DocumentRecord> train, valid, test;
};

LoadedSplits load_splits(const RunConfig& cfg) {
  LoadedSplits s;
  s.vocab = Vocabulary::load(cfg.paths.vocab);
  s.bow_vocab = BowVocabulary::load(cfg.paths.bow_vocab);
  s.train = load_jsonl(cfg.paths.train);
  if (!cfg.paths.valid.empty()) s.valid = load_jsonl(cfg.paths.valid);
  if (!cfg.paths.test.empty()) s.test = load_jsonl(cfg.paths.test);
  return s;
}

JointData joint_data(const LoadedSplits& s, const RunConfig& cfg) {
  JointData data;
  data.train = encode_records(s.train, s.vocab, s.bow_vocab, cfg);
  data.valid = encode_records(s.valid, s.vocab, s.bow_vocab, cfg);
  data.test = encode_records(s.test, s.vocab, s.bow_vocab, cfg);
  data.valid_refs = summaries_of(s.valid);
  data.test_refs = summaries_of(s.test);
  data.vocab = &s.vocab;
  data.decode_max_len = cfg.eval.decode_max_len;
  return data;
}

int cmd_train(const RunConfig& cfg, const std::string& sweep_flows,
              const std::string& sweep_topics) {
  const LoadedSplits splits = load_splits(cfg);
  const JointData data = joint_data(splits, cfg);
  const TrainConfig tcfg = train_config(cfg);

  if (!sweep_flows.empty() || !sweep_topics.empty()) {
    const std::vector<int> flows =
        sweep_flows.empty() ? std::vector<int>{cfg.ntm.k_flows}
                            : parse_int_list("--sweep-flows", sweep_flows);
    const std::vector<int> topics =
        sweep_topics.empty() ? std::vector<int>{cfg.ntm.t_topics}
                             : parse_int_list("--sweep-topics", sweep_topics);

    std::printf("%-14s", "topics/flows");
    for (int k : flows) std::printf("  %18d", k);
    std::printf("\n");
    for (int t : topics) {
      std::printf("%-14d", t);
      for (int k : flows) {
        NtmConfig ncfg = cfg.ntm;
        ncfg.v_bow = splits.bow_vocab.size();
        ncfg.t_topics = t;
        ncfg.k_flows = k;
        NtmModel ntm(ncfg, Rng(cfg.seed).derive("init-ntm"));
        TransformerConfig scfg = cfg.summarizer;
        scfg.v_tok = splits.vocab.size();
        scfg.t_topics = t;
        SummarizerModel model(scfg, Rng(cfg.seed).derive("init-sum"));
        const JointResult res = train_joint(ntm, model, data, tcfg);
        char cell[64];
        if (res.has_test) {
          std::snprintf(cell, sizeof cell, "%.2f/%.2f/%.2f", res.test_rouge1, res.test_rouge2,
                        res.test_rougeL);
        } else {
          std::snprintf(cell, sizeof cell, "-");
        }
        std::printf("  %18s", cell);
        std::fflush(stdout);
      }
      std::printf("\n");
    }
    return 0;
  }

  NtmModel ntm;
  if (!cfg.paths.ntm_checkpoint.empty() && std::filesystem::exists(cfg.paths.ntm_checkpoint)) {
    ntm = NtmModel::load(cfg.paths.ntm_checkpoint);
    std::fprintf(stderr, "loaded topic model %s (T=%d, K=%d)\n", cfg.paths.ntm_checkpoint.c_str(),
                 ntm.cfg.t_topics, ntm.cfg.k_flows);
  } else {
    NtmConfig ncfg = cfg.ntm;
    ncfg.v_bow = splits.bow_vocab.size();
    ntm = NtmModel(ncfg, Rng(cfg.seed).derive("init-ntm"));
  }

  TransformerConfig scfg = cfg.summarizer;
  scfg.v_tok = splits.vocab.size();
  scfg.t_topics = ntm.cfg.t_topics;
  SummarizerModel model(scfg, Rng(cfg.seed).derive("init-sum"));

  std::filesystem::create_directories(cfg.paths.out_dir);
  std::ofstream metrics(cfg.paths.out_dir + "/metrics.csv");
  const JointResult res = train_joint(ntm, model, data, tcfg, &metrics, cfg.paths.out_dir);

  save_joint_checkpoint(cfg.paths.checkpoint, ntm, model);
  nlohmann::json j{{"steps", res.step_loss.size()},
                   {"final_loss", res.step_loss.empty() ? 0.0 : res.step_loss.back()},
                   {"evals", res.evals.size()},
                   {"retained", res.retained_steps.size()},
                   {"aborted", res.aborted},
                   {"checkpoint", cfg.paths.checkpoint}};
  if (res.has_test) {
    j["test_loss"] = res.test_loss;
    j["rouge1"] = res.test_rouge1;
    j["rouge2"] = res.test_rouge2;
    j["rougeL"] = res.test_rougeL;
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_summarize(const RunConfig& cfg, const std::string& input, const std::string& output,
                  bool greedy) {
  auto [ntm, model] = load_joint_checkpoint(cfg.paths.checkpoint);
  const Vocabulary vocab = Vocabulary::load(cfg.paths.vocab);
  const BowVocabulary bow_vocab = BowVocabulary::load(cfg.paths.bow_vocab);
  const std::vector<DocumentRecord> records = load_jsonl(input);

  NoGradGuard guard;
  const GatingMode mode = cfg.training.gating;
  std::string out;
  for (const DocumentRecord& r : records) {
    const EncodedExample ex = encode(r, vocab, bow_vocab, cfg.corpus.n_max, cfg.corpus.m_max);
    const Tensor theta = mean_theta(ntm, ex.x_bow);
    const std::vector<double> x_mask(ex.x_ids.size(), 1.0);
    const EncoderStates gated = model.encoder_gate(model.encode(ex.x_ids, x_mask), theta, mode);
    const BeamResult best =
        greedy ? greedy_decode(model, gated, theta, mode, cfg.eval.decode_max_len)
               : beam_search(model, gated, theta, mode, cfg.eval.beam, cfg.eval.decode_max_len,
                             cfg.eval.length_penalty);
    nlohmann::json j{{"id", r.id},
                     {"summary", decode_tokens(best.tokens, vocab)},
                     {"score", best.score}};
    out += j.dump() + "\n";
  }
  emit(output, out);
  return 0;
}

int cmd_eval(const std::string& outputs, const std::string& references,
             const std::string& per_example, const std::string& out_json) {
  const EvalReport report = evaluate_run(outputs, references);
  nlohmann::json j{{"rouge1", report.rouge1}, {"rouge2", report.rouge2},
                   {"rougeL", report.rougeL}};
  std::cout << j.dump() << "\n";
  if (!out_json.empty()) write_text_atomic(out_json, j.dump() + "\n");
  if (!per_example.empty()) {
    std::string csv = "id,rouge1,rouge2,rougeL\n";
    char row[256];
    for (const ExampleRouge& e : report.examples) {
      std::snprintf(row, sizeof row, "%s,%.2f,%.2f,%.2f\n", e.id.c_str(), e.r1.f1 * 100.0,
                    e.r2.f1 * 100.0, e.rl.f1 * 100.0);
      csv += row;
    }
    write_text_atomic(per_example, csv);
  }
  return 0;
}

int cmd_topics(const RunConfig& cfg, const std::string& docs_path, const std::string& out_json) {
  NtmModel ntm;
  try {
    auto both = load_joint_checkpoint(cfg.paths.checkpoint);
    ntm = std::move(both.first);
  } catch (const IoError&) {
    ntm = NtmModel::load(cfg.paths.checkpoint);
  }
  const BowVocabulary bow_vocab = BowVocabulary::load(cfg.paths.bow_vocab);
  const auto tops = ntm.top_words(bow_vocab, cfg.eval.topic_top_k);

  nlohmann::json topics = nlohmann::json::array();
  std::vector<std::vector<std::string>> word_lists;
  for (size_t t = 0; t < tops.size(); ++t) {
    nlohmann::json words = nlohmann::json::array();
    nlohmann::json weights = nlohmann::json::array();
    std::vector<std::string> list;
    for (const auto& [word, weight] : tops[t]) {
      words.push_back(word);
      weights.push_back(weight);
      list.push_back(word);
    }
    word_lists.push_back(std::move(list));
    topics.push_back({{"topic", t}, {"words", words}, {"weights", weights}});
  }

  nlohmann::json j{{"topics", topics}};
  if (!docs_path.empty()) {
    std::vector<std::vector<std::string>> documents;
    for (const DocumentRecord& r : load_jsonl(docs_path)) {
      documents.push_back(tokenize(r.document));
    }
    const CoherenceReport coherence =
        cv_coherence(word_lists, documents, cfg.eval.coherence_window);
    for (size_t t = 0; t < coherence.topic_scores.size(); ++t) {
      j["topics"][t]["coherence"] = coherence.topic_scores[t];
    }
    j["mean_coherence"] = coherence.mean;
  }
  emit(out_json, j.dump() + "\n");
  return 0;
}

int cmd_stats(const std::string& input) {
  const CorpusStats stats = corpus_stats(load_jsonl(input));
  nlohmann::json j{{"count", stats.count},
                   {"mean_doc_len", stats.mean_doc_len},
                   {"mean_summary_len", stats.mean_summary_len}};
  std::cout << j.dump() << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"topic-guided abstractive summarizer"};
  app.require_subcommand(1);
  app.footer(config_listing());

  Common c_vocab, c_pre, c_train, c_sum, c_eval, c_topics, c_stats;

  CLI::App* sc_vocab = app.add_subcommand("build-vocab", "build token and bag-of-words vocabularies");
  add_common(sc_vocab, c_vocab);
  bind_value(sc_vocab, c_vocab, "--train", "paths.train", "training JSONL");
  bind_value(sc_vocab, c_vocab, "--stopwords", "paths.stopwords", "stopword list, one per line");
  bind_value(sc_vocab, c_vocab, "--vocab", "paths.vocab", "token vocabulary output");
  bind_value(sc_vocab, c_vocab, "--bow-vocab", "paths.bow_vocab", "bow vocabulary output");
  bind_value(sc_vocab, c_vocab, "--min-count", "corpus.min_count", "minimum corpus frequency");
  bind_value(sc_vocab, c_vocab, "--bow-max-size", "corpus.bow_max_size",
             "bow vocabulary cap, 0 for unlimited");

  CLI::App* sc_pre = app.add_subcommand("pretrain-ntm", "pretrain the topic model alone");
  add_common(sc_pre, c_pre);
  bind_value(sc_pre, c_pre, "--train", "paths.train", "training JSONL");
  bind_value(sc_pre, c_pre, "--vocab", "paths.vocab", "token vocabulary");
  bind_value(sc_pre, c_pre, "--bow-vocab", "paths.bow_vocab", "bow vocabulary");
  bind_value(sc_pre, c_pre, "--out", "paths.ntm_checkpoint", "checkpoint output");
  bind_value(sc_pre, c_pre, "--out-dir", "paths.out_dir", "metrics directory");
  bind_value(sc_pre, c_pre, "--topics", "ntm.topics", "topic count");
  bind_value(sc_pre, c_pre, "--flows", "ntm.flows", "flow chain length");
  bind_value(sc_pre, c_pre, "--epochs", "training.max_epochs", "pretraining epochs");
  bind_value(sc_pre, c_pre, "--batch-size", "training.batch_size", "batch size");
  bind_value(sc_pre, c_pre, "--lr", "training.lr_ntm", "learning rate");
  bind_value(sc_pre, c_pre, "--optimizer", "training.optimizer", "adam or adadelta");

  std::string sweep_flows, sweep_topics;
  CLI::App* sc_train = app.add_subcommand("train", "train the summarizer jointly with the topic model");
  add_common(sc_train, c_train);
  bind_value(sc_train, c_train, "--train", "paths.train", "training JSONL");
  bind_value(sc_train, c_train, "--valid", "paths.valid", "validation JSONL");
  bind_value(sc_train, c_train, "--test", "paths.test", "test JSONL");
  bind_value(sc_train, c_train, "--vocab", "paths.vocab", "token vocabulary");
  bind_value(sc_train, c_train, "--bow-vocab", "paths.bow_vocab", "bow vocabulary");
  bind_value(sc_train, c_train, "--ntm-checkpoint", "paths.ntm_checkpoint",
             "pretrained topic model to start from (fresh when absent)");
  bind_value(sc_train, c_train, "--checkpoint", "paths.checkpoint", "joint checkpoint output");
  bind_value(sc_train, c_train, "--out-dir", "paths.out_dir", "metrics and checkpoint directory");
  bind_value(sc_train, c_train, "--steps", "training.max_steps", "optimization steps");
  bind_value(sc_train, c_train, "--batch-size", "training.batch_size", "batch size");
  bind_value(sc_train, c_train, "--eval-interval", "training.eval_interval",
             "steps between validations, 0 disables");
  bind_value(sc_train, c_train, "--lambda", "training.lambda_ntm", "topic loss weight");
  bind_value(sc_train, c_train, "--lr", "training.lr_joint", "learning rate");
  bind_value(sc_train, c_train, "--gating", "training.gating", "on|off|force_zero|force_one");
  bind_value(sc_train, c_train, "--theta-mode", "training.theta_mode", "mean or sample");
  bind_switch(sc_train, c_train, "--freeze-ntm", "training.freeze_ntm",
              "keep topic model parameters fixed");
  bind_value(sc_train, c_train, "--topics", "ntm.topics", "topic count (fresh topic model only)");
  bind_value(sc_train, c_train, "--flows", "ntm.flows", "flow chain length (fresh topic model only)");
  sc_train->add_option("--sweep-flows", sweep_flows,
                       "comma-separated flow lengths; with --sweep-topics prints a scores grid");
  sc_train->add_option("--sweep-topics", sweep_topics, "comma-separated topic counts for the grid");

  std::string sum_input, sum_output;
  bool sum_greedy = false;
  CLI::App* sc_sum = app.add_subcommand("summarize", "generate summaries with a trained model");
  add_common(sc_sum, c_sum);
  sc_sum->add_option("--input", sum_input, "JSONL documents to summarize")->required();
  sc_sum->add_option("--output", sum_output, "output JSONL (stdout when omitted)");
  sc_sum->add_flag("--greedy", sum_greedy, "greedy decoding instead of beam search");
  bind_value(sc_sum, c_sum, "--checkpoint", "paths.checkpoint", "joint checkpoint");
  bind_value(sc_sum, c_sum, "--vocab", "paths.vocab", "token vocabulary");
  bind_value(sc_sum, c_sum, "--bow-vocab", "paths.bow_vocab", "bow vocabulary");
  bind_value(sc_sum, c_sum, "--beam", "eval.beam", "beam width");
  bind_value(sc_sum, c_sum, "--max-len", "eval.decode_max_len", "generation length cap");
  bind_value(sc_sum, c_sum, "--length-penalty", "eval.length_penalty", "score normalization power");
  bind_value(sc_sum, c_sum, "--gating", "training.gating", "gate mode used for decoding");

  std::string eval_outputs, eval_references, eval_per_example, eval_out;
  CLI::App* sc_eval = app.add_subcommand("eval", "score generated summaries against references");
  add_common(sc_eval, c_eval);
  sc_eval->add_option("--outputs", eval_outputs, "JSONL with id and summary")->required();
  sc_eval->add_option("--references", eval_references, "JSONL with id and summary")->required();
  sc_eval->add_option("--per-example", eval_per_example, "per-example scores CSV output");
  sc_eval->add_option("--out", eval_out, "also write the JSON report here");

  std::string topics_docs, topics_out;
  CLI::App* sc_topics = app.add_subcommand("topics", "dump top topic words, optionally with coherence");
  add_common(sc_topics, c_topics);
  bind_value(sc_topics, c_topics, "--checkpoint", "paths.checkpoint",
             "topic model or joint checkpoint");
  bind_value(sc_topics, c_topics, "--bow-vocab", "paths.bow_vocab", "bow vocabulary");
  bind_value(sc_topics, c_topics, "--k", "eval.topic_top_k", "words per topic");
  bind_value(sc_topics, c_topics, "--window", "eval.coherence_window",
             "sliding window for coherence");
  sc_topics->add_option("--docs", topics_docs, "JSONL corpus for coherence scoring");
  sc_topics->add_option("--out", topics_out, "write the JSON here instead of stdout");

  std::string stats_input;
  CLI::App* sc_stats = app.add_subcommand("stats", "corpus size and length summary");
  add_common(sc_stats, c_stats);
  sc_stats->add_option("--input", stats_input, "JSONL corpus")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (app.got_subcommand(sc_vocab)) return cmd_build_vocab(resolve(c_vocab));
  if (app.got_subcommand(sc_pre)) return cmd_pretrain(resolve(c_pre));
  if (app.got_subcommand(sc_train)) return cmd_train(resolve(c_train), sweep_flows, sweep_topics);
  if (app.got_subcommand(sc_sum)) {
    return cmd_summarize(resolve(c_sum), sum_input, sum_output, sum_greedy);
  }
  if (app.got_subcommand(sc_eval)) {
    resolve(c_eval);
    return cmd_eval(eval_outputs, eval_references, eval_per_example, eval_out);
  }
  if (app.got_subcommand(sc_topics)) return cmd_topics(resolve(c_topics), topics_docs, topics_out);
  if (app.got_subcommand(sc_stats)) {
    resolve(c_stats);
    return cmd_stats(stats_input);
  }
  return 1;
}

}  // namespace
}  // namespace topicflow

int main(int argc, char** argv) {
  try {
    return topicflow::run(argc, argv);
  } catch (const topicflow::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const topicflow::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const topicflow::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
