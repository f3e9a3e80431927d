#include "topicflow/synthetic.h"

#include <array>
#include <cstdio>
#include <string>

namespace topicflow {

namespace {

constexpr std::array<std::array<const char*, 10>, 5> kNouns = {{
    {"nebula", "galaxy", "comet", "quasar", "pulsar", "meteor", "orbit", "lander",
     "aurora", "eclipse"},
    {"tariff", "market", "equity", "bond", "yield", "broker", "dividend", "ledger",
     "audit", "surplus"},
    {"enzyme", "protein", "neuron", "genome", "cortex", "synapse", "plasma", "tissue",
     "antigen", "microbe"},
    {"voltage", "circuit", "diode", "sensor", "router", "kernel", "cache", "compiler",
     "packet", "array"},
    {"sonata", "tempo", "chorus", "melody", "rhythm", "octave", "timbre", "chord",
     "quartet", "encore"},
}};

constexpr std::array<const char*, 8> kVerbs = {
    "tracks", "shifts", "absorbs", "signals", "follows", "alters", "drives", "echoes"};

constexpr std::array<const char*, 8> kAdjectives = {
    "steady", "faint", "rapid", "dense", "quiet", "bright", "narrow", "stable"};

int draw_index(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform();
  for (int i = 0; i < static_cast<int>(cumulative.size()); ++i) {
    if (u < cumulative[i]) return i;
  }
  return static_cast<int>(cumulative.size()) - 1;
}

std::string pair_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04d", prefix, i);
  return buf;
}

}  // namespace

SyntheticTopics synthetic_topic_corpus(int n_docs, int v_bow, int t_topics,
                                       int tokens_per_doc, Rng& rng) {
  if (n_docs < 1 || t_topics < 1 || tokens_per_doc < 1 || v_bow < t_topics) {
    throw IoError("synthetic_topic_corpus: degenerate corpus shape");
  }
  const int block = v_bow / t_topics;

  SyntheticTopics out;
  out.topic_word.assign(t_topics, std::vector<double>(v_bow, 0.0));
  std::vector<std::vector<double>> cumulative(t_topics, std::vector<double>(block));
  for (int t = 0; t < t_topics; ++t) {
    double norm = 0.0;
    for (int r = 0; r < block; ++r) norm += 1.0 / (1.0 + r);
    double running = 0.0;
    for (int r = 0; r < block; ++r) {
      const double p = 1.0 / (1.0 + r) / norm;
      out.topic_word[t][t * block + r] = p;
      running += p;
      cumulative[t][r] = running;
    }
    cumulative[t][block - 1] = 1.0;
  }

  out.doc_bows.assign(n_docs, std::vector<double>(v_bow, 0.0));
  out.doc_topics.resize(n_docs);
  for (int d = 0; d < n_docs; ++d) {
    const int t = d % t_topics;
    out.doc_topics[d] = t;
    for (int k = 0; k < tokens_per_doc; ++k) {
      const int r = draw_index(rng, cumulative[t]);
      out.doc_bows[d][t * block + r] += 1.0;
    }
  }
  return out;
}

std::vector<DocumentRecord> overfit_pairs(int n_pairs, Rng& rng) {
  if (n_pairs < 1 || n_pairs > 40) {
    throw IoError("overfit_pairs: supports 1..40 distinct pairs");
  }
  std::vector<DocumentRecord> out;
  out.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const auto& lex = kNouns[i % 5];
    const char* a = lex[i % 8];
    const char* b = lex[(i / 8 + 2) % 8];
    const char* filler1 = lex[rng.uniform_int(10)];
    const char* filler2 = lex[rng.uniform_int(10)];
    const char* verb = kVerbs[rng.uniform_int(kVerbs.size())];
    const char* adj = kAdjectives[rng.uniform_int(kAdjectives.size())];

    DocumentRecord rec;
    rec.id = pair_id("pair", i);
    rec.document = std::string("the ") + adj + " " + a + " " + verb + " the " + b +
                   " while the " + filler1 + " holds near the " + filler2;
    rec.summary = std::string(a) + " " + b + " brief";
    out.push_back(rec);
  }
  return out;
}

std::vector<DocumentRecord> mini_corpus(int n_pairs, Rng& rng) {
  if (n_pairs < 1) throw IoError("mini_corpus: need at least one pair");
  std::vector<DocumentRecord> out;
  out.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const auto& lex = kNouns[i % 5];
    std::string doc;
    std::string lead_subject, lead_object, lead_verb;
    const int sentences = 3 + static_cast<int>(rng.uniform_int(2));
    for (int s = 0; s < sentences; ++s) {
      const char* subject = lex[rng.uniform_int(10)];
      const char* object = lex[rng.uniform_int(10)];
      const char* verb = kVerbs[rng.uniform_int(kVerbs.size())];
      const char* adj = kAdjectives[rng.uniform_int(kAdjectives.size())];
      if (s == 0) {
        lead_subject = subject;
        lead_object = object;
        lead_verb = verb;
      }
      if (!doc.empty()) doc += " ";
      doc += std::string("the ") + adj + " " + subject + " " + verb + " the " +
             object + " .";
    }
    DocumentRecord rec;
    rec.id = pair_id("mini", i);
    rec.document = doc;
    rec.summary =
        "the " + lead_subject + " " + lead_verb + " the " + lead_object + " .";
    out.push_back(rec);
  }
  return out;
}

}  // namespace topicflow
