#pragma once

#include <vector>

#include "topicflow/corpus.h"
#include "topicflow/rng.h"

namespace topicflow {

// Bag-of-words corpus drawn from known topic-word distributions, used by the
// topic-recovery experiments. Topics own disjoint word blocks with a 1/(1+r)
// within-block rank profile; document d draws every token from topic d % T.
struct SyntheticTopics {
  std::vector<std::vector<double>> topic_word;  // T rows over v_bow, each sums to 1
  std::vector<std::vector<double>> doc_bows;    // token counts, one row per document
  std::vector<int> doc_topics;                  // generating topic per document
};

SyntheticTopics synthetic_topic_corpus(int n_docs, int v_bow, int t_topics,
                                       int tokens_per_doc, Rng& rng);

// Small document-summary pairs for memorization runs: every pair has a
// distinct three-word summary drawn from its document's topic lexicon.
// Supports up to 40 pairs before summaries would repeat.
std::vector<DocumentRecord> overfit_pairs(int n_pairs, Rng& rng);

// Template-generated corpus for end-to-end runs: multi-sentence documents
// over five topic lexicons, each paired with a one-sentence summary built
// from the document's own lead sentence.
std::vector<DocumentRecord> mini_corpus(int n_pairs, Rng& rng);

}  // namespace topicflow
