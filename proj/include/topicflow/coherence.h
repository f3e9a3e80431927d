#pragma once

#include <string>
#include <vector>

namespace topicflow {

// Boolean sliding-window co-occurrence counts over a tokenized corpus.
// joint[i][j] is the number of windows containing both words i and j
// (symmetric; the diagonal counts windows containing the word at all).
// Documents shorter than the window contribute a single window.
struct WindowCounts {
  std::vector<std::string> words;
  std::vector<std::vector<long long>> joint;
  long long windows = 0;
};

WindowCounts count_windows(const std::vector<std::string>& tracked,
                           const std::vector<std::vector<std::string>>& documents,
                           int window);

// Normalized pointwise mutual information from window counts, clamped to
// [-1, 1]. Zero marginal or joint counts give -1; a pair seen in every
// window gives 1.
double npmi_from_counts(long long joint, long long count_a, long long count_b,
                        long long windows);

struct CoherenceReport {
  std::vector<double> topic_scores;  // each in [0, 1]
  double mean = 0.0;
};

// Sliding-window coherence of each topic's top words against the reference
// corpus: NPMI vector of every word over the topic's word set, cosine of
// each vector against the sum of the others, mean cosine mapped to [0, 1]
// by (1 + cos) / 2. Words absent from the corpus count as never
// co-occurring; topics need at least two words.
CoherenceReport cv_coherence(const std::vector<std::vector<std::string>>& topic_words,
                             const std::vector<std::vector<std::string>>& documents,
                             int window = 110);

}  // namespace topicflow
