#include "topicflow/coherence.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "topicflow/corpus.h"

namespace topicflow {

WindowCounts count_windows(const std::vector<std::string>& tracked,
                           const std::vector<std::vector<std::string>>& documents,
                           int window) {
  if (window < 1) throw IoError("count_windows: window must be at least 1");
  WindowCounts out;
  out.words = tracked;
  const int k = static_cast<int>(tracked.size());
  out.joint.assign(k, std::vector<long long>(k, 0));
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < k; ++i) index[tracked[i]] = i;

  std::vector<int> in_window(k, 0);
  std::vector<int> present;
  for (const std::vector<std::string>& doc : documents) {
    const int len = static_cast<int>(doc.size());
    std::vector<int> ids(len, -1);
    for (int i = 0; i < len; ++i) {
      auto it = index.find(doc[i]);
      if (it != index.end()) ids[i] = it->second;
    }
    const int span = std::min(window, len);
    const int n_windows = std::max(1, len - window + 1);
    std::fill(in_window.begin(), in_window.end(), 0);
    for (int i = 0; i < span; ++i) {
      if (ids[i] >= 0) ++in_window[ids[i]];
    }
    for (int w = 0; w < n_windows; ++w) {
      ++out.windows;
      present.clear();
      for (int i = 0; i < k; ++i) {
        if (in_window[i] > 0) present.push_back(i);
      }
      for (size_t a = 0; a < present.size(); ++a) {
        for (size_t b = a; b < present.size(); ++b) {
          ++out.joint[present[a]][present[b]];
          if (a != b) ++out.joint[present[b]][present[a]];
        }
      }
      if (w + 1 < n_windows) {
        if (ids[w] >= 0) --in_window[ids[w]];
        if (ids[w + window] >= 0) ++in_window[ids[w + window]];
      }
    }
  }
  return out;
}

double npmi_from_counts(long long joint, long long count_a, long long count_b,
                        long long windows) {
  if (windows <= 0 || count_a <= 0 || count_b <= 0 || joint <= 0) return -1.0;
  const double n = static_cast<double>(windows);
  const double p_ab = static_cast<double>(joint) / n;
  if (p_ab >= 1.0) return 1.0;
  const double p_a = static_cast<double>(count_a) / n;
  const double p_b = static_cast<double>(count_b) / n;
  const double value = std::log(p_ab / (p_a * p_b)) / -std::log(p_ab + 1e-12);
  return std::clamp(value, -1.0, 1.0);
}

CoherenceReport cv_coherence(const std::vector<std::vector<std::string>>& topic_words,
                             const std::vector<std::vector<std::string>>& documents,
                             int window) {
  std::vector<std::string> tracked;
  std::unordered_map<std::string, int> index;
  for (const std::vector<std::string>& words : topic_words) {
    if (words.size() < 2) {
      throw IoError("cv_coherence: every topic needs at least two words");
    }
    for (const std::string& w : words) {
      if (index.emplace(w, static_cast<int>(tracked.size())).second) tracked.push_back(w);
    }
  }
  WindowCounts counts = count_windows(tracked, documents, window);

  CoherenceReport report;
  for (const std::vector<std::string>& words : topic_words) {
    const int m = static_cast<int>(words.size());
    std::vector<int> ids(m);
    for (int i = 0; i < m; ++i) ids[i] = index.at(words[i]);

    // NPMI vector of each word over the topic's own word set.
    std::vector<std::vector<double>> vec(m, std::vector<double>(m));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        vec[i][j] = npmi_from_counts(counts.joint[ids[i]][ids[j]],
                                     counts.joint[ids[i]][ids[i]],
                                     counts.joint[ids[j]][ids[j]], counts.windows);
      }
    }
    double cos_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      std::vector<double> rest(m, 0.0);
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        for (int c = 0; c < m; ++c) rest[c] += vec[j][c];
      }
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int c = 0; c < m; ++c) {
        dot += vec[i][c] * rest[c];
        na += vec[i][c] * vec[i][c];
        nb += rest[c] * rest[c];
      }
      cos_sum += na > 0.0 && nb > 0.0 ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    }
    const double score = (1.0 + cos_sum / m) / 2.0;
    report.topic_scores.push_back(std::clamp(score, 0.0, 1.0));
  }
  double total = 0.0;
  for (double s : report.topic_scores) total += s;
  report.mean = report.topic_scores.empty()
                    ? 0.0
                    : total / static_cast<double>(report.topic_scores.size());
  return report;
}

}  // namespace topicflow
