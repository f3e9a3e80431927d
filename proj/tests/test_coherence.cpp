#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "topicflow/coherence.h"
#include "topicflow/corpus.h"
#include "topicflow/rng.h"

using namespace topicflow;

namespace {

using Doc = std::vector<std::string>;

// Window counting by explicit enumeration of every window's word set.
WindowCounts oracle_counts(const std::vector<std::string>& tracked,
                           const std::vector<Doc>& docs, int window) {
  WindowCounts out;
  out.words = tracked;
  const int k = static_cast<int>(tracked.size());
  out.joint.assign(k, std::vector<long long>(k, 0));
  for (const Doc& doc : docs) {
    const int len = static_cast<int>(doc.size());
    const int n_windows = std::max(1, len - window + 1);
    for (int w = 0; w < n_windows; ++w) {
      ++out.windows;
      std::set<std::string> seen(doc.begin() + w,
                                 doc.begin() + std::min(len, w + window));
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          if (seen.count(tracked[a]) && seen.count(tracked[b])) ++out.joint[a][b];
        }
      }
    }
  }
  return out;
}

Doc repeat(const std::string& word, int times) { return Doc(times, word); }

}  // namespace

TEST_CASE("window counts match the enumeration oracle") {
  Rng rng(314);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> tracked = {"a", "b", "d"};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Doc> docs;
    const int n_docs = 1 + static_cast<int>(rng.uniform_int(4));
    for (int d = 0; d < n_docs; ++d) {
      Doc doc;
      const int len = static_cast<int>(rng.uniform_int(40));
      for (int i = 0; i < len; ++i) {
        doc.push_back(alphabet[rng.uniform_int(alphabet.size())]);
      }
      docs.push_back(std::move(doc));
    }
    for (int window : {1, 2, 3, 7, 110}) {
      WindowCounts got = count_windows(tracked, docs, window);
      WindowCounts want = oracle_counts(tracked, docs, window);
      CAPTURE(trial);
      CAPTURE(window);
      CHECK(got.windows == want.windows);
      CHECK(got.joint == want.joint);
    }
  }
  CHECK_THROWS_AS(count_windows(tracked, {}, 0), IoError);
}

TEST_CASE("documents shorter than the window form one window") {
  WindowCounts c = count_windows({"a", "b"}, {{"a", "b"}, {"b"}}, 110);
  CHECK(c.windows == 2);
  CHECK(c.joint[0][0] == 1);
  CHECK(c.joint[1][1] == 2);
  CHECK(c.joint[0][1] == 1);
  CHECK(c.joint[1][0] == 1);

  WindowCounts empty_doc = count_windows({"a"}, {{}}, 5);
  CHECK(empty_doc.windows == 1);
  CHECK(empty_doc.joint[0][0] == 0);
}

TEST_CASE("normalized pmi special values") {
  CHECK(npmi_from_counts(0, 5, 5, 10) == -1.0);
  CHECK(npmi_from_counts(0, 0, 5, 10) == -1.0);
  CHECK(npmi_from_counts(3, 3, 3, 0) == -1.0);
  CHECK(npmi_from_counts(10, 10, 10, 10) == 1.0);

  // Independent words: p_ab == p_a * p_b gives 0.
  CHECK(npmi_from_counts(1, 2, 2, 4) == doctest::Approx(0.0).epsilon(1e-9));
  // Perfectly dependent but not ubiquitous: approaches 1.
  CHECK(npmi_from_counts(2, 2, 2, 4) == doctest::Approx(1.0).epsilon(1e-9));
  // A word with itself is maximally coherent.
  CHECK(npmi_from_counts(3, 3, 3, 10) == doctest::Approx(1.0).epsilon(1e-9));

  for (long long j : {1, 2, 3}) {
    const double v = npmi_from_counts(j, 3, 4, 12);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("always co-occurring topic words score near one") {
  std::vector<Doc> docs(30, Doc{"alpha", "beta", "gamma", "filler"});
  CoherenceReport report = cv_coherence({{"alpha", "beta", "gamma"}}, docs, 110);
  REQUIRE(report.topic_scores.size() == 1);
  CHECK(report.topic_scores[0] >= 0.99);
  CHECK(report.mean == report.topic_scores[0]);
}

TEST_CASE("words that never co-occur score low") {
  std::vector<Doc> docs;
  for (int i = 0; i < 20; ++i) {
    docs.push_back(repeat("left", 6));
    docs.push_back(repeat("right", 6));
  }
  CoherenceReport report = cv_coherence({{"left", "right"}}, docs, 110);
  CHECK(report.topic_scores[0] < 0.3);
}

TEST_CASE("a single short document reduces to document co-occurrence") {
  CoherenceReport report = cv_coherence({{"a", "b"}}, {{"a", "c", "b"}}, 110);
  // One window holds both words, so every pair probability is 1.
  CHECK(report.topic_scores[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("absent words are minimally coherent, not an error") {
  std::vector<Doc> docs(10, Doc{"alpha", "beta"});
  CoherenceReport with_ghost = cv_coherence({{"alpha", "ghost"}}, docs, 110);
  CHECK(with_ghost.topic_scores[0] >= 0.0);
  CHECK(with_ghost.topic_scores[0] <= 1.0);
  CoherenceReport paired = cv_coherence({{"alpha", "beta"}}, docs, 110);
  CHECK(with_ghost.topic_scores[0] < paired.topic_scores[0]);
}

TEST_CASE("document order does not change coherence") {
  Rng rng(77);
  std::vector<Doc> docs;
  const std::vector<std::string> alphabet = {"u", "v", "w", "x"};
  for (int d = 0; d < 12; ++d) {
    Doc doc;
    const int len = 3 + static_cast<int>(rng.uniform_int(20));
    for (int i = 0; i < len; ++i) doc.push_back(alphabet[rng.uniform_int(4)]);
    docs.push_back(std::move(doc));
  }
  CoherenceReport a = cv_coherence({{"u", "v", "w"}}, docs, 4);
  std::reverse(docs.begin(), docs.end());
  CoherenceReport b = cv_coherence({{"u", "v", "w"}}, docs, 4);
  CHECK(a.topic_scores == b.topic_scores);
  CHECK(a.mean == b.mean);
}

TEST_CASE("coherence scores follow the hand pipeline") {
  std::vector<Doc> docs = {{"p", "q", "r"}, {"p", "q"}, {"r", "q"}, {"p"}, {"r", "p"}};
  const std::vector<std::string> words = {"p", "q", "r"};
  WindowCounts c = count_windows(words, docs, 110);

  std::vector<std::vector<double>> vec(3, std::vector<double>(3));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      vec[i][j] = npmi_from_counts(c.joint[i][j], c.joint[i][i], c.joint[j][j], c.windows);
    }
  }
  double cos_sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> rest(3, 0.0);
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      for (int k = 0; k < 3; ++k) rest[k] += vec[j][k];
    }
    double dot = 0, na = 0, nb = 0;
    for (int k = 0; k < 3; ++k) {
      dot += vec[i][k] * rest[k];
      na += vec[i][k] * vec[i][k];
      nb += rest[k] * rest[k];
    }
    cos_sum += dot / (std::sqrt(na) * std::sqrt(nb));
  }
  const double want = std::clamp((1.0 + cos_sum / 3.0) / 2.0, 0.0, 1.0);

  CoherenceReport report = cv_coherence({{"p", "q", "r"}}, docs, 110);
  CHECK(report.topic_scores[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("multi-topic reports average per-topic scores") {
  std::vector<Doc> docs(20, Doc{"a", "b", "x"});
  for (int i = 0; i < 20; ++i) docs.push_back({"c", "d", "y"});
  CoherenceReport report = cv_coherence({{"a", "b"}, {"c", "d"}, {"a", "c"}}, docs, 110);
  REQUIRE(report.topic_scores.size() == 3);
  for (double s : report.topic_scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(report.topic_scores[0] >= 0.99);
  CHECK(report.topic_scores[1] >= 0.99);
  CHECK(report.topic_scores[2] < 0.3);
  const double mean =
      (report.topic_scores[0] + report.topic_scores[1] + report.topic_scores[2]) / 3.0;
  CHECK(report.mean == doctest::Approx(mean).epsilon(1e-12));

  CHECK_THROWS_AS(cv_coherence({{"solo"}}, docs, 110), IoError);
}
