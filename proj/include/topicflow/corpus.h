#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace topicflow {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kBosId = 3;
inline constexpr int kEosId = 4;
inline constexpr int kNumReserved = 5;

// Surface forms for the reserved ids, in id order.
const std::vector<std::string>& reserved_tokens();

// Lowercases, splits on whitespace, and breaks ASCII punctuation into
// single-character tokens. Bytes >= 0x80 are kept as word characters.
std::vector<std::string> tokenize(const std::string& text);

// Token vocabulary with reserved ids PAD=0, UNK=1, CLS=2, BOS=3, EOS=4.
// Content tokens follow, ordered by descending corpus frequency then
// lexicographically.
struct Vocabulary {
  std::vector<std::string> tokens;              // index == id
  std::vector<long long> counts;                // 0 for reserved tokens
  std::unordered_map<std::string, int> ids;

  int size() const { return static_cast<int>(tokens.size()); }
  int id_of(const std::string& token) const;    // UNK for unknown tokens
  const std::string& token_of(int id) const;    // throws IoError out of range
  bool contains(const std::string& token) const { return ids.count(token) > 0; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

// Stopword-filtered vocabulary for bag-of-words features. No reserved ids.
struct BowVocabulary {
  std::vector<std::string> tokens;
  std::vector<long long> counts;
  std::unordered_map<std::string, int> ids;
  std::set<std::string> stopwords;              // the list used to build it

  int size() const { return static_cast<int>(tokens.size()); }
  int id_of(const std::string& token) const;    // -1 for unknown tokens
  const std::string& token_of(int id) const;

  void save(const std::string& path) const;
  static BowVocabulary load(const std::string& path);
};

struct DocumentRecord {
  std::string id;
  std::string document;
  std::string summary;  // empty only for inference-only records
};

struct EncodedExample {
  std::vector<int> x_ids;        // [CLS, tokens...], length <= n_max
  std::vector<int> y_ids;        // [BOS, tokens..., EOS], length <= m_max
  std::vector<double> x_bow;     // counts over the untruncated document
};

// One token per line; blank lines ignored.
std::set<std::string> load_stopwords(const std::string& path);

// JSON-lines input: one object per line with string fields "id", "document"
// and optional "summary". Parse failures and empty documents raise IoError
// naming the line.
std::vector<DocumentRecord> load_jsonl(const std::string& path);

// Builds both vocabularies over document+summary text. Content tokens need
// corpus frequency >= min_count. bow_max_size == 0 means unlimited.
std::pair<Vocabulary, BowVocabulary> build_vocabs(
    const std::vector<DocumentRecord>& records, int min_count,
    const std::set<std::string>& stopwords, int bow_max_size = 0);

EncodedExample encode(const DocumentRecord& record, const Vocabulary& vocab,
                      const BowVocabulary& bow_vocab, int n_max, int m_max);

// A padded batch. Masks are 1.0 at real tokens, 0.0 at padding.
struct Batch {
  std::vector<std::vector<int>> x_ids;
  std::vector<std::vector<int>> y_ids;
  std::vector<std::vector<double>> x_mask;
  std::vector<std::vector<double>> y_mask;
  std::vector<std::vector<double>> x_bow;

  int size() const { return static_cast<int>(x_ids.size()); }
};

// Order-preserving chunking; the last batch may be smaller.
std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples, int size);

// Joins generated ids back into text: stops at EOS, drops PAD/CLS/BOS,
// keeps the "<unk>" surface form.
std::string decode_tokens(const std::vector<int>& ids, const Vocabulary& vocab);

struct CorpusStats {
  std::size_t count = 0;
  double mean_doc_len = 0.0;
  double mean_summary_len = 0.0;
};

CorpusStats corpus_stats(const std::vector<DocumentRecord>& records);

}  // namespace topicflow
