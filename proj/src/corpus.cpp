#include "topicflow/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace topicflow {

namespace {

bool is_space_byte(unsigned char c) { return c < 0x80 && std::isspace(c); }
bool is_punct_byte(unsigned char c) { return c < 0x80 && std::ispunct(c); }

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw IoError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

struct TsvVocab {
  std::vector<std::string> tokens;
  std::vector<long long> counts;
};

std::string vocab_to_tsv(const std::vector<std::string>& tokens,
                         const std::vector<long long>& counts) {
  std::ostringstream out;
  out << "#version=1\n";
  for (size_t i = 0; i < tokens.size(); ++i) {
    out << tokens[i] << '\t' << i << '\t' << counts[i] << '\n';
  }
  return out.str();
}

TsvVocab vocab_from_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty vocabulary file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "#version=1") {
    throw IoError(path + ": expected header '#version=1', got '" + line + "'");
  }
  TsvVocab v;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected token<TAB>id<TAB>count");
    }
    const std::string token = line.substr(0, t1);
    long long id = 0, count = 0;
    try {
      id = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
      count = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_no) + ": malformed id or count");
    }
    if (id != static_cast<long long>(v.tokens.size())) {
      throw IoError(path + ":" + std::to_string(line_no) + ": ids must be dense and in order");
    }
    v.tokens.push_back(token);
    v.counts.push_back(count);
  }
  return v;
}

std::unordered_map<std::string, int> index_tokens(const std::vector<std::string>& tokens,
                                                  const std::string& path) {
  std::unordered_map<std::string, int> ids;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!ids.emplace(tokens[i], static_cast<int>(i)).second) {
      throw IoError(path + ": duplicate token '" + tokens[i] + "'");
    }
  }
  return ids;
}

}  // namespace

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<cls>", "<bos>",
                                                     "<eos>"};
  return kReserved;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_space_byte(c)) {
      flush();
    } else if (is_punct_byte(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw IoError("token id " + std::to_string(id) + " out of range [0," +
                  std::to_string(size()) + ")");
  }
  return tokens[id];
}

void Vocabulary::save(const std::string& path) const {
  write_atomic(path, vocab_to_tsv(tokens, counts));
}

Vocabulary Vocabulary::load(const std::string& path) {
  TsvVocab v = vocab_from_tsv(path);
  const auto& reserved = reserved_tokens();
  if (v.tokens.size() < reserved.size()) {
    throw IoError(path + ": vocabulary smaller than the reserved token set");
  }
  for (size_t i = 0; i < reserved.size(); ++i) {
    if (v.tokens[i] != reserved[i]) {
      throw IoError(path + ": id " + std::to_string(i) + " must be " + reserved[i]);
    }
  }
  Vocabulary vocab;
  vocab.tokens = std::move(v.tokens);
  vocab.counts = std::move(v.counts);
  vocab.ids = index_tokens(vocab.tokens, path);
  return vocab;
}

int BowVocabulary::id_of(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? -1 : it->second;
}

const std::string& BowVocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw IoError("bow id " + std::to_string(id) + " out of range [0," +
                  std::to_string(size()) + ")");
  }
  return tokens[id];
}

void BowVocabulary::save(const std::string& path) const {
  write_atomic(path, vocab_to_tsv(tokens, counts));
}

BowVocabulary BowVocabulary::load(const std::string& path) {
  TsvVocab v = vocab_from_tsv(path);
  BowVocabulary vocab;
  vocab.tokens = std::move(v.tokens);
  vocab.counts = std::move(v.counts);
  vocab.ids = index_tokens(vocab.tokens, path);
  return vocab;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open stopword file " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

std::vector<DocumentRecord> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path);
  std::vector<DocumentRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("document") || !obj["document"].is_string()) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected object with string fields 'id' and 'document'");
    }
    DocumentRecord rec;
    rec.id = obj["id"].get<std::string>();
    rec.document = obj["document"].get<std::string>();
    if (obj.contains("summary")) {
      if (!obj["summary"].is_string()) {
        throw IoError(path + ":" + std::to_string(line_no) + ": 'summary' must be a string");
      }
      rec.summary = obj["summary"].get<std::string>();
    }
    if (rec.document.empty()) {
      throw IoError(path + ":" + std::to_string(line_no) + ": record '" + rec.id +
                    "' has an empty document");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::pair<Vocabulary, BowVocabulary> build_vocabs(
    const std::vector<DocumentRecord>& records, int min_count,
    const std::set<std::string>& stopwords, int bow_max_size) {
  if (records.empty()) throw IoError("build_vocabs: empty corpus");
  if (min_count < 1) throw IoError("build_vocabs: min_count must be >= 1");

  std::map<std::string, long long> freq;
  for (const DocumentRecord& rec : records) {
    for (const std::string& tok : tokenize(rec.document)) ++freq[tok];
    for (const std::string& tok : tokenize(rec.summary)) ++freq[tok];
  }

  std::vector<std::pair<std::string, long long>> entries;
  for (const auto& [tok, n] : freq) {
    if (n >= min_count) entries.emplace_back(tok, n);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const std::string& tok : reserved_tokens()) {
    vocab.tokens.push_back(tok);
    vocab.counts.push_back(0);
  }
  for (const auto& [tok, n] : entries) {
    vocab.tokens.push_back(tok);
    vocab.counts.push_back(n);
  }
  vocab.ids = index_tokens(vocab.tokens, "build_vocabs");

  BowVocabulary bow;
  bow.stopwords = stopwords;
  for (const auto& [tok, n] : entries) {
    if (stopwords.count(tok)) continue;
    if (bow_max_size > 0 && bow.size() >= bow_max_size) break;
    bow.tokens.push_back(tok);
    bow.counts.push_back(n);
  }
  bow.ids = index_tokens(bow.tokens, "build_vocabs");
  return {std::move(vocab), std::move(bow)};
}

EncodedExample encode(const DocumentRecord& record, const Vocabulary& vocab,
                      const BowVocabulary& bow_vocab, int n_max, int m_max) {
  if (n_max <= 1) throw IoError("encode: n_max must exceed 1");
  if (m_max <= 2) throw IoError("encode: m_max must exceed 2");

  EncodedExample ex;
  const std::vector<std::string> doc_toks = tokenize(record.document);

  ex.x_ids.push_back(kClsId);
  for (const std::string& tok : doc_toks) {
    if (static_cast<int>(ex.x_ids.size()) >= n_max) break;
    ex.x_ids.push_back(vocab.id_of(tok));
  }

  ex.y_ids.push_back(kBosId);
  for (const std::string& tok : tokenize(record.summary)) {
    if (static_cast<int>(ex.y_ids.size()) >= m_max - 1) break;
    ex.y_ids.push_back(vocab.id_of(tok));
  }
  ex.y_ids.push_back(kEosId);

  ex.x_bow.assign(bow_vocab.size(), 0.0);
  for (const std::string& tok : doc_toks) {
    const int id = bow_vocab.id_of(tok);
    if (id >= 0) ex.x_bow[id] += 1.0;
  }
  return ex;
}

std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples, int size) {
  if (examples.empty()) throw IoError("make_batches: no examples");
  if (size < 1) throw IoError("make_batches: batch size must be >= 1");

  std::vector<Batch> batches;
  for (size_t start = 0; start < examples.size(); start += size) {
    const size_t end = std::min(examples.size(), start + size);
    Batch b;
    size_t xw = 0, yw = 0;
    for (size_t i = start; i < end; ++i) {
      xw = std::max(xw, examples[i].x_ids.size());
      yw = std::max(yw, examples[i].y_ids.size());
    }
    for (size_t i = start; i < end; ++i) {
      const EncodedExample& ex = examples[i];
      std::vector<int> x = ex.x_ids, y = ex.y_ids;
      std::vector<double> xm(x.size(), 1.0), ym(y.size(), 1.0);
      x.resize(xw, kPadId);
      y.resize(yw, kPadId);
      xm.resize(xw, 0.0);
      ym.resize(yw, 0.0);
      b.x_ids.push_back(std::move(x));
      b.y_ids.push_back(std::move(y));
      b.x_mask.push_back(std::move(xm));
      b.y_mask.push_back(std::move(ym));
      b.x_bow.push_back(ex.x_bow);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::string decode_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kEosId) break;
    if (id == kPadId || id == kClsId || id == kBosId) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token_of(id);
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<DocumentRecord>& records) {
  CorpusStats stats;
  stats.count = records.size();
  if (records.empty()) return stats;
  double doc_total = 0.0, sum_total = 0.0;
  for (const DocumentRecord& rec : records) {
    doc_total += static_cast<double>(tokenize(rec.document).size());
    sum_total += static_cast<double>(tokenize(rec.summary).size());
  }
  stats.mean_doc_len = doc_total / static_cast<double>(records.size());
  stats.mean_summary_len = sum_total / static_cast<double>(records.size());
  return stats;
}

}  // namespace topicflow
