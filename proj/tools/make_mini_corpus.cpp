// Regenerates data/mini/{train,valid,test}.jsonl (160/20/20 pairs, seed 2024).
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "topicflow/synthetic.h"

using namespace topicflow;

namespace {

void write_split(const std::string& path, const std::vector<DocumentRecord>& records,
                 size_t begin, size_t end) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (size_t i = begin; i < end; ++i) {
    nlohmann::json line = {{"id", records[i].id},
                           {"document", records[i].document},
                           {"summary", records[i].summary}};
    out << line.dump() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data/mini";
  std::filesystem::create_directories(dir);
  Rng rng(2024);
  std::vector<DocumentRecord> records = mini_corpus(200, rng);
  write_split(dir + "/train.jsonl", records, 0, 160);
  write_split(dir + "/valid.jsonl", records, 160, 180);
  write_split(dir + "/test.jsonl", records, 180, 200);
  std::cout << "wrote 160/20/20 pairs under " << dir << "\n";
  return 0;
}
