#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "p4g/corpus.hpp"
#include "p4g/features.hpp"

namespace p4g::testing {

struct SyntheticSpec {
  size_t dialogues = 40;
  size_t annotated = 20;     // the first N dialogues carry labels
  size_t exchanges = 10;     // turns per side
  size_t repeat_workers = 0; // persuadees reusing an earlier worker id
  uint64_t seed = 7;
  // Sentences draw one label-specific keyword pair, so labels are
  // recoverable from the words alone.
  bool separable = true;
};

// Alternating persuader/persuadee dialogues with labeled sentences,
// persuadee acts, and a full survey record for each side.
Corpus make_corpus(const SyntheticSpec& spec = {});

// Writes the two canonical CSVs into `dir` and returns their paths.
std::pair<std::string, std::string> write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// The label-specific words of make_corpus sentences.
std::vector<std::string> label_words(StrategyLabel label);

// Temporary directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace p4g::testing
