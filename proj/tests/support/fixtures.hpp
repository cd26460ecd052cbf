// SPDX-License-Identifier: Apache-2.0
// Helpers shared by the unit and acceptance tests.
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "shloss/cleaner.hpp"
#include "shloss/corpus.hpp"
#include "shloss/embedding.hpp"

namespace shloss::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("shloss-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// 512 x 5 note whose rows are e_{(i / 8) mod 4}: every pooled row lies in
/// the first four coordinates, fine-pool row 2 is exactly e_2, and e_4 is
/// orthogonal to all of them.
inline EmbeddingMatrix fixture_note() {
  constexpr std::size_t dim = 5;
  std::vector<double> v(kNoteHiddenRows * dim, 0.0);
  for (std::size_t i = 0; i < kNoteHiddenRows; ++i) v[i * dim + (i / kFineGroupSize) % 4] = 1.0;
  return EmbeddingMatrix(kNoteHiddenRows, dim, std::move(v));
}

inline EmbeddingMatrix fixture_match() { return EmbeddingMatrix(1, 5, {0, 0, 1, 0, 0}); }
inline EmbeddingMatrix fixture_orthogonal() { return EmbeddingMatrix(1, 5, {0, 0, 0, 0, 1}); }

/// Writes dataset.jsonl and embeddings.tsv into `dir`. Record "n1" carries a
/// matching and an orthogonal code; "n2" carries only the orthogonal one.
inline void write_cleaner_fixture(const std::filesystem::path& dir) {
  write_embedding_file((dir / "n1.emb").string(), fixture_note());
  write_embedding_file((dir / "n2.emb").string(), fixture_note());
  write_embedding_file((dir / "match.emb").string(), fixture_match());
  write_embedding_file((dir / "ortho.emb").string(), fixture_orthogonal());
  write_file((dir / "embeddings.tsv").string(),
             "note\tn1\tn1.emb\nnote\tn2\tn2.emb\ncode\tmatch\tmatch.emb\ncode\tortho\tortho.emb\n");
  write_file((dir / "dataset.jsonl").string(),
             "{\"id\":\"n1\",\"text\":\"chest pain\",\"codes\":[\"match\",\"ortho\"]}\n"
             "{\"id\":\"n2\",\"text\":\"short of breath\",\"codes\":[\"ortho\"]}\n");
}

}  // namespace shloss::testing
