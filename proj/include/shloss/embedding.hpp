// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace shloss {

/// Row-major matrix of embeddings (one row per token position).
///
/// Files store binary32; values are held as double in memory so every
/// reduction runs in 64-bit arithmetic.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Throws InvalidArgument if rows or dim is zero, the value count does not
  /// match, or any value is non-finite.
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

inline constexpr char kEmbeddingMagic[4] = {'S', 'G', 'H', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// Layout: "SGHE", u32 version, u64 rows, u64 dim, rows*dim binary32, all
/// little-endian. Writing rounds values to binary32.
void write_embedding(std::ostream& out, const EmbeddingMatrix& m);
EmbeddingMatrix read_embedding(std::istream& in);

void write_embedding_file(const std::string& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embedding_file(const std::string& path);

/// Maps record ids to note hidden-state files and class ids to description
/// files. Text format, one entry per line:
///
///     note<TAB>record-id<TAB>path
///     code<TAB>class-id<TAB>path
///
/// Relative paths resolve against the manifest's directory.
struct EmbeddingManifest {
  std::map<std::string, std::string> notes;
  std::map<std::string, std::string> codes;
};

EmbeddingManifest read_embedding_manifest(const std::string& path);
void write_embedding_manifest(std::ostream& out, const EmbeddingManifest& manifest);

}  // namespace shloss
