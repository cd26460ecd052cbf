// SPDX-License-Identifier: Apache-2.0
#include "shloss/embedding.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "shloss/error.hpp"

namespace shloss {

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw Error(std::string("truncated embedding file while reading ") + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (rows_ == 0 || dim_ == 0) throw InvalidArgument("embedding matrix needs rows >= 1 and dim >= 1");
  if (values_.size() != rows_ * dim_) throw InvalidArgument("embedding value count does not match rows*dim");
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("embedding matrix contains a non-finite value");
  }
}

void write_embedding(std::ostream& out, const EmbeddingMatrix& m) {
  out.write(kEmbeddingMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.dim());
  for (double v : m.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

EmbeddingMatrix read_embedding(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw Error("not an embedding file (bad magic)");
  }
  auto version = get_le<std::uint32_t>(in, "version");
  if (version != kEmbeddingVersion) throw Error("unsupported embedding file version " + std::to_string(version));
  auto rows = get_le<std::uint64_t>(in, "rows");
  auto dim = get_le<std::uint64_t>(in, "dim");
  if (rows == 0 || dim == 0 || rows > (std::uint64_t{1} << 32) / dim) {
    throw Error("implausible embedding shape");
  }
  std::vector<double> values(rows * dim);
  for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, "values"));
  return EmbeddingMatrix(rows, dim, std::move(values));
}

void write_embedding_file(const std::string& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file '" + path + "'");
  write_embedding(out, m);
}

EmbeddingMatrix read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file '" + path + "'");
  try {
    return read_embedding(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

EmbeddingManifest read_embedding_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding manifest '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path();
  EmbeddingManifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string kind, id, file;
    if (!std::getline(fields, kind, '\t') || !std::getline(fields, id, '\t') || !std::getline(fields, file)) {
      throw ParseError(lineno, "expected 'note|code<TAB>id<TAB>path'");
    }
    std::filesystem::path p(file);
    if (p.is_relative()) p = base / p;
    if (kind == "note") manifest.notes[id] = p.string();
    else if (kind == "code") manifest.codes[id] = p.string();
    else throw ParseError(lineno, "unknown manifest entry kind '" + kind + "'");
  }
  return manifest;
}

void write_embedding_manifest(std::ostream& out, const EmbeddingManifest& manifest) {
  for (const auto& [id, p] : manifest.notes) out << "note\t" << id << '\t' << p << '\n';
  for (const auto& [id, p] : manifest.codes) out << "code\t" << id << '\t' << p << '\n';
}

}  // namespace shloss
