// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shloss/corpus.hpp"
#include "shloss/embedding.hpp"

namespace shloss {

inline constexpr std::size_t kNoteHiddenRows = 512;
inline constexpr std::size_t kFineGroupSize = 8;     // 512 -> 64 pooled rows
inline constexpr std::size_t kCoarseGroupSize = 16;  // 512 -> 32 pooled rows
inline constexpr double kDefaultSimilarityThreshold = 0.55;

/// dot(u, v) / (|u| |v|). Throws InvalidArgument on mismatched dims or a
/// zero-norm argument.
double cosine(std::span<const double> u, std::span<const double> v);

/// Row j of the result is the mean of source rows [j*g, (j+1)*g).
EmbeddingMatrix pool_groups(const EmbeddingMatrix& hidden, std::size_t group_size);

/// Mean over the description's token embeddings.
std::vector<double> description_embedding(const EmbeddingMatrix& desc);

struct PooledSets {
  EmbeddingMatrix set_a;  // fine groups
  EmbeddingMatrix set_b;  // coarse groups
};

/// Both pooled views of a note's hidden state.
PooledSets pool_note(const EmbeddingMatrix& note_hidden);

/// Best cosine between `desc_vec` and any row of either pooled set.
double similarity_score(const PooledSets& pooled, std::span<const double> desc_vec);

struct CodeScore {
  std::string code;
  double score = 0.0;
  bool kept = false;
};

struct CleanReport {
  std::string record_id;
  std::vector<CodeScore> rows;
};

struct CleanResult {
  Record record;  // may end up with an empty code set
  CleanReport report;
};

/// Keeps the codes whose similarity with the note is strictly above
/// `threshold`. `note_hidden` must have 512 rows; every code needs an entry in
/// `code_descriptions` (InvalidArgument names the missing code otherwise).
CleanResult clean_labels(const Record& record, const EmbeddingMatrix& note_hidden,
                         const std::map<std::string, EmbeddingMatrix>& code_descriptions,
                         double threshold = kDefaultSimilarityThreshold);

/// Same decision rule applied to precomputed scores.
CleanResult clean_labels_from_scores(const Record& record, const std::map<std::string, double>& scores,
                                     double threshold = kDefaultSimilarityThreshold);

void write_clean_report(std::ostream& out, const std::vector<CleanReport>& reports);

}  // namespace shloss
