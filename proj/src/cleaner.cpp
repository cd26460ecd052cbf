// SPDX-License-Identifier: Apache-2.0
#include "shloss/cleaner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "shloss/error.hpp"

namespace shloss {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidArgument("cosine: dimension mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw InvalidArgument("cosine: zero-norm vector");
  return dot / (std::sqrt(uu) * std::sqrt(vv));
}

EmbeddingMatrix pool_groups(const EmbeddingMatrix& hidden, std::size_t group_size) {
  if (group_size == 0 || hidden.rows() % group_size != 0) {
    throw InvalidArgument("pool_groups: " + std::to_string(hidden.rows()) + " rows not divisible by group size " +
                          std::to_string(group_size));
  }
  const std::size_t groups = hidden.rows() / group_size;
  const std::size_t dim = hidden.dim();
  std::vector<double> out(groups * dim, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    double* dst = out.data() + g * dim;
    for (std::size_t k = 0; k < group_size; ++k) {
      auto src = hidden.row(g * group_size + k);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t d = 0; d < dim; ++d) dst[d] /= static_cast<double>(group_size);
  }
  return EmbeddingMatrix(groups, dim, std::move(out));
}

std::vector<double> description_embedding(const EmbeddingMatrix& desc) {
  return pool_groups(desc, desc.rows()).values();
}

PooledSets pool_note(const EmbeddingMatrix& note_hidden) {
  return {pool_groups(note_hidden, kFineGroupSize), pool_groups(note_hidden, kCoarseGroupSize)};
}

double similarity_score(const PooledSets& pooled, std::span<const double> desc_vec) {
  double best = -std::numeric_limits<double>::infinity();
  for (const EmbeddingMatrix* set : {&pooled.set_a, &pooled.set_b}) {
    for (std::size_t i = 0; i < set->rows(); ++i) best = std::max(best, cosine(set->row(i), desc_vec));
  }
  return best;
}

CleanResult clean_labels_from_scores(const Record& record, const std::map<std::string, double>& scores,
                                     double threshold) {
  CleanResult result{record, {record.id, {}}};
  result.record.codes.clear();
  for (const auto& code : record.codes) {
    auto it = scores.find(code);
    if (it == scores.end()) throw InvalidArgument("no similarity score for code '" + code + "'");
    bool kept = it->second > threshold;
    if (kept) result.record.codes.insert(code);
    result.report.rows.push_back({code, it->second, kept});
  }
  return result;
}

CleanResult clean_labels(const Record& record, const EmbeddingMatrix& note_hidden,
                         const std::map<std::string, EmbeddingMatrix>& code_descriptions, double threshold) {
  if (note_hidden.rows() != kNoteHiddenRows) {
    throw InvalidArgument("record '" + record.id + "': note hidden state has " + std::to_string(note_hidden.rows()) +
                          " rows, expected " + std::to_string(kNoteHiddenRows));
  }
  const PooledSets pooled = pool_note(note_hidden);
  std::map<std::string, double> scores;
  for (const auto& code : record.codes) {
    auto it = code_descriptions.find(code);
    if (it == code_descriptions.end()) throw InvalidArgument("no description embedding for code '" + code + "'");
    scores[code] = similarity_score(pooled, description_embedding(it->second));
  }
  return clean_labels_from_scores(record, scores, threshold);
}

void write_clean_report(std::ostream& out, const std::vector<CleanReport>& reports) {
  out << "record\tcode\tscore\tkept\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      out << rep.record_id << '\t' << row.code << '\t' << row.score << '\t' << (row.kept ? 1 : 0) << '\n';
    }
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace shloss
