// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "shloss/segmenter.hpp"

namespace shloss {

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

using LabelSets = std::vector<std::set<std::size_t>>;

/// Per-class TP/FP/FN over the classes in `classes`; every class in the
/// subset gets an entry, even when all counts are zero.
std::map<std::size_t, Counts> confusion_counts(std::span<const std::set<std::size_t>> preds,
                                               std::span<const std::set<std::size_t>> labels,
                                               const std::set<std::size_t>& classes);

Counts total(const std::map<std::size_t, Counts>& per_class);

/// 2 TP / (2 TP + FP + FN), or 0 when the denominator is 0.
double micro_f1(const Counts& c);
double micro_f1(const std::map<std::size_t, Counts>& per_class);

/// Unweighted mean of per-class F1 (0 for an empty map).
double macro_f1(const std::map<std::size_t, Counts>& per_class);

struct ClassScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::uint64_t support = 0;
  Counts counts;
};

ClassScores class_scores(const Counts& c);

struct SegmentScore {
  std::string name;
  std::size_t start_rank = 0, end_rank = 0;
  Counts counts;
  double micro_f1 = 0.0;
};

struct MetricsReport {
  double total_micro_f1 = 0.0;
  double macro_f1 = 0.0;
  Counts total_counts;
  std::vector<SegmentScore> per_segment;    // head first
  std::map<std::size_t, ClassScores> per_class;  // keyed by rank
};

/// Micro F1 over all classes and over each segment's classes.
MetricsReport segmentwise_report(std::span<const std::set<std::size_t>> preds,
                                 std::span<const std::set<std::size_t>> labels, const Segmentation& seg);

/// Aligned text: one header row (Total, Head, Body 1, ..., Tail) and one row
/// of percentages, two decimals.
void write_report_table(std::ostream& out, const std::string& row_name, const MetricsReport& report);

/// Machine-readable: "scope,name,start_rank,end_rank,tp,fp,fn,micro_f1"
/// rows for total and segments, then per-class rows.
void write_report_csv(std::ostream& out, const MetricsReport& report);

/// Several rows (e.g. one per loss family) under one header.
void write_comparison_table(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows);
void write_comparison_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace shloss
