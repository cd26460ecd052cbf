// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shloss/corpus.hpp"

namespace shloss {

inline constexpr double kDefaultEta = 0.5;

/// Population standard deviation (divides by n). Zero for a singleton.
double population_stddev(std::span<const double> values);

/// Start index (0-based) of the tail segment of `frequencies`, found by
/// binary search for the leftmost suffix whose population standard deviation
/// stays within `eta` times the last frequency. A suffix exactly at the limit
/// is accepted.
///
/// `frequencies` must be non-empty and non-increasing; `eta` in (0, 1].
std::size_t segment_tail(std::span<const double> frequencies, double eta);

/// Contiguous block of ranks [start_rank, end_rank] (1-based, inclusive).
struct Segment {
  std::size_t start_rank = 0;
  std::size_t end_rank = 0;
  double sigma = 0.0;
  double min_frequency = 0.0;

  std::size_t size() const noexcept { return end_rank - start_rank + 1; }
  bool contains(std::size_t rank) const noexcept { return rank >= start_rank && rank <= end_rank; }
  bool operator==(const Segment&) const = default;
};

/// Partition of ranks 1..C into segments, head first.
class Segmentation {
 public:
  Segmentation() = default;
  /// Validates contiguity and coverage of 1..C.
  Segmentation(double eta, std::vector<Segment> segments);

  /// One segment spanning every class; the layout of an unsegmented model.
  static Segmentation single(std::span<const double> frequencies);

  double eta() const noexcept { return eta_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  std::size_t num_classes() const noexcept { return segments_.empty() ? 0 : segments_.back().end_rank; }
  const Segment& operator[](std::size_t r) const { return segments_.at(r); }

  /// Number of classes in segment r.
  std::size_t class_count(std::size_t r) const { return segments_.at(r).size(); }
  /// Number of classes in the segments before r.
  std::size_t offset(std::size_t r) const { return segments_.at(r).start_rank - 1; }

  /// 0-based segment index holding `rank`.
  std::size_t segment_of(std::size_t rank) const;

  /// "Head", "Body 1", ..., "Tail".
  std::string segment_name(std::size_t r) const;

  bool operator==(const Segmentation&) const = default;

 private:
  double eta_ = kDefaultEta;
  std::vector<Segment> segments_;
  std::vector<std::size_t> segment_of_rank_;
};

/// Repeatedly strips the tail segment until no classes remain.
Segmentation segment_all(std::span<const double> frequencies, double eta = kDefaultEta);

/// Per-segment slice of a full label, for one segment's model.
struct SegmentLabel {
  std::size_t segment_index = 0;
  std::vector<std::uint8_t> bits;
};

/// `full_label` is a dense 0/1 vector over ranks 1..C.
SegmentLabel project_label(std::span<const std::uint8_t> full_label, const Segmentation& seg, std::size_t r);

/// Per-segment positive-sample counts and the occurrence rates derived from them.
class RateTable {
 public:
  RateTable() = default;
  /// Throws InvalidArgument if any count is zero.
  explicit RateTable(std::vector<std::uint64_t> positive_counts);

  const std::vector<std::uint64_t>& positive_counts() const noexcept { return counts_; }
  std::size_t size() const noexcept { return counts_.size(); }

  /// Occurrence rate of segment i relative to segment r: N_i / N_r.
  double rate(std::size_t i, std::size_t r) const {
    return static_cast<double>(counts_.at(i)) / static_cast<double>(counts_.at(r));
  }

  bool operator==(const RateTable&) const = default;

 private:
  std::vector<std::uint64_t> counts_;
};

/// N_i = number of samples with at least one positive class in segment i.
/// `positive_ranks` holds each sample's positive classes as 1-based ranks.
RateTable positive_counts(std::span<const std::vector<std::size_t>> positive_ranks, const Segmentation& seg);

/// Record-level convenience: maps codes through `table`. Every code must be ranked.
RateTable positive_counts(const Dataset& dataset, const ClassFrequencyTable& table, const Segmentation& seg);

/// Harmonic mean of the rates beta(i, r) over the sample's positive classes,
/// each class weighted once: sum(n_i) / sum(n_i / beta(i, r)), where n_i is
/// the number of positive classes in segment i. Classes in segment r itself
/// contribute rate 1.
///
/// Throws InvalidArgument when the sample has no positive class.
double beta_sh(std::span<const std::size_t> positive_ranks, const Segmentation& seg, const RateTable& rates,
               std::size_t r);

/// Dense-label overload.
double beta_sh(std::span<const std::uint8_t> full_label, const Segmentation& seg, const RateTable& rates,
               std::size_t r);

/// Whitespace-separated table: start_rank end_rank classes min_frequency sigma.
void write_segmentation(std::ostream& out, const Segmentation& seg);
Segmentation read_segmentation(std::istream& in);

/// Header row, then one row per segment i: index, N_i, beta(i, 1..S).
void write_rate_table(std::ostream& out, const RateTable& rates);
RateTable read_rate_table(std::istream& in);

}  // namespace shloss
