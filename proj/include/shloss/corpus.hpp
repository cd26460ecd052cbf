// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shloss {

/// One note-code pair: an input (text and/or feature vector) and its label set.
struct Record {
  std::string id;
  std::optional<std::string> text;
  std::optional<std::vector<double>> features;
  std::set<std::string> codes;

  bool operator==(const Record&) const = default;
};

/// An ordered collection of records with unique ids.
///
/// `class_universe` always equals the union of the records' code sets.
class Dataset {
 public:
  Dataset() = default;

  /// Throws InvalidArgument on a duplicate id, an empty code set, or a record
  /// with neither text nor features.
  explicit Dataset(std::vector<Record> records);

  const std::vector<Record>& records() const noexcept { return records_; }
  const std::set<std::string>& class_universe() const noexcept { return universe_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  void push_back(Record record);

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Record> records_;
  std::set<std::string> universe_;
  std::set<std::string> ids_;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t accepted = 0;
  /// (line number, record id) of records dropped for an empty code list.
  std::vector<std::pair<std::size_t, std::string>> rejected_empty_codes;
};

struct IngestResult {
  Dataset dataset;
  IngestReport report;
};

/// Reads line-delimited JSON records. Blank lines are skipped.
///
/// Throws ParseError (with line number) for malformed lines or duplicate ids.
/// Records with `codes: []` are not errors; they are listed in the report.
IngestResult parse_records(std::istream& in);
IngestResult read_dataset_file(const std::string& path);

/// One JSON object per line, keys in a fixed order so output is byte-stable.
void write_records(std::ostream& out, const Dataset& dataset);
void write_dataset_file(const std::string& path, const Dataset& dataset);

void write_ingest_report(std::ostream& text, std::ostream& json, const IngestReport& report);

/// Concatenates, in note order, the bodies of the sections whose header
/// matches one of `section_headers` (case-insensitive, optional trailing
/// colon). A body runs until the next header: either a configured one or any
/// short "Title Words:" phrase that starts a line or follows a '.' or ';'.
/// Bodies are whitespace-trimmed and joined with a single space.
std::string extract_sections(std::string_view note, const std::vector<std::string>& section_headers);

using AbbreviationMap = std::map<std::string, std::string>;

/// Whole-word, case-insensitive, longest-key-first, single-pass replacement.
std::string expand_abbreviations(std::string_view text, const AbbreviationMap& dictionary);

/// Tab-separated `abbreviation<TAB>expansion` lines; '#' starts a comment.
AbbreviationMap read_abbreviation_file(const std::string& path);

inline constexpr std::size_t kDefaultMaxTokens = 512;
inline constexpr std::string_view kDefaultPadToken = "[PAD]";

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string pad_token;
  /// Number of leading tokens taken from the text.
  std::size_t content_length = 0;

  std::size_t length() const noexcept { return tokens.size(); }
  /// Space-joined tokens, pads included.
  std::string joined() const;
};

/// Whitespace tokenization with ASCII lowercase folding, then truncation to
/// the first `max_len` tokens or right-padding up to `max_len`.
TokenSequence tokenize_and_fit(std::string_view text, std::size_t max_len = kDefaultMaxTokens,
                               std::string_view pad = kDefaultPadToken);

struct ClassCount {
  std::string id;
  std::uint64_t frequency = 0;

  bool operator==(const ClassCount&) const = default;
};

/// Classes sorted by frequency (descending), ties by id ascending. Ranks are
/// 1-based: entries()[k] has rank k + 1.
class ClassFrequencyTable {
 public:
  ClassFrequencyTable() = default;
  explicit ClassFrequencyTable(std::vector<ClassCount> entries);

  const std::vector<ClassCount>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// 1-based rank, or nullopt for an unknown class.
  std::optional<std::size_t> rank_of(const std::string& id) const;
  const std::string& id_at_rank(std::size_t rank) const;
  std::uint64_t frequency_at_rank(std::size_t rank) const;

  /// Frequencies in rank order, as the segmenter consumes them.
  std::vector<double> frequencies() const;

 private:
  std::vector<ClassCount> entries_;
  std::unordered_map<std::string, std::size_t> rank_;
};

/// Throws InvalidArgument on an empty dataset.
ClassFrequencyTable build_frequency_table(const Dataset& dataset);

void write_frequency_table(std::ostream& out, const ClassFrequencyTable& table);

struct ThresholdReport {
  std::vector<std::string> removed_classes;
  std::vector<std::string> dropped_records;
  std::size_t passes = 0;
};

struct ThresholdResult {
  Dataset dataset;
  ThresholdReport report;
};

/// Removes codes with frequency below `min_count` from every record and drops
/// records whose code set becomes empty. One pass unless `to_fixpoint`, in
/// which case passes repeat until nothing changes.
ThresholdResult apply_frequency_threshold(const Dataset& dataset, std::uint64_t min_count = 200,
                                          bool to_fixpoint = false);

void write_threshold_report(std::ostream& out, const ThresholdReport& report);

}  // namespace shloss
