// SPDX-License-Identifier: Apache-2.0
#include "shloss/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "shloss/error.hpp"

namespace shloss {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  return out;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void validate_record(const Record& r) {
  if (r.id.empty()) throw InvalidArgument("record with empty id");
  if (r.codes.empty()) throw InvalidArgument("record '" + r.id + "' has no codes");
  if (!r.text && !r.features) {
    throw InvalidArgument("record '" + r.id + "' has neither text nor features");
  }
}

Record record_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
  Record r;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string()) throw ParseError(line, "missing string field 'id'");
  r.id = id->get<std::string>();
  if (r.id.empty()) throw ParseError(line, "empty 'id'");

  if (auto t = obj.find("text"); t != obj.end() && !t->is_null()) {
    if (!t->is_string()) throw ParseError(line, "'text' must be a string");
    r.text = t->get<std::string>();
  }
  if (auto f = obj.find("features"); f != obj.end() && !f->is_null()) {
    if (!f->is_array()) throw ParseError(line, "'features' must be an array");
    std::vector<double> values;
    values.reserve(f->size());
    for (const auto& v : *f) {
      if (!v.is_number()) throw ParseError(line, "'features' must contain only numbers");
      values.push_back(v.get<double>());
    }
    r.features = std::move(values);
  }
  if (!r.text && !r.features) throw ParseError(line, "record '" + r.id + "' has neither text nor features");

  auto codes = obj.find("codes");
  if (codes == obj.end() || !codes->is_array()) throw ParseError(line, "missing array field 'codes'");
  for (const auto& c : *codes) {
    if (!c.is_string()) throw ParseError(line, "'codes' must contain only strings");
    auto code = c.get<std::string>();
    if (code.empty()) throw ParseError(line, "empty class id in 'codes'");
    r.codes.insert(std::move(code));
  }
  return r;
}

}  // namespace

Dataset::Dataset(std::vector<Record> records) {
  records_.reserve(records.size());
  for (auto& r : records) push_back(std::move(r));
}

void Dataset::push_back(Record record) {
  validate_record(record);
  if (!ids_.insert(record.id).second) throw InvalidArgument("duplicate record id '" + record.id + "'");
  universe_.insert(record.codes.begin(), record.codes.end());
  records_.push_back(std::move(record));
}

IngestResult parse_records(std::istream& in) {
  IngestResult result;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++result.report.lines_read;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    Record r = record_from_json(obj, lineno);
    if (!seen.insert(r.id).second) throw ParseError(lineno, "duplicate record id '" + r.id + "'");
    if (r.codes.empty()) {
      result.report.rejected_empty_codes.emplace_back(lineno, r.id);
      continue;
    }
    result.dataset.push_back(std::move(r));
    ++result.report.accepted;
  }
  return result;
}

IngestResult read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  return parse_records(in);
}

void write_records(std::ostream& out, const Dataset& dataset) {
  for (const auto& r : dataset.records()) {
    ordered_json obj;
    obj["id"] = r.id;
    if (r.text) obj["text"] = *r.text;
    if (r.features) obj["features"] = *r.features;
    obj["codes"] = std::vector<std::string>(r.codes.begin(), r.codes.end());
    out << obj.dump() << '\n';
  }
}

void write_dataset_file(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file '" + path + "'");
  write_records(out, dataset);
}

void write_ingest_report(std::ostream& text, std::ostream& js, const IngestReport& report) {
  text << "lines read:            " << report.lines_read << '\n'
       << "records accepted:      " << report.accepted << '\n'
       << "rejected (empty codes): " << report.rejected_empty_codes.size() << '\n';
  for (const auto& [line, id] : report.rejected_empty_codes) {
    text << "  line " << line << ": " << id << '\n';
  }
  ordered_json obj;
  obj["lines_read"] = report.lines_read;
  obj["accepted"] = report.accepted;
  obj["rejected_empty_codes"] = report.rejected_empty_codes.size();
  ordered_json rejected = ordered_json::array();
  for (const auto& [line, id] : report.rejected_empty_codes) {
    rejected.push_back({{"line", line}, {"id", id}});
  }
  obj["rejected"] = std::move(rejected);
  js << obj.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Section extraction

namespace {

struct HeaderHit {
  std::size_t phrase_begin;
  std::size_t content_begin;
  bool configured;
};

constexpr std::size_t kMaxGenericHeaderWords = 6;
constexpr std::size_t kMaxGenericHeaderChars = 64;

bool is_header_phrase_char(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == ' ' || c == '\t' || c == '/' ||
         c == '&' || c == '-' || c == '(' || c == ')';
}

// A colon preceded by a short alphabetic phrase that itself starts the note,
// a line, or a sentence.
std::optional<HeaderHit> generic_header_at(std::string_view note, std::size_t colon) {
  std::size_t j = colon;
  while (j > 0 && is_header_phrase_char(note[j - 1]) && colon - j < kMaxGenericHeaderChars) --j;
  if (j > 0) {
    char prev = note[j - 1];
    if (prev != '\n' && prev != '\r' && prev != '.' && prev != ';') return std::nullopt;
  }
  while (j < colon && is_space(note[j])) ++j;
  if (j == colon || !std::isalpha(static_cast<unsigned char>(note[j]))) return std::nullopt;
  std::size_t words = 0;
  bool in_word = false;
  for (std::size_t k = j; k < colon; ++k) {
    bool ws = is_space(note[k]);
    if (!ws && !in_word) ++words;
    in_word = !ws;
  }
  if (words > kMaxGenericHeaderWords) return std::nullopt;
  return HeaderHit{j, colon + 1, false};
}

}  // namespace

std::string extract_sections(std::string_view note, const std::vector<std::string>& section_headers) {
  const std::string lower = to_lower(note);
  std::vector<HeaderHit> hits;

  for (const auto& raw : section_headers) {
    std::string header = to_lower(trim(raw));
    if (!header.empty() && header.back() == ':') header.pop_back();
    header = std::string(trim(header));
    if (header.empty()) continue;
    for (std::size_t pos = lower.find(header); pos != std::string::npos;
         pos = lower.find(header, pos + 1)) {
      std::size_t end = pos + header.size();
      if (pos > 0 && is_word_char(lower[pos - 1])) continue;
      if (end < lower.size() && is_word_char(lower[end])) continue;
      std::size_t content = end;
      while (content < lower.size() && (lower[content] == ' ' || lower[content] == '\t')) ++content;
      if (content < lower.size() && lower[content] == ':') ++content;
      else content = end;
      hits.push_back({pos, content, true});
    }
  }
  if (hits.empty()) return {};

  for (std::size_t i = 0; i < note.size(); ++i) {
    if (note[i] != ':') continue;
    if (auto hit = generic_header_at(note, i)) hits.push_back(*hit);
  }

  std::sort(hits.begin(), hits.end(), [](const HeaderHit& a, const HeaderHit& b) {
    return a.phrase_begin != b.phrase_begin ? a.phrase_begin < b.phrase_begin
                                            : a.content_begin < b.content_begin;
  });

  std::string out;
  for (const auto& hit : hits) {
    if (!hit.configured) continue;
    std::size_t end = note.size();
    for (const auto& other : hits) {
      if (other.phrase_begin >= hit.content_begin) {
        end = other.phrase_begin;
        break;
      }
    }
    auto body = trim(note.substr(hit.content_begin, end - hit.content_begin));
    if (body.empty()) continue;
    if (!out.empty()) out += ' ';
    out.append(body);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Abbreviations

std::string expand_abbreviations(std::string_view text, const AbbreviationMap& dictionary) {
  if (dictionary.empty()) return std::string(text);

  std::vector<std::pair<std::string, const std::string*>> keys;
  keys.reserve(dictionary.size());
  for (const auto& [k, v] : dictionary) {
    if (k.empty()) throw InvalidArgument("empty abbreviation key");
    keys.emplace_back(to_lower(k), &v);
  }
  std::stable_sort(keys.begin(), keys.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  const std::string lower = to_lower(text);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool at_word_start = i == 0 || !is_word_char(lower[i - 1]);
    bool replaced = false;
    if (at_word_start) {
      for (const auto& [key, expansion] : keys) {
        if (lower.compare(i, key.size(), key) != 0) continue;
        std::size_t end = i + key.size();
        if (end < lower.size() && is_word_char(lower[end]) && is_word_char(key.back())) continue;
        out += *expansion;
        i = end;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

AbbreviationMap read_abbreviation_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open abbreviation file '" + path + "'");
  AbbreviationMap dict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw ParseError(lineno, "expected 'abbreviation<TAB>expansion'");
    auto key = trim(view.substr(0, tab));
    auto value = trim(view.substr(tab + 1));
    if (key.empty()) throw ParseError(lineno, "empty abbreviation");
    dict[std::string(key)] = std::string(value);
  }
  return dict;
}

// ---------------------------------------------------------------------------
// Tokenization

std::string TokenSequence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

TokenSequence tokenize_and_fit(std::string_view text, std::size_t max_len, std::string_view pad) {
  if (max_len == 0) throw InvalidArgument("max_len must be >= 1");
  TokenSequence seq;
  seq.pad_token = std::string(pad);
  std::istringstream in{std::string(text)};
  std::string tok;
  while (seq.tokens.size() < max_len && in >> tok) seq.tokens.push_back(to_lower(tok));
  seq.content_length = seq.tokens.size();
  seq.tokens.resize(max_len, seq.pad_token);
  return seq;
}

// ---------------------------------------------------------------------------
// Frequencies

ClassFrequencyTable::ClassFrequencyTable(std::vector<ClassCount> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const ClassCount& a, const ClassCount& b) {
    return a.frequency != b.frequency ? a.frequency > b.frequency : a.id < b.id;
  });
  rank_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].frequency == 0) throw InvalidArgument("class '" + entries_[i].id + "' has zero frequency");
    if (!rank_.emplace(entries_[i].id, i + 1).second) {
      throw InvalidArgument("duplicate class '" + entries_[i].id + "' in frequency table");
    }
  }
}

std::optional<std::size_t> ClassFrequencyTable::rank_of(const std::string& id) const {
  auto it = rank_.find(id);
  if (it == rank_.end()) return std::nullopt;
  return it->second;
}

const std::string& ClassFrequencyTable::id_at_rank(std::size_t rank) const {
  if (rank == 0 || rank > entries_.size()) throw InvalidArgument("rank out of range");
  return entries_[rank - 1].id;
}

std::uint64_t ClassFrequencyTable::frequency_at_rank(std::size_t rank) const {
  if (rank == 0 || rank > entries_.size()) throw InvalidArgument("rank out of range");
  return entries_[rank - 1].frequency;
}

std::vector<double> ClassFrequencyTable::frequencies() const {
  std::vector<double> f;
  f.reserve(entries_.size());
  for (const auto& e : entries_) f.push_back(static_cast<double>(e.frequency));
  return f;
}

ClassFrequencyTable build_frequency_table(const Dataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("cannot build a frequency table from an empty dataset");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& r : dataset.records()) {
    for (const auto& c : r.codes) ++counts[c];
  }
  std::vector<ClassCount> entries;
  entries.reserve(counts.size());
  for (auto& [id, n] : counts) entries.push_back({id, n});
  return ClassFrequencyTable(std::move(entries));
}

void write_frequency_table(std::ostream& out, const ClassFrequencyTable& table) {
  out << "rank\tclass\tfrequency\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << i + 1 << '\t' << table.entries()[i].id << '\t' << table.entries()[i].frequency << '\n';
  }
}

namespace {

// Returns true when anything was removed.
bool threshold_pass(std::vector<Record>& records, std::uint64_t min_count, ThresholdReport& report) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& r : records) {
    for (const auto& c : r.codes) ++counts[c];
  }
  std::set<std::string> rare;
  for (const auto& [id, n] : counts) {
    if (n < min_count) rare.insert(id);
  }
  if (rare.empty()) return false;
  report.removed_classes.insert(report.removed_classes.end(), rare.begin(), rare.end());

  std::vector<Record> kept;
  kept.reserve(records.size());
  for (auto& r : records) {
    for (auto it = r.codes.begin(); it != r.codes.end();) {
      it = rare.count(*it) ? r.codes.erase(it) : std::next(it);
    }
    if (r.codes.empty()) report.dropped_records.push_back(r.id);
    else kept.push_back(std::move(r));
  }
  records = std::move(kept);
  return true;
}

}  // namespace

ThresholdResult apply_frequency_threshold(const Dataset& dataset, std::uint64_t min_count, bool to_fixpoint) {
  if (min_count == 0) throw InvalidArgument("min_count must be >= 1");
  ThresholdResult result;
  std::vector<Record> records = dataset.records();
  do {
    ++result.report.passes;
    if (!threshold_pass(records, min_count, result.report)) break;
  } while (to_fixpoint);
  std::sort(result.report.removed_classes.begin(), result.report.removed_classes.end());
  result.dataset = Dataset(std::move(records));
  return result;
}

void write_threshold_report(std::ostream& out, const ThresholdReport& report) {
  out << "passes: " << report.passes << '\n'
      << "removed classes: " << report.removed_classes.size() << '\n';
  for (const auto& c : report.removed_classes) out << "  " << c << '\n';
  out << "dropped records: " << report.dropped_records.size() << '\n';
  for (const auto& r : report.dropped_records) out << "  " << r << '\n';
}

}  // namespace shloss
