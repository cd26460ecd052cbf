// SPDX-License-Identifier: Apache-2.0
#include "shloss/segmenter.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "shloss/error.hpp"

namespace shloss {

namespace {

void check_frequencies(std::span<const double> f, double eta) {
  if (f.empty()) throw InvalidArgument("frequency list is empty");
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in (0, 1]");
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i]) || f[i] < 0.0) throw InvalidArgument("frequencies must be finite and non-negative");
    if (i > 0 && f[i] > f[i - 1]) throw InvalidArgument("frequencies must be sorted non-increasing");
  }
}

}  // namespace

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

std::size_t segment_tail(std::span<const double> frequencies, double eta) {
  check_frequencies(frequencies, eta);
  const std::size_t n = frequencies.size();
  const double allowed = eta * frequencies[n - 1];
  std::size_t left = 0;
  std::size_t right = n - 1;
  while (left < right) {
    const std::size_t mid = left + (right - left) / 2;
    if (population_stddev(frequencies.subspan(mid)) > allowed) left = mid + 1;
    else right = mid;
  }
  return left;
}

Segmentation segment_all(std::span<const double> frequencies, double eta) {
  check_frequencies(frequencies, eta);
  std::vector<Segment> tail_first;
  std::size_t end = frequencies.size();
  while (end > 0) {
    auto remaining = frequencies.first(end);
    const std::size_t start = segment_tail(remaining, eta);
    auto block = remaining.subspan(start);
    tail_first.push_back({start + 1, end, population_stddev(block), block.back()});
    end = start;
  }
  return Segmentation(eta, {tail_first.rbegin(), tail_first.rend()});
}

Segmentation::Segmentation(double eta, std::vector<Segment> segments) : eta_(eta), segments_(std::move(segments)) {
  if (!(eta_ > 0.0 && eta_ <= 1.0)) throw InvalidArgument("eta must lie in (0, 1]");
  if (segments_.empty()) throw InvalidArgument("segmentation has no segments");
  std::size_t next = 1;
  for (std::size_t r = 0; r < segments_.size(); ++r) {
    const auto& s = segments_[r];
    if (s.start_rank != next || s.end_rank < s.start_rank) {
      throw InvalidArgument("segments must be contiguous and cover ranks 1..C");
    }
    segment_of_rank_.insert(segment_of_rank_.end(), s.size(), r);
    next = s.end_rank + 1;
  }
}

Segmentation Segmentation::single(std::span<const double> frequencies) {
  if (frequencies.empty()) throw InvalidArgument("frequency list is empty");
  return Segmentation(1.0, {{1, frequencies.size(), population_stddev(frequencies), frequencies.back()}});
}

std::size_t Segmentation::segment_of(std::size_t rank) const {
  if (rank == 0 || rank > segment_of_rank_.size()) throw InvalidArgument("rank " + std::to_string(rank) + " out of range");
  return segment_of_rank_[rank - 1];
}

std::string Segmentation::segment_name(std::size_t r) const {
  if (r >= segments_.size()) throw InvalidArgument("segment index out of range");
  if (r == 0) return "Head";
  if (r + 1 == segments_.size()) return "Tail";
  return "Body " + std::to_string(r);
}

SegmentLabel project_label(std::span<const std::uint8_t> full_label, const Segmentation& seg, std::size_t r) {
  if (full_label.size() != seg.num_classes()) throw InvalidArgument("label length does not match class count");
  if (r >= seg.size()) throw InvalidArgument("segment index out of range");
  auto slice = full_label.subspan(seg.offset(r), seg.class_count(r));
  return {r, {slice.begin(), slice.end()}};
}

RateTable::RateTable(std::vector<std::uint64_t> positive_counts) : counts_(std::move(positive_counts)) {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == 0) {
      throw InvalidArgument("segment " + std::to_string(i) + " has no positive samples");
    }
  }
}

RateTable positive_counts(std::span<const std::vector<std::size_t>> positive_ranks, const Segmentation& seg) {
  std::vector<std::uint64_t> counts(seg.size(), 0);
  std::vector<std::uint8_t> touched(seg.size());
  for (const auto& ranks : positive_ranks) {
    std::fill(touched.begin(), touched.end(), 0);
    for (std::size_t rank : ranks) touched[seg.segment_of(rank)] = 1;
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += touched[i];
  }
  return RateTable(std::move(counts));
}

RateTable positive_counts(const Dataset& dataset, const ClassFrequencyTable& table, const Segmentation& seg) {
  std::vector<std::vector<std::size_t>> ranks;
  ranks.reserve(dataset.size());
  for (const auto& rec : dataset.records()) {
    auto& row = ranks.emplace_back();
    for (const auto& code : rec.codes) {
      auto rank = table.rank_of(code);
      if (!rank) throw InvalidArgument("code '" + code + "' is not in the frequency table");
      row.push_back(*rank);
    }
  }
  return positive_counts(ranks, seg);
}

double beta_sh(std::span<const std::size_t> positive_ranks, const Segmentation& seg, const RateTable& rates,
               std::size_t r) {
  if (positive_ranks.empty()) throw InvalidArgument("beta_sh: label has no positive class");
  if (rates.size() != seg.size()) throw InvalidArgument("beta_sh: rate table does not match segmentation");
  double total = 0.0;
  double inverse_sum = 0.0;
  for (std::size_t rank : positive_ranks) {
    total += 1.0;
    inverse_sum += 1.0 / rates.rate(seg.segment_of(rank), r);
  }
  return total / inverse_sum;
}

double beta_sh(std::span<const std::uint8_t> full_label, const Segmentation& seg, const RateTable& rates,
               std::size_t r) {
  if (full_label.size() != seg.num_classes()) throw InvalidArgument("label length does not match class count");
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < full_label.size(); ++i) {
    if (full_label[i]) ranks.push_back(i + 1);
  }
  return beta_sh(std::span<const std::size_t>(ranks), seg, rates, r);
}

void write_segmentation(std::ostream& out, const Segmentation& seg) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# eta " << seg.eta() << '\n';
  out << "start_rank\tend_rank\tclasses\tmin_frequency\tsigma\n";
  for (const auto& s : seg.segments()) {
    out << s.start_rank << '\t' << s.end_rank << '\t' << s.size() << '\t' << s.min_frequency << '\t' << s.sigma
        << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

Segmentation read_segmentation(std::istream& in) {
  std::string line;
  double eta = kDefaultEta;
  std::vector<Segment> segments;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream f(line.substr(1));
      std::string key;
      if (f >> key && key == "eta" && !(f >> eta)) throw ParseError(lineno, "bad eta line");
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream f(line);
    Segment s;
    std::size_t count = 0;
    if (!(f >> s.start_rank >> s.end_rank >> count >> s.min_frequency >> s.sigma)) {
      throw ParseError(lineno, "expected start_rank end_rank classes min_frequency sigma");
    }
    if (count != s.size()) throw ParseError(lineno, "class count does not match rank range");
    segments.push_back(s);
  }
  return Segmentation(eta, std::move(segments));
}

void write_rate_table(std::ostream& out, const RateTable& rates) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "segment\tpositives";
  for (std::size_t r = 0; r < rates.size(); ++r) out << "\tbeta_vs_" << r + 1;
  out << '\n';
  for (std::size_t i = 0; i < rates.size(); ++i) {
    out << i + 1 << '\t' << rates.positive_counts()[i];
    for (std::size_t r = 0; r < rates.size(); ++r) out << '\t' << rates.rate(i, r);
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

RateTable read_rate_table(std::istream& in) {
  std::string line;
  std::vector<std::uint64_t> counts;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream f(line);
    std::size_t index = 0;
    std::uint64_t n = 0;
    if (!(f >> index >> n)) throw ParseError(lineno, "expected segment index and positive count");
    counts.push_back(n);
  }
  return RateTable(std::move(counts));
}

}  // namespace shloss
