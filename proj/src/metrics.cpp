// SPDX-License-Identifier: Apache-2.0
#include "shloss/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "shloss/error.hpp"

namespace shloss {

std::map<std::size_t, Counts> confusion_counts(std::span<const std::set<std::size_t>> preds,
                                               std::span<const std::set<std::size_t>> labels,
                                               const std::set<std::size_t>& classes) {
  if (preds.size() != labels.size()) throw InvalidArgument("confusion_counts: prediction/label count mismatch");
  std::map<std::size_t, Counts> out;
  for (std::size_t c : classes) out[c];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t c : preds[i]) {
      if (!classes.count(c)) continue;
      if (labels[i].count(c)) ++out[c].tp;
      else ++out[c].fp;
    }
    for (std::size_t c : labels[i]) {
      if (classes.count(c) && !preds[i].count(c)) ++out[c].fn;
    }
  }
  return out;
}

Counts total(const std::map<std::size_t, Counts>& per_class) {
  Counts sum;
  for (const auto& [c, counts] : per_class) sum += counts;
  return sum;
}

double micro_f1(const Counts& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

double micro_f1(const std::map<std::size_t, Counts>& per_class) { return micro_f1(total(per_class)); }

double macro_f1(const std::map<std::size_t, Counts>& per_class) {
  if (per_class.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [c, counts] : per_class) sum += micro_f1(counts);
  return sum / static_cast<double>(per_class.size());
}

ClassScores class_scores(const Counts& c) {
  ClassScores s;
  s.counts = c;
  s.support = c.tp + c.fn;
  const double tp = static_cast<double>(c.tp);
  s.precision = c.tp + c.fp == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  s.recall = s.support == 0 ? 0.0 : tp / static_cast<double>(s.support);
  s.f1 = micro_f1(c);
  return s;
}

MetricsReport segmentwise_report(std::span<const std::set<std::size_t>> preds,
                                 std::span<const std::set<std::size_t>> labels, const Segmentation& seg) {
  std::set<std::size_t> all;
  for (std::size_t rank = 1; rank <= seg.num_classes(); ++rank) all.insert(all.end(), rank);
  for (const auto& ls : labels) {
    for (std::size_t c : ls) {
      if (!all.count(c)) throw InvalidArgument("label rank " + std::to_string(c) + " outside the segmentation");
    }
  }
  const auto per_class = confusion_counts(preds, labels, all);

  MetricsReport report;
  report.total_counts = total(per_class);
  report.total_micro_f1 = micro_f1(report.total_counts);
  report.macro_f1 = macro_f1(per_class);
  for (const auto& [c, counts] : per_class) report.per_class[c] = class_scores(counts);
  for (std::size_t r = 0; r < seg.size(); ++r) {
    SegmentScore s;
    s.name = seg.segment_name(r);
    s.start_rank = seg[r].start_rank;
    s.end_rank = seg[r].end_rank;
    for (std::size_t c = s.start_rank; c <= s.end_rank; ++c) s.counts += per_class.at(c);
    s.micro_f1 = micro_f1(s.counts);
    report.per_segment.push_back(s);
  }
  return report;
}

namespace {

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

}  // namespace

void write_comparison_table(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  if (rows.empty()) return;
  std::vector<std::string> header = {"Method", "Total"};
  for (const auto& s : rows.front().second.per_segment) header.push_back(s.name);

  std::vector<std::vector<std::string>> cells;
  for (const auto& [name, report] : rows) {
    if (report.per_segment.size() != rows.front().second.per_segment.size()) {
      throw InvalidArgument("comparison rows have different segment counts");
    }
    std::vector<std::string> row = {name, percent(report.total_micro_f1)};
    for (const auto& s : report.per_segment) row.push_back(percent(s.micro_f1));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) {
    width[k] = header[k].size();
    for (const auto& row : cells) width[k] = std::max(width[k], row[k].size());
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == 0) out << std::left << std::setw(static_cast<int>(width[k])) << row[k];
      else out << "  " << std::right << std::setw(static_cast<int>(width[k])) << row[k];
    }
    out << std::left << '\n';
  };
  emit(header);
  std::size_t rule = 0;
  for (std::size_t w : width) rule += w + 2;
  out << std::string(rule - 2, '-') << '\n';
  for (const auto& row : cells) emit(row);
}

void write_report_table(std::ostream& out, const std::string& row_name, const MetricsReport& report) {
  write_comparison_table(out, {{row_name, report}});
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "scope,name,start_rank,end_rank,tp,fp,fn,micro_f1\n";
  const auto& t = report.total_counts;
  const std::size_t last = report.per_segment.empty() ? 0 : report.per_segment.back().end_rank;
  out << "total,Total,1," << last << ',' << t.tp << ',' << t.fp << ',' << t.fn << ',' << report.total_micro_f1 << '\n';
  for (const auto& s : report.per_segment) {
    out << "segment," << s.name << ',' << s.start_rank << ',' << s.end_rank << ',' << s.counts.tp << ','
        << s.counts.fp << ',' << s.counts.fn << ',' << s.micro_f1 << '\n';
  }
  for (const auto& [rank, c] : report.per_class) {
    out << "class,rank " << rank << ',' << rank << ',' << rank << ',' << c.counts.tp << ',' << c.counts.fp << ','
        << c.counts.fn << ',' << c.f1 << '\n';
  }
  out << "macro,Macro F1,1," << last << ",,,," << report.macro_f1 << '\n';
  out.flags(flags);
  out.precision(prec);
}

void write_comparison_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "method,Total";
  if (!rows.empty()) {
    for (const auto& s : rows.front().second.per_segment) out << ',' << s.name;
  }
  out << '\n';
  for (const auto& [name, report] : rows) {
    out << name << ',' << report.total_micro_f1;
    for (const auto& s : report.per_segment) out << ',' << s.micro_f1;
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace shloss
