// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "shloss/cleaner.hpp"
#include "shloss/losses.hpp"
#include "shloss/pipeline.hpp"
#include "shloss/segmenter.hpp"
#include "shloss/synth.hpp"

using namespace shloss;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// --- 1: gradients -----------------------------------------------------------

Verdict gradients() {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> logit(-4.0, 4.0), beta(1.0, 20.0);
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_family;
  for (LossFamily f :
       {LossFamily::bce, LossFamily::focal, LossFamily::cb_focal, LossFamily::sh, LossFamily::sh_focal}) {
    LossConfig cfg;
    cfg.family = f;
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 1 + gen() % 32;
      std::vector<double> x(n);
      std::vector<std::uint8_t> y(n);
      std::vector<std::uint64_t> counts(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = logit(gen);
        y[i] = static_cast<std::uint8_t>(gen() & 1);
        counts[i] = 1 + gen() % 5000;
      }
      const double b = beta(gen);
      const auto grad = loss_and_grad({x, y, b, counts}, cfg).grad;
      for (std::size_t i = 0; i < n; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd =
            (loss_and_grad({xp, y, b, counts}, cfg).loss - loss_and_grad({xm, y, b, counts}, cfg).loss) / (2 * h);
        const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-300});
        if (rel > worst) {
          worst = rel;
          worst_family = std::string(to_string(f));
        }
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g", worst) + " (" + worst_family + ")"};
}

// --- 2: segmentation ----------------------------------------------------------

// Smallest i with sigma(f[i:]) <= eta * f.back(), trying every i. The
// lists hold integer counts and eta is a multiple of 1/4, so the test
//   16 (n sum x^2 - (sum x)^2) <= (4 eta)^2 n^2 f_min^2
// is evaluated exactly in integers.
std::size_t linear_tail(std::span<const double> f, double eta) {
  const auto eta4 = static_cast<__int128>(4 * eta);
  const auto fmin = static_cast<__int128>(f.back());
  __int128 sum = 0, sum2 = 0, n = 0;
  std::size_t best = f.size() - 1;
  for (std::size_t i = f.size(); i-- > 0;) {
    const auto x = static_cast<__int128>(f[i]);
    sum += x;
    sum2 += x * x;
    ++n;
    if (16 * (n * sum2 - sum * sum) <= eta4 * eta4 * n * n * fmin * fmin) best = i;
  }
  return best;
}

// Population sigma of every suffix f[i:], accumulated right to left.
std::vector<double> suffix_sigmas(std::span<const double> f) {
  std::vector<double> out(f.size());
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = f.size(), n = 1; i-- > 0; ++n) {
    const double delta = f[i] - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (f[i] - mean);
    out[i] = std::sqrt(std::max(0.0, m2) / static_cast<double>(n));
  }
  return out;
}

bool sigma_monotone(std::span<const double> f) {
  const auto sigma = suffix_sigmas(f);
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (sigma[i] > sigma[i - 1]) return false;
  }
  return true;
}

Verdict segmentation() {
  std::mt19937_64 gen(202);
  std::uniform_real_distribution<double> alpha(0.3, 2.5), scale(1.0, 4.0);
  int accepted = 0, tried = 0, mismatches = 0, bound_violations = 0;
  while (accepted < 1000) {
    ++tried;
    const std::size_t n = 10 + gen() % 1991;
    const double a = alpha(gen);
    const double top = std::pow(10.0, scale(gen));
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = std::max(1.0, std::round(top * std::pow(k + 1.0, -a)));
    if (!sigma_monotone(f)) continue;
    ++accepted;
    for (double eta : {0.25, 0.5, 0.75}) {
      if (segment_tail(f, eta) != linear_tail(f, eta)) ++mismatches;
      // Full segmentation against repeated linear scans.
      const auto seg = segment_all(f, eta);
      std::vector<std::pair<std::size_t, std::size_t>> expect;
      std::size_t end = n;
      while (end > 0) {
        const std::size_t start = linear_tail(std::span<const double>(f.data(), end), eta);
        expect.emplace_back(start + 1, end);
        end = start;
      }
      std::reverse(expect.begin(), expect.end());
      if (expect.size() != seg.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t r = 0; r < seg.size(); ++r) {
        if (seg[r].start_rank != expect[r].first || seg[r].end_rank != expect[r].second) ++mismatches;
        const std::span<const double> part(f.data() + seg[r].start_rank - 1, seg[r].size());
        if (!(population_stddev(part) <= eta * seg[r].min_frequency)) ++bound_violations;
      }
    }
  }
  return {mismatches == 0 && bound_violations == 0,
          std::to_string(accepted) + " lists (" + std::to_string(tried) + " generated), " +
              std::to_string(mismatches) + " mismatches, " + std::to_string(bound_violations) + " bound violations"};
}

// --- 3: beta_sh -------------------------------------------------------------------

Verdict beta_properties() {
  std::mt19937_64 gen(303);
  int failures = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t segments = 1 + gen() % 8;
    std::vector<Segment> parts;
    std::vector<std::uint64_t> counts;
    std::size_t next = 1;
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t width = 1 + gen() % 5;
      parts.push_back({next, next + width - 1, 0.0, 1.0});
      next += width;
      counts.push_back(1 + gen() % 10000);
    }
    const Segmentation seg(0.5, parts);
    const RateTable rates(counts);
    const std::size_t r = gen() % segments;
    const std::size_t C = next - 1;
    const bool single = gen() % 4 == 0;
    const std::size_t only = gen() % segments;

    std::set<std::size_t> label;
    const std::size_t k = 1 + gen() % 6;
    for (std::size_t j = 0; j < k; ++j) {
      if (single) label.insert(parts[only].start_rank + gen() % parts[only].size());
      else label.insert(1 + gen() % C);
    }
    const std::vector<std::size_t> y(label.begin(), label.end());
    const double b = beta_sh(y, seg, rates, r);

    double weighted = 0.0, total = 0.0;
    for (std::size_t rank : y) {
      weighted += rates.rate(seg.segment_of(rank), r);
      total += 1.0;
    }
    const double arithmetic = weighted / total;
    bool ok = std::isfinite(b) && b > 0.0 && b <= arithmetic * (1.0 + 1e-12);
    if (single) ok = ok && std::abs(b - rates.rate(only, r)) <= 1e-14 * rates.rate(only, r);
    if (!ok) ++failures;
  }
  // Two positives in a segment at rate 2 and one at rate 4.
  const Segmentation worked(0.5, {{1, 1, 0, 1}, {2, 3, 0, 1}, {4, 4, 0, 1}});
  const double w = beta_sh(std::vector<std::size_t>{2, 3, 4}, worked, RateTable({10, 20, 40}), 0);
  return {failures == 0 && w == 2.4,
          std::to_string(failures) + " property failures in 10000; worked case " + fmt("%.16g", w)};
}

// --- 4: benchmark ---------------------------------------------------------------

struct BenchRow {
  double total = 0.0, tail = 0.0;
};

// BCE single model vs segmented SH_FOCAL through the full pipeline.
std::pair<BenchRow, BenchRow> benchmark_seed(std::uint64_t seed, const fs::path& dir, std::size_t* segments) {
  SynthSpec spec;
  spec.num_classes = 60;
  spec.num_samples = 5000;
  spec.head_tail_ratio = 100.0;
  spec.power_exponent = exponent_for_ratio(60, 100.0);
  spec.feature_dim = 32;
  spec.labels_per_sample = 1.5;
  spec.noise_std = 0.3;
  spec.seed = seed;
  fs::create_directories(dir);
  write_dataset_file((dir / "data.jsonl").string(), generate(spec));

  RunConfig c;
  c.dataset = (dir / "data.jsonl").string();
  c.output_dir = (dir / "out").string();
  c.min_count = 1;
  c.eta = 0.5;
  c.split_ratios = {60, 20, 20};
  c.seed = seed;
  c.train.max_steps = 20000;
  c.train.batch_size = 64;
  c.train.learning_rate = 5e-4;
  c.families = {LossFamily::bce, LossFamily::sh_focal};
  run_pipeline(c, parse_stage_list("all"));
  const auto rows = compare_losses(c, c.families);
  *segments = rows[0].second.per_segment.size();
  auto pick = [](const MetricsReport& r) { return BenchRow{r.total_micro_f1, r.per_segment.back().micro_f1}; };
  return {pick(rows[0].second), pick(rows[1].second)};
}

Verdict benchmark(const fs::path& root) {
  BenchRow bce, shf;
  std::size_t min_segments = 1000;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::size_t segments = 0;
    const auto [b, s] = benchmark_seed(seed, root / ("bench-" + std::to_string(seed)), &segments);
    std::printf("  seed %lu: %zu segments; BCE total %.2f tail %.2f; SH_FOCAL total %.2f tail %.2f\n",
                static_cast<unsigned long>(seed), segments, 100 * b.total, 100 * b.tail, 100 * s.total,
                100 * s.tail);
    min_segments = std::min(min_segments, segments);
    bce.total += b.total / 3;
    bce.tail += b.tail / 3;
    shf.total += s.total / 3;
    shf.tail += s.tail / 3;
  }
  const double tail_gain = 100 * (shf.tail - bce.tail);
  const double total_gap = 100 * std::abs(shf.total - bce.total);
  return {min_segments >= 3 && tail_gain >= 5.0 && total_gap <= 2.0,
          fmt("tail gain %.2f pts (need >= 5), total gap %.2f pts (need <= 2)", tail_gain, total_gap) +
              ", min segments " + std::to_string(min_segments)};
}

// --- 5: reduction identities -------------------------------------------------

Verdict reductions() {
  std::mt19937_64 gen(505);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> q(1 + gen() % 64);
    for (double& x : q) x = u(gen);
    double sum_bce = 0.0;
    for (double x : q) sum_bce += bce(x, true);
    const double ce = ce_multilabel(q);
    worst = std::max({worst, std::abs(sh_focal(q, 1.0, 0.0) - ce), std::abs(ce - sum_bce),
                      std::abs(focal(q, 0.0) - ce)});
  }
  return {worst <= 1e-12, fmt("max absolute difference %.3g", worst)};
}

// --- 6: cleaner -------------------------------------------------------------------

Verdict cleaner() {
  using namespace shloss::testing;
  Record rec;
  rec.id = "n1";
  rec.text = "t";
  rec.codes = {"match", "ortho"};
  std::map<std::string, EmbeddingMatrix> desc;
  desc.emplace("match", fixture_match());
  desc.emplace("ortho", fixture_orthogonal());
  const auto res = clean_labels(rec, fixture_note(), desc);
  double match = -1, ortho = -1;
  bool match_kept = false, ortho_kept = true;
  for (const auto& row : res.report.rows) {
    if (row.code == "match") match = row.score, match_kept = row.kept;
    if (row.code == "ortho") ortho = row.score, ortho_kept = row.kept;
  }
  const bool fixture_ok = std::abs(match - 1.0) <= 1e-12 && match_kept && ortho == 0.0 && !ortho_kept;

  Record table;
  table.id = "r";
  table.text = "t";
  table.codes = {"42789", "4263", "2449", "42822", "41401", "3659", "4280"};
  const auto kept = clean_labels_from_scores(table, {{"42789", 0.64}, {"4263", 0.50}, {"2449", 0.53}, {"42822", 0.72},
                                                     {"41401", 0.66}, {"3659", 0.44}, {"4280", 0.72}});
  const bool table_ok = kept.record.codes == std::set<std::string>{"42789", "42822", "41401", "4280"};
  return {fixture_ok && table_ok, fmt("match %.17g, orthogonal %.17g", match, ortho) +
                                      (table_ok ? ", keep/drop pattern reproduced" : ", keep/drop pattern differs")};
}

// --- 7: determinism ---------------------------------------------------------------

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Verdict determinism(const fs::path& root) {
  SynthSpec spec;
  spec.num_classes = 60;
  spec.num_samples = 5000;
  spec.power_exponent = exponent_for_ratio(60, 100.0);
  spec.noise_std = 0.3;
  spec.seed = 7;
  fs::create_directories(root / "det");
  write_dataset_file((root / "det" / "data.jsonl").string(), generate(spec));

  std::vector<fs::path> outputs;
  for (const char* name : {"a", "b"}) {
    RunConfig c;
    c.dataset = (root / "det" / "data.jsonl").string();
    c.output_dir = (root / "det" / name).string();
    c.min_count = 1;
    c.split_ratios = {60, 20, 20};
    c.seed = 7;
    c.train.max_steps = 5000;
    c.families = {LossFamily::bce, LossFamily::focal, LossFamily::cb_focal, LossFamily::sh, LossFamily::sh_focal};
    run_pipeline(c, parse_stage_list("all"));
    outputs.push_back(c.output_dir);
  }
  const auto fa = files_under(outputs[0]);
  if (fa != files_under(outputs[1])) return {false, "runs produced different file sets"};
  std::size_t compared = 0, checkpoints = 0;
  for (const auto& rel : fa) {
    if (rel == "manifest.json") continue;
    const std::string top = rel.begin()->string();
    if (top != "train" && top != "eval") continue;
    if (shloss::testing::read_file((outputs[0] / rel).string()) !=
        shloss::testing::read_file((outputs[1] / rel).string())) {
      return {false, "differs: " + rel.string()};
    }
    ++compared;
    if (rel.extension() == ".ckpt") ++checkpoints;
  }
  return {checkpoints > 0, std::to_string(compared) + " report and checkpoint files identical (" +
                               std::to_string(checkpoints) + " checkpoints)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  shloss::testing::TempDir scratch("acceptance");
  const fs::path root = scratch.path();
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient correctness", gradients},
      {"segmentation equals linear scan", segmentation},
      {"beta_sh properties", beta_properties},
      {"synthetic benchmark trend", [&] { return benchmark(root); }},
      {"reduction identities", reductions},
      {"cleaner logic", cleaner},
      {"pipeline determinism", [&] { return determinism(root); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
