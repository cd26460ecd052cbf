// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "shloss/error.hpp"
#include "shloss/segmenter.hpp"

using namespace shloss;

namespace {

// Smallest start index whose suffix fits, scanning from the right with a
// running (Welford) variance so it shares no code with the library.
std::size_t welford_tail(const std::vector<double>& f, double eta) {
  const double allowed = eta * f.back();
  double mean = 0.0, m2 = 0.0;
  std::size_t best = f.size() - 1;
  std::size_t n = 0;
  for (std::size_t i = f.size(); i-- > 0;) {
    ++n;
    const double delta = f[i] - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (f[i] - mean);
    if (std::sqrt(m2 / static_cast<double>(n)) <= allowed) best = i;
  }
  return best;
}

std::vector<std::pair<std::size_t, std::size_t>> bounds(const Segmentation& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& g : s.segments()) out.emplace_back(g.start_rank, g.end_rank);
  return out;
}

Segmentation two_segments() { return Segmentation(0.5, {{1, 2, 0.0, 1.0}, {3, 6, 0.0, 1.0}}); }

}  // namespace

TEST_CASE("population_stddev") {
  const std::vector<double> v = {10, 9, 8};
  CHECK(population_stddev(v) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
  const std::vector<double> one = {8};
  CHECK(population_stddev(one) == 0.0);
}

TEST_CASE("segment_tail") {
  CHECK(segment_tail(std::vector<double>{10, 10, 10}, 0.5) == 0);
  CHECK(segment_tail(std::vector<double>{100, 10, 9, 8}, 0.5) == 1);
  CHECK(segment_tail(std::vector<double>{8}, 0.5) == 0);

  SUBCASE("equality is accepted") {
    // sigma([3, 1]) = 1 and the limit is eta * 1.
    CHECK(segment_tail(std::vector<double>{3, 1}, 1.0) == 0);
    CHECK(segment_tail(std::vector<double>{3, 1}, 0.999) == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(segment_tail(std::vector<double>{}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(segment_tail(std::vector<double>{1, 2}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(segment_tail(std::vector<double>{2, 1}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(segment_tail(std::vector<double>{2, 1}, 1.5), InvalidArgument);
  }
  SUBCASE("matches the linear scan on random power-law lists") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> alpha(0.3, 2.0);
    int compared = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 2 + gen() % 300;
      const double a = alpha(gen);
      std::vector<double> f(n);
      for (std::size_t k = 0; k < n; ++k) f[k] = std::max(1.0, std::round(5000.0 * std::pow(k + 1.0, -a)));
      for (double eta : {0.25, 0.5, 0.75}) {
        const std::size_t got = segment_tail(f, eta);
        const std::span<const double> tail(f.data() + got, f.size() - got);
        CHECK(population_stddev(tail) <= eta * f.back());
        // Binary search only agrees with the scan when the suffix sigma is
        // monotone; check that before comparing.
        bool monotone = true;
        double prev = population_stddev(std::span<const double>(f.data(), f.size()));
        for (std::size_t i = 1; i < n && monotone; ++i) {
          const double s = population_stddev(std::span<const double>(f.data() + i, n - i));
          monotone = s <= prev;
          prev = s;
        }
        if (!monotone) continue;
        ++compared;
        CHECK(got == welford_tail(f, eta));
      }
    }
    CHECK(compared > 300);
  }
}

TEST_CASE("segment_all") {
  CHECK(bounds(segment_all(std::vector<double>{100, 10, 9, 8}, 0.5)) ==
        std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 4}});
  CHECK(segment_all(std::vector<double>{7, 7, 7, 7}, 0.5).size() == 1);

  SUBCASE("frozen power-law segmentations") {
    const std::vector<double> f = {
        2000, 933, 597, 435, 341, 279, 235, 203, 178, 159, 143, 130, 119, 110, 102, 95, 89, 83, 78, 74,
        70,   67,  64,  61,  58,  56,  53,  51,  49,  47,  46,  44,  43,  41,  40,  39, 38, 37, 36, 35,
        34,   33,  32,  31,  30,  30,  29,  28,  28,  27,  26,  26,  25,  25,  24,  24, 23, 23, 23, 22,
        22,   21,  21,  21,  20,  20,  20,  19,  19,  19,  18,  18,  18,  18,  17,  17, 17, 17, 16, 16,
        16,   16,  15,  15,  15,  15,  15,  15,  14,  14,  14,  14,  14,  14,  13,  13, 13, 13, 13, 13,
        12,   12,  12,  12,  12,  12,  12,  12,  11,  11,  11,  11,  11,  11,  11,  11, 11, 11, 10, 10};
    using B = std::vector<std::pair<std::size_t, std::size_t>>;
    CHECK(bounds(segment_all(f, 0.25)) ==
          B{{1, 1}, {2, 2}, {3, 4}, {5, 7}, {8, 12}, {13, 22}, {23, 39}, {40, 69}, {70, 120}});
    CHECK(bounds(segment_all(f, 0.5)) == B{{1, 1}, {2, 3}, {4, 7}, {8, 18}, {19, 47}, {48, 120}});
    CHECK(bounds(segment_all(f, 0.75)) == B{{1, 1}, {2, 3}, {4, 10}, {11, 36}, {37, 120}});
  }
  SUBCASE("segments cover 1..C and respect the bound") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + gen() % 500;
      std::vector<double> f(n);
      for (double& x : f) x = static_cast<double>(1 + gen() % 1000);
      std::sort(f.rbegin(), f.rend());
      const auto seg = segment_all(f, 0.5);
      std::size_t next = 1;
      for (std::size_t r = 0; r < seg.size(); ++r) {
        CHECK(seg[r].start_rank == next);
        CHECK(seg.offset(r) == next - 1);
        next = seg[r].end_rank + 1;
        const std::span<const double> part(f.data() + seg[r].start_rank - 1, seg[r].size());
        CHECK(population_stddev(part) <= 0.5 * seg[r].min_frequency);
        CHECK(seg[r].min_frequency == part.back());
      }
      CHECK(next == n + 1);
    }
  }
}

TEST_CASE("Segmentation accessors") {
  const auto seg = segment_all(std::vector<double>{100, 40, 10, 9, 8}, 0.5);
  REQUIRE(seg.size() == 3);
  CHECK(seg.segment_name(0) == "Head");
  CHECK(seg.segment_name(1) == "Body 1");
  CHECK(seg.segment_name(2) == "Tail");
  CHECK(seg.segment_of(1) == 0);
  CHECK(seg.segment_of(5) == 2);
  CHECK(Segmentation::single(std::vector<double>{3, 2, 1}).size() == 1);
  CHECK_THROWS_AS(Segmentation(0.5, {{1, 2, 0, 1}, {4, 5, 0, 1}}), InvalidArgument);
}

TEST_CASE("project_label") {
  const auto seg = two_segments();
  const std::vector<std::uint8_t> y = {1, 0, 0, 0, 1, 0};
  CHECK(project_label(y, seg, 1).bits == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK(project_label(y, seg, 0).bits == std::vector<std::uint8_t>{1, 0});
  CHECK(project_label(std::vector<std::uint8_t>(6, 0), seg, 1).bits == std::vector<std::uint8_t>(4, 0));
  CHECK(project_label(std::vector<std::uint8_t>(6, 1), seg, 1).bits == std::vector<std::uint8_t>(4, 1));

  SUBCASE("concatenation reconstructs the label") {
    std::mt19937_64 gen(29);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::uint8_t> full(6);
      for (auto& b : full) b = static_cast<std::uint8_t>(gen() & 1);
      std::vector<std::uint8_t> joined;
      for (std::size_t r = 0; r < seg.size(); ++r) {
        const auto part = project_label(full, seg, r).bits;
        joined.insert(joined.end(), part.begin(), part.end());
      }
      CHECK(joined == full);
    }
  }
}

TEST_CASE("positive_counts and rates") {
  const auto seg = two_segments();
  // Three samples touch segment 0, one touches segment 1.
  const std::vector<std::vector<std::size_t>> labels = {{1}, {2}, {1, 2}, {4}};
  const auto rates = positive_counts(labels, seg);
  CHECK(rates.positive_counts() == std::vector<std::uint64_t>{3, 1});
  CHECK(rates.rate(0, 1) == 3.0);
  CHECK(rates.rate(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(rates.rate(1, 1) == 1.0);

  const std::vector<std::vector<std::size_t>> both = {{1, 3}, {2, 5}};
  const auto even = positive_counts(both, seg);
  CHECK(even.rate(0, 1) == 1.0);
  CHECK(even.rate(1, 0) == 1.0);

  const std::vector<std::vector<std::size_t>> head_only = {{1}, {2}};
  CHECK_THROWS_AS(positive_counts(head_only, seg), InvalidArgument);
}

TEST_CASE("beta_sh") {
  SUBCASE("worked case") {
    // Three segments; relative to r = 0, segment 1 has rate 2 and segment 2 rate 4.
    const Segmentation seg(0.5, {{1, 1, 0, 1}, {2, 3, 0, 1}, {4, 4, 0, 1}});
    const RateTable rates({10, 20, 40});
    const std::vector<std::size_t> y = {2, 3, 4};
    CHECK(beta_sh(y, seg, rates, 0) == 2.4);
  }
  SUBCASE("one segment gives its rate; all ones give one") {
    const auto seg = two_segments();
    const RateTable rates({6, 2});
    const std::vector<std::size_t> head = {1, 2};
    CHECK(beta_sh(head, seg, rates, 1) == 3.0);
    CHECK(beta_sh(head, seg, rates, 0) == 1.0);
    const RateTable flat({5, 5});
    const std::vector<std::size_t> mixed = {1, 4, 6};
    CHECK(beta_sh(mixed, seg, flat, 0) == 1.0);
  }
  SUBCASE("dense overload agrees") {
    const auto seg = two_segments();
    const RateTable rates({6, 2});
    const std::vector<std::uint8_t> dense = {1, 0, 0, 1, 1, 0};
    const std::vector<std::size_t> sparse = {1, 4, 5};
    CHECK(beta_sh(dense, seg, rates, 0) == beta_sh(sparse, seg, rates, 0));
  }
  SUBCASE("no positives throws") {
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS(beta_sh(none, two_segments(), RateTable({1, 1}), 0), InvalidArgument);
  }
}

TEST_CASE("segmentation and rate table files round-trip") {
  const std::vector<double> f = {500, 200, 100, 40, 39, 38, 5, 5, 4};
  const auto seg = segment_all(f, 0.5);
  std::stringstream s;
  write_segmentation(s, seg);
  CHECK(read_segmentation(s) == seg);

  const RateTable rates({12, 5, 3});
  std::stringstream r;
  write_rate_table(r, rates);
  CHECK(read_rate_table(r) == rates);

  std::stringstream junk("not a table\n");
  CHECK_THROWS(read_segmentation(junk));
}
