// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <numeric>

#include "shloss/error.hpp"
#include "shloss/rng.hpp"
#include "shloss/trainer.hpp"

namespace shloss {

void SplitSpec::validate() const {
  unsigned total = 0;
  for (unsigned r : ratios) {
    if (r < 1) throw InvalidArgument("split ratios must each be >= 1");
    total += r;
  }
  if (total != 100) throw InvalidArgument("split ratios must sum to 100");
}

namespace {

std::array<long, 3> fold_sizes(std::size_t n, const std::array<unsigned, 3>& ratios) {
  std::array<long, 3> sizes{};
  std::array<std::size_t, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    sizes[j] = static_cast<long>(n * ratios[j] / 100);
    remainders[j] = n * ratios[j] % 100;
    assigned += static_cast<std::size_t>(sizes[j]);
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

}  // namespace

SplitIndices stratified_split(std::span<const std::vector<std::size_t>> labels, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = labels.size();
  if (n == 0) throw InvalidArgument("stratified_split: empty dataset");

  // Compact label values to 0..L-1, ordered by value.
  std::map<std::size_t, std::size_t> label_index;
  for (const auto& ls : labels) {
    for (std::size_t l : ls) label_index.emplace(l, 0);
  }
  std::size_t next = 0;
  for (auto& [value, idx] : label_index) idx = next++;
  const std::size_t L = label_index.size();

  std::vector<std::vector<std::size_t>> sample_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l : labels[i]) sample_labels[i].push_back(label_index.at(l));
    std::sort(sample_labels[i].begin(), sample_labels[i].end());
    sample_labels[i].erase(std::unique(sample_labels[i].begin(), sample_labels[i].end()), sample_labels[i].end());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::vector<std::size_t>> samples_with(L);
  for (std::size_t i : order) {
    for (std::size_t l : sample_labels[i]) samples_with[l].push_back(i);
  }

  std::vector<std::size_t> remaining(L);
  for (std::size_t l = 0; l < L; ++l) remaining[l] = samples_with[l].size();
  std::array<std::vector<double>, 3> desired;
  for (std::size_t j = 0; j < 3; ++j) {
    desired[j].resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      desired[j][l] = static_cast<double>(samples_with[l].size()) * spec.ratios[j] / 100.0;
    }
  }
  std::array<long, 3> capacity = fold_sizes(n, spec.ratios);
  std::vector<std::uint8_t> in_train(L, 0);
  std::vector<int> fold_of(n, -1);

  auto assign = [&](std::size_t i, std::size_t j) {
    fold_of[i] = static_cast<int>(j);
    --capacity[j];
    for (std::size_t l : sample_labels[i]) {
      desired[j][l] -= 1.0;
      --remaining[l];
      if (j == 0) in_train[l] = 1;
    }
  };

  for (;;) {
    std::size_t current = L;
    for (std::size_t l = 0; l < L; ++l) {
      if (remaining[l] > 0 && (current == L || remaining[l] < remaining[current])) current = l;
    }
    if (current == L) break;
    for (std::size_t i : samples_with[current]) {
      if (fold_of[i] >= 0) continue;
      bool novel = std::any_of(sample_labels[i].begin(), sample_labels[i].end(),
                               [&](std::size_t l) { return !in_train[l]; });
      std::size_t fold = 0;
      if (!novel) {
        int best = -1;
        for (std::size_t j = 0; j < 3; ++j) {
          if (capacity[j] <= 0) continue;
          if (best < 0 || desired[j][current] > desired[best][current] ||
              (desired[j][current] == desired[best][current] && capacity[j] > capacity[best])) {
            best = static_cast<int>(j);
          }
        }
        fold = best < 0 ? 0 : static_cast<std::size_t>(best);
      }
      assign(i, fold);
    }
  }

  // Samples without labels fill whatever capacity is left.
  for (std::size_t i : order) {
    if (fold_of[i] >= 0) continue;
    std::size_t best = 0;
    for (std::size_t j = 1; j < 3; ++j) {
      if (capacity[j] > capacity[best]) best = j;
    }
    assign(i, best);
  }

  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) {
    (fold_of[i] == 0 ? out.train : fold_of[i] == 1 ? out.validation : out.test).push_back(i);
  }
  return out;
}

}  // namespace shloss
