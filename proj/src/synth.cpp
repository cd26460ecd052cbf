// SPDX-License-Identifier: Apache-2.0
#include "shloss/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shloss/error.hpp"
#include "shloss/rng.hpp"

namespace shloss {

namespace {

std::string padded(char prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::size_t digit_count(std::size_t n) { return std::to_string(n).size(); }

}  // namespace

void SynthSpec::validate() const {
  if (num_classes < 2) throw InvalidArgument("synth: num_classes must be >= 2");
  if (num_samples < num_classes) throw InvalidArgument("synth: num_samples must be >= num_classes");
  if (!(power_exponent > 0.0)) throw InvalidArgument("synth: power_exponent must be > 0");
  if (!(head_tail_ratio >= 1.0)) throw InvalidArgument("synth: head_tail_ratio must be >= 1");
  if (feature_dim == 0) throw InvalidArgument("synth: feature_dim must be >= 1");
  if (!(labels_per_sample >= 1.0)) throw InvalidArgument("synth: labels_per_sample must be >= 1");
  if (!(noise_std >= 0.0)) throw InvalidArgument("synth: noise_std must be >= 0");
}

double exponent_for_ratio(std::size_t num_classes, double ratio) {
  if (num_classes < 2 || !(ratio >= 1.0)) throw InvalidArgument("exponent_for_ratio: need C >= 2 and ratio >= 1");
  return std::log(ratio) / std::log(static_cast<double>(num_classes));
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t C = spec.num_classes;
  const std::size_t d = spec.feature_dim;

  std::vector<double> prototypes(C * d);
  for (std::size_t c = 0; c < C; ++c) {
    double* p = prototypes.data() + c * d;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        p[k] = rng.normal();
        norm += p[k] * p[k];
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) p[k] /= norm;
  }

  std::vector<double> weights(C);
  for (std::size_t c = 0; c < C; ++c) weights[c] = std::pow(static_cast<double>(c + 1), -spec.power_exponent);

  std::vector<std::vector<std::size_t>> labels(spec.num_samples);
  std::vector<std::size_t> frequency(C, 0);
  std::vector<double> remaining;
  for (auto& chosen : labels) {
    const std::size_t k = std::min<std::size_t>(C, 1 + rng.poisson(spec.labels_per_sample - 1.0));
    remaining = weights;
    for (std::size_t draw = 0; draw < k; ++draw) {
      double total = 0.0;
      for (double w : remaining) total += w;
      double target = rng.uniform() * total;
      std::size_t pick = C;
      for (std::size_t c = 0; c < C; ++c) {
        if (remaining[c] == 0.0) continue;
        pick = c;
        if (target < remaining[c]) break;
        target -= remaining[c];
      }
      remaining[pick] = 0.0;
      chosen.push_back(pick);
      ++frequency[pick];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (frequency[c] > 0) continue;
    auto& chosen = labels[rng.index(labels.size())];
    chosen.push_back(c);
    ++frequency[c];
  }

  const std::size_t class_width = digit_count(C);
  const std::size_t sample_width = digit_count(spec.num_samples);
  std::vector<Record> records;
  records.reserve(spec.num_samples);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t c : labels[i]) {
      const double* p = prototypes.data() + c * d;
      for (std::size_t k = 0; k < d; ++k) x[k] += p[k];
    }
    if (labels[i].size() > 1) {
      double norm = 0.0;
      for (double v : x) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& v : x) v /= norm;
      }
    }
    if (spec.noise_std > 0.0) {
      for (double& v : x) v += spec.noise_std * rng.normal();
    }

    Record r;
    r.id = padded('s', i + 1, sample_width);
    r.features = x;
    for (std::size_t c : labels[i]) r.codes.insert(padded('c', c + 1, class_width));
    records.push_back(std::move(r));
  }
  return Dataset(std::move(records));
}

}  // namespace shloss
