// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "shloss/corpus.hpp"

namespace shloss {

/// Parameters of a synthetic long-tailed multi-label dataset.
struct SynthSpec {
  std::size_t num_classes = 60;
  std::size_t num_samples = 5000;
  /// Class c (1-based) is drawn with weight c^-power_exponent.
  double power_exponent = 1.0;
  /// Target max/min class frequency; used to pick the exponent via
  /// exponent_for_ratio() and to validate the generated set.
  double head_tail_ratio = 100.0;
  std::size_t feature_dim = 32;
  /// Mean number of labels per sample (>= 1).
  double labels_per_sample = 1.5;
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exponent that makes the weight ratio between rank 1 and rank C equal `ratio`.
double exponent_for_ratio(std::size_t num_classes, double ratio);

/// Deterministic generator.
///
/// Each class gets a unit-norm Gaussian prototype. Each sample draws
/// 1 + Poisson(labels_per_sample - 1) distinct classes (capped at C) by
/// weighted sampling without replacement. Its features are the normalized sum
/// of its prototypes plus N(0, noise_std^2) noise per coordinate. Classes that
/// end up unused are attached to a randomly chosen sample before features are
/// computed, so every class has frequency >= 1.
///
/// Class ids are zero-padded ("c01".."c60") so id order follows weight order.
Dataset generate(const SynthSpec& spec);

}  // namespace shloss
