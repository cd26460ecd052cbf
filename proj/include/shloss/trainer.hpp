// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "shloss/corpus.hpp"
#include "shloss/losses.hpp"
#include "shloss/segmenter.hpp"

namespace shloss {

/// Feature matrix plus rank-encoded labels, the form the trainer consumes.
struct EncodedDataset {
  std::size_t feature_dim = 0;
  std::vector<double> features;                      // size() x feature_dim, row-major
  std::vector<std::vector<std::size_t>> positive_ranks;  // 1-based ranks, ascending
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return positive_ranks.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * feature_dim, feature_dim}; }

  /// Subset in the given order.
  EncodedDataset select(std::span<const std::size_t> indices) const;
};

/// Throws InvalidArgument when a record lacks features, feature lengths
/// differ, or a code has no rank in `table`.
EncodedDataset encode(const Dataset& dataset, const ClassFrequencyTable& table);

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  std::array<unsigned, 3> ratios = {94, 3, 3};  // train : validation : test, summing to 100
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;  // ascending
};

/// Greedy iterative stratification. Labels are processed rarest first; each
/// sample carrying the current label goes to the fold that still wants the
/// most of that label (ties: most free capacity, then fold order). A sample
/// carrying any label not yet present in train is sent to train, so every
/// label appears there. Fold sizes are the largest-remainder rounding of
/// N * ratio / 100. The seed only fixes the order of equally rare samples.
SplitIndices stratified_split(std::span<const std::vector<std::size_t>> labels, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Optimizer

struct TrainConfig {
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t batch_size = 64;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  /// 0 selects a linear (logistic) model; otherwise one ReLU hidden layer.
  std::size_t hidden_units = 0;
  double decision_threshold = 0.5;
  /// Start output biases at the log-odds of each class's training prevalence.
  bool prior_bias_init = true;
  LossConfig loss;

  void validate() const;
};

struct AdamState {
  std::vector<double> m, v;
};

/// Decoupled weight decay followed by a bias-corrected Adam step:
///   p <- p - lr * wd * p
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// `step` is 1-based. Throws NumericError on a non-finite gradient.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config,
                std::size_t step);

// ---------------------------------------------------------------------------
// Models

struct SegmentModel {
  std::uint32_t segment_index = 0;
  std::size_t first_rank = 1;  // rank of output 0
  std::size_t input_dim = 0;
  std::size_t hidden_units = 0;
  std::size_t output_dim = 0;
  std::vector<double> hidden_weights;  // input_dim x hidden_units
  std::vector<double> hidden_bias;     // hidden_units
  std::vector<double> weights;         // (hidden_units ? hidden_units : input_dim) x output_dim
  std::vector<double> bias;            // output_dim
  double decision_threshold = 0.5;

  std::size_t last_layer_inputs() const noexcept { return hidden_units ? hidden_units : input_dim; }
  std::vector<double> logits(std::span<const double> features) const;

  bool operator==(const SegmentModel&) const = default;
};

struct TrainResult {
  SegmentModel model;
  std::vector<double> loss_history;  // mean batch loss per step
};

/// Per-class training counts indexed by rank - 1.
std::vector<std::uint64_t> class_counts(const EncodedDataset& data, std::size_t num_classes);

/// Trains the model of segment `r` on every sample of `train`, with targets
/// restricted to the segment's classes. SH families weight each sample by
/// 1 / beta_sh computed from its full label. Deterministic for a fixed
/// config, seed, and dataset. Throws NumericError naming the step if the loss
/// becomes non-finite.
TrainResult train_segment_model(const EncodedDataset& train, const Segmentation& seg, const RateTable& rates,
                                std::size_t r, const TrainConfig& config);

/// Trains every segment, running segments on separate threads when `parallel`.
std::vector<TrainResult> train_all_segments(const EncodedDataset& train, const Segmentation& seg,
                                            const RateTable& rates, const TrainConfig& config, bool parallel = true);

/// Union over segments of the ranks whose sigmoid(logit) >= the model's
/// decision threshold. `models` must hold exactly one model per segment index
/// 0..S-1 (any order); InvalidArgument names the first missing index.
std::set<std::size_t> predict(std::span<const SegmentModel> models, std::span<const double> features);

std::vector<std::set<std::size_t>> predict_all(std::span<const SegmentModel> models, const EncodedDataset& data);

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'H', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian): "SGHM", u32 version, u32 segment_index,
/// u64 first_rank, u64 input_dim, u64 hidden_units, u64 output_dim,
/// f64 decision_threshold, then binary64 hidden_weights, hidden_bias,
/// weights, bias.
void write_checkpoint(std::ostream& out, const SegmentModel& model);
SegmentModel read_checkpoint(std::istream& in);

/// "step,loss" CSV, steps 1-based.
void write_loss_history(std::ostream& out, std::span<const double> history);

}  // namespace shloss
