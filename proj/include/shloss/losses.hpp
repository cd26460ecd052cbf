// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shloss {

enum class LossFamily { bce, focal, cb_focal, sh, sh_focal };

/// "BCE", "FOCAL", "CB_FOCAL", "SH", "SH_FOCAL".
std::string_view to_string(LossFamily family);
LossFamily parse_loss_family(std::string_view name);

/// True for the families that apply the 1/beta_sh modulation.
constexpr bool uses_beta_sh(LossFamily f) { return f == LossFamily::sh || f == LossFamily::sh_focal; }

enum class Reduction { mean, sum };

struct LossConfig {
  LossFamily family = LossFamily::bce;
  double gamma = 2.0;
  double cb_beta = 0.99;
  double epsilon = 1e-12;
  /// Batch reduction; classes within a sample are always summed.
  Reduction reduction = Reduction::mean;
  /// When false, samples positive for the segment use beta_sh = 1 (ablation).
  bool sh_on_positives = true;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Probability of the observed outcome: p for a positive, 1 - p otherwise.
constexpr double q_transform(double p, bool y) { return y ? p : 1.0 - p; }

double clamp_probability(double p, double epsilon = 1e-12);

/// -log q for one class.
double bce(double p, bool y, double epsilon = 1e-12);

/// -sum log q_i.
double ce_multilabel(std::span<const double> q);

/// -sum (1 - q_i)^gamma log q_i.
double focal(std::span<const double> q, double gamma);

/// Effective-number weight (1 - beta) / (1 - beta^n). Throws on n == 0.
double cb_weight(std::uint64_t n, double cb_beta);

/// Focal terms weighted per class by cb_weight(class_counts[i]).
double cb_focal(std::span<const double> q, double gamma, double cb_beta, std::span<const std::uint64_t> class_counts);

/// -(1 / beta_sh) sum log q_i.
double sh(std::span<const double> q, double beta_sh);

/// -(1 / beta_sh) sum (1 - q_i)^gamma log q_i.
double sh_focal(std::span<const double> q, double beta_sh, double gamma);

struct LossInput {
  std::span<const double> logits;
  std::span<const std::uint8_t> targets;
  double beta_sh = 1.0;
  /// Per-class training counts; required by CB_FOCAL only.
  std::span<const std::uint64_t> class_counts = {};
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

/// Loss of one sample (summed over its classes) and its exact gradient with
/// respect to the logits. Probabilities are sigmoid(logit) clamped to
/// [epsilon, 1 - epsilon]; a clamped entry has zero gradient.
///
/// Throws NumericError on a non-finite logit, InvalidArgument on shape errors.
LossGrad loss_and_grad(const LossInput& input, const LossConfig& config);

/// Writes the gradient into `grad` (same length as the logits) and returns
/// the loss. No allocation; used in training loops.
double loss_and_grad_into(const LossInput& input, const LossConfig& config, std::span<double> grad);

double sigmoid(double x);

}  // namespace shloss
