// SPDX-License-Identifier: Apache-2.0
#include "shloss/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "shloss/error.hpp"

namespace shloss {

std::string_view to_string(LossFamily family) {
  switch (family) {
    case LossFamily::bce: return "BCE";
    case LossFamily::focal: return "FOCAL";
    case LossFamily::cb_focal: return "CB_FOCAL";
    case LossFamily::sh: return "SH";
    case LossFamily::sh_focal: return "SH_FOCAL";
  }
  return "?";
}

LossFamily parse_loss_family(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  for (auto f : {LossFamily::bce, LossFamily::focal, LossFamily::cb_focal, LossFamily::sh, LossFamily::sh_focal}) {
    if (upper == to_string(f)) return f;
  }
  throw InvalidArgument("unknown loss family '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be >= 0");
  if (!(cb_beta >= 0.0 && cb_beta < 1.0)) throw InvalidArgument("cb_beta must lie in [0, 1)");
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw InvalidArgument("epsilon must lie in (0, 1e-3]");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_probability(double p, double epsilon) { return std::clamp(p, epsilon, 1.0 - epsilon); }

double bce(double p, bool y, double epsilon) { return -std::log(q_transform(clamp_probability(p, epsilon), y)); }

double ce_multilabel(std::span<const double> q) { return focal(q, 0.0); }

double focal(std::span<const double> q, double gamma) {
  double total = 0.0;
  for (double qi : q) total -= std::pow(1.0 - qi, gamma) * std::log(qi);
  return total;
}

double cb_weight(std::uint64_t n, double cb_beta) {
  if (n == 0) throw InvalidArgument("class-balanced weight needs a count >= 1");
  return (1.0 - cb_beta) / (1.0 - std::pow(cb_beta, static_cast<double>(n)));
}

double cb_focal(std::span<const double> q, double gamma, double cb_beta, std::span<const std::uint64_t> class_counts) {
  if (q.size() != class_counts.size()) throw InvalidArgument("cb_focal: class_counts length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    total -= cb_weight(class_counts[i], cb_beta) * std::pow(1.0 - q[i], gamma) * std::log(q[i]);
  }
  return total;
}

double sh(std::span<const double> q, double beta_sh) { return sh_focal(q, beta_sh, 0.0); }

double sh_focal(std::span<const double> q, double beta_sh, double gamma) {
  if (!(beta_sh > 0.0) || !std::isfinite(beta_sh)) throw InvalidArgument("beta_sh must be finite and positive");
  return focal(q, gamma) / beta_sh;
}

double loss_and_grad_into(const LossInput& input, const LossConfig& config, std::span<double> grad) {
  const std::size_t n = input.logits.size();
  if (input.targets.size() != n || grad.size() != n) throw InvalidArgument("loss_and_grad: length mismatch");

  double gamma = 0.0;
  double sample_weight = 1.0;
  bool per_class_cb = false;
  switch (config.family) {
    case LossFamily::bce: break;
    case LossFamily::focal: gamma = config.gamma; break;
    case LossFamily::cb_focal:
      gamma = config.gamma;
      per_class_cb = true;
      if (input.class_counts.size() != n) throw InvalidArgument("CB_FOCAL requires per-class counts");
      break;
    case LossFamily::sh: sample_weight = 1.0 / input.beta_sh; break;
    case LossFamily::sh_focal:
      gamma = config.gamma;
      sample_weight = 1.0 / input.beta_sh;
      break;
  }
  if (uses_beta_sh(config.family) && (!(input.beta_sh > 0.0) || !std::isfinite(input.beta_sh))) {
    throw InvalidArgument("beta_sh must be finite and positive");
  }

  const double eps = config.epsilon;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = input.logits[i];
    if (!std::isfinite(z)) throw NumericError("non-finite logit at index " + std::to_string(i));
    const double raw = sigmoid(z);
    const bool clamped = raw < eps || raw > 1.0 - eps;
    const double p = clamp_probability(raw, eps);
    const bool y = input.targets[i] != 0;
    const double q = q_transform(p, y);
    const double w = per_class_cb ? sample_weight * cb_weight(input.class_counts[i], config.cb_beta) : sample_weight;

    const double log_q = std::log(q);
    const double focal_factor = gamma == 0.0 ? 1.0 : std::pow(1.0 - q, gamma);
    loss -= w * focal_factor * log_q;

    // d/dz of -w (1-q)^g log q, with dq/dz = s q (1-q), s = +1 for y = 1, -1 otherwise.
    const double s = y ? 1.0 : -1.0;
    grad[i] = clamped ? 0.0 : w * s * focal_factor * (gamma * q * log_q - (1.0 - q));
  }
  return loss;
}

LossGrad loss_and_grad(const LossInput& input, const LossConfig& config) {
  LossGrad out;
  out.grad.resize(input.logits.size());
  out.loss = loss_and_grad_into(input, config, out.grad);
  return out;
}

}  // namespace shloss
