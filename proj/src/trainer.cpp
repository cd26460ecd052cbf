// SPDX-License-Identifier: Apache-2.0
#include "shloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "shloss/error.hpp"
#include "shloss/rng.hpp"

namespace shloss {

EncodedDataset EncodedDataset::select(std::span<const std::size_t> indices) const {
  EncodedDataset out;
  out.feature_dim = feature_dim;
  out.features.reserve(indices.size() * feature_dim);
  for (std::size_t i : indices) {
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.positive_ranks.push_back(positive_ranks.at(i));
    out.ids.push_back(ids.at(i));
  }
  return out;
}

EncodedDataset encode(const Dataset& dataset, const ClassFrequencyTable& table) {
  EncodedDataset out;
  for (const auto& rec : dataset.records()) {
    if (!rec.features) throw InvalidArgument("record '" + rec.id + "' has no feature vector");
    if (out.ids.empty()) out.feature_dim = rec.features->size();
    if (rec.features->size() != out.feature_dim || out.feature_dim == 0) {
      throw InvalidArgument("record '" + rec.id + "' has feature length " + std::to_string(rec.features->size()) +
                            ", expected " + std::to_string(out.feature_dim));
    }
    out.features.insert(out.features.end(), rec.features->begin(), rec.features->end());
    auto& ranks = out.positive_ranks.emplace_back();
    for (const auto& code : rec.codes) {
      auto rank = table.rank_of(code);
      if (!rank) throw InvalidArgument("code '" + code + "' of record '" + rec.id + "' has no rank");
      ranks.push_back(*rank);
    }
    std::sort(ranks.begin(), ranks.end());
    out.ids.push_back(rec.id);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    throw InvalidArgument("decision_threshold must lie in [0, 1]");
  }
  loss.validate();
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config,
                std::size_t step) {
  if (params.size() != grads.size()) throw InvalidArgument("adamw_step: shape mismatch");
  if (step == 0) throw InvalidArgument("adamw_step: step is 1-based");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InvalidArgument("adamw_step: optimizer state shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("adamw_step: non-finite gradient");
  }
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double decay = 1.0 - config.learning_rate * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] *= decay;
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

std::vector<double> SegmentModel::logits(std::span<const double> features) const {
  if (features.size() != input_dim) throw InvalidArgument("feature length does not match model input");
  std::vector<double> hidden;
  std::span<const double> x = features;
  if (hidden_units) {
    hidden = hidden_bias;
    for (std::size_t i = 0; i < input_dim; ++i) {
      const double* w = hidden_weights.data() + i * hidden_units;
      for (std::size_t k = 0; k < hidden_units; ++k) hidden[k] += features[i] * w[k];
    }
    for (double& h : hidden) h = std::max(h, 0.0);
    x = hidden;
  }
  std::vector<double> out = bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double* w = weights.data() + i * output_dim;
    for (std::size_t j = 0; j < output_dim; ++j) out[j] += x[i] * w[j];
  }
  return out;
}

std::vector<std::uint64_t> class_counts(const EncodedDataset& data, std::size_t num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (const auto& ranks : data.positive_ranks) {
    for (std::size_t rank : ranks) {
      if (rank == 0 || rank > num_classes) throw InvalidArgument("rank out of range in class_counts");
      ++counts[rank - 1];
    }
  }
  return counts;
}

namespace {

SegmentModel initial_model(const EncodedDataset& train, const Segmentation& seg, std::size_t r,
                           const TrainConfig& config, std::span<const std::uint64_t> counts, Rng& rng) {
  SegmentModel m;
  m.segment_index = static_cast<std::uint32_t>(r);
  m.first_rank = seg[r].start_rank;
  m.input_dim = train.feature_dim;
  m.hidden_units = config.hidden_units;
  m.output_dim = seg.class_count(r);
  m.decision_threshold = config.decision_threshold;
  if (m.hidden_units) {
    m.hidden_weights.resize(m.input_dim * m.hidden_units);
    const double scale = std::sqrt(2.0 / static_cast<double>(m.input_dim));
    for (double& w : m.hidden_weights) w = scale * rng.normal();
    m.hidden_bias.assign(m.hidden_units, 0.0);
    m.weights.resize(m.hidden_units * m.output_dim);
    const double out_scale = std::sqrt(1.0 / static_cast<double>(m.hidden_units));
    for (double& w : m.weights) w = out_scale * rng.normal();
  } else {
    m.weights.assign(m.input_dim * m.output_dim, 0.0);
  }
  m.bias.assign(m.output_dim, 0.0);
  if (config.prior_bias_init) {
    const double n = static_cast<double>(train.size());
    for (std::size_t j = 0; j < m.output_dim; ++j) {
      double prevalence = static_cast<double>(counts[m.first_rank - 1 + j]) / n;
      prevalence = std::clamp(prevalence, 0.5 / n, 1.0 - 0.5 / n);
      m.bias[j] = std::log(prevalence / (1.0 - prevalence));
    }
  }
  return m;
}

}  // namespace

TrainResult train_segment_model(const EncodedDataset& train, const Segmentation& seg, const RateTable& rates,
                                std::size_t r, const TrainConfig& config) {
  config.validate();
  if (r >= seg.size()) throw InvalidArgument("segment index out of range");
  if (train.size() == 0) throw InvalidArgument("empty training set");
  if (train.feature_dim == 0) throw InvalidArgument("training set has no features");

  const std::size_t n = train.size();
  const std::size_t out_dim = seg.class_count(r);
  const std::size_t first = seg[r].start_rank;
  const std::size_t last = seg[r].end_rank;
  const auto all_counts = class_counts(train, seg.num_classes());
  const std::vector<std::uint64_t> seg_counts(all_counts.begin() + static_cast<long>(first - 1),
                                              all_counts.begin() + static_cast<long>(last));

  std::vector<std::uint8_t> targets(n * out_dim, 0);
  std::vector<double> sample_beta(n, 1.0);
  const bool sh_family = uses_beta_sh(config.loss.family);
  for (std::size_t k = 0; k < n; ++k) {
    bool positive = false;
    for (std::size_t rank : train.positive_ranks[k]) {
      if (rank >= first && rank <= last) {
        targets[k * out_dim + (rank - first)] = 1;
        positive = true;
      }
    }
    if (sh_family && !(positive && !config.loss.sh_on_positives)) {
      sample_beta[k] = beta_sh(std::span<const std::size_t>(train.positive_ranks[k]), seg, rates, r);
    }
  }

  Rng rng(Rng::derive(config.seed, r));
  TrainResult result;
  result.model = initial_model(train, seg, r, config, all_counts, rng);
  SegmentModel& m = result.model;
  if (config.max_steps == 0) return result;
  result.loss_history.reserve(config.max_steps);

  const std::size_t H = m.hidden_units;
  const std::size_t D = m.input_dim;
  const std::size_t K = m.last_layer_inputs();
  std::vector<double> g_w(m.weights.size()), g_b(out_dim), g_hw(m.hidden_weights.size()), g_hb(H);
  AdamState s_w, s_b, s_hw, s_hb;
  std::vector<double> hidden(H), dhidden(H), logits(out_dim), dlogits(out_dim);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;

  const double batch_scale =
      config.loss.reduction == Reduction::mean ? 1.0 / static_cast<double>(config.batch_size) : 1.0;

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    std::fill(g_w.begin(), g_w.end(), 0.0);
    std::fill(g_b.begin(), g_b.end(), 0.0);
    std::fill(g_hw.begin(), g_hw.end(), 0.0);
    std::fill(g_hb.begin(), g_hb.end(), 0.0);
    double batch_loss = 0.0;

    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == n) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      const std::size_t k = order[cursor++];
      const auto x_in = train.row(k);

      std::span<const double> x = x_in;
      if (H) {
        std::copy(m.hidden_bias.begin(), m.hidden_bias.end(), hidden.begin());
        for (std::size_t i = 0; i < D; ++i) {
          const double* w = m.hidden_weights.data() + i * H;
          for (std::size_t h = 0; h < H; ++h) hidden[h] += x_in[i] * w[h];
        }
        for (double& h : hidden) h = std::max(h, 0.0);
        x = hidden;
      }
      std::copy(m.bias.begin(), m.bias.end(), logits.begin());
      for (std::size_t i = 0; i < K; ++i) {
        const double* w = m.weights.data() + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) logits[j] += x[i] * w[j];
      }

      LossInput input{logits, std::span<const std::uint8_t>(targets.data() + k * out_dim, out_dim), sample_beta[k],
                      seg_counts};
      batch_loss += loss_and_grad_into(input, config.loss, dlogits);

      for (std::size_t i = 0; i < K; ++i) {
        double* gw = g_w.data() + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) gw[j] += x[i] * dlogits[j];
      }
      for (std::size_t j = 0; j < out_dim; ++j) g_b[j] += dlogits[j];
      if (H) {
        for (std::size_t h = 0; h < H; ++h) {
          double acc = 0.0;
          if (hidden[h] > 0.0) {
            const double* w = m.weights.data() + h * out_dim;
            for (std::size_t j = 0; j < out_dim; ++j) acc += w[j] * dlogits[j];
          }
          dhidden[h] = acc;
          g_hb[h] += acc;
        }
        for (std::size_t i = 0; i < D; ++i) {
          double* gw = g_hw.data() + i * H;
          for (std::size_t h = 0; h < H; ++h) gw[h] += x_in[i] * dhidden[h];
        }
      }
    }

    batch_loss *= batch_scale;
    if (!std::isfinite(batch_loss)) {
      throw NumericError("segment " + std::to_string(r) + " diverged at step " + std::to_string(step));
    }
    result.loss_history.push_back(batch_loss);

    for (auto* g : {&g_w, &g_b, &g_hw, &g_hb}) {
      for (double& v : *g) v *= batch_scale;
    }
    adamw_step(m.weights, g_w, s_w, config, step);
    adamw_step(m.bias, g_b, s_b, config, step);
    if (H) {
      adamw_step(m.hidden_weights, g_hw, s_hw, config, step);
      adamw_step(m.hidden_bias, g_hb, s_hb, config, step);
    }
  }
  return result;
}

std::vector<TrainResult> train_all_segments(const EncodedDataset& train, const Segmentation& seg,
                                            const RateTable& rates, const TrainConfig& config, bool parallel) {
  std::vector<TrainResult> results;
  results.reserve(seg.size());
  if (!parallel) {
    for (std::size_t r = 0; r < seg.size(); ++r) results.push_back(train_segment_model(train, seg, rates, r, config));
    return results;
  }
  std::vector<std::future<TrainResult>> jobs;
  for (std::size_t r = 0; r < seg.size(); ++r) {
    jobs.push_back(std::async(std::launch::async, [&, r] { return train_segment_model(train, seg, rates, r, config); }));
  }
  for (auto& job : jobs) results.push_back(job.get());
  return results;
}

std::set<std::size_t> predict(std::span<const SegmentModel> models, std::span<const double> features) {
  if (models.empty()) throw InvalidArgument("missing segment model 0");
  std::vector<const SegmentModel*> by_index(models.size(), nullptr);
  for (const auto& m : models) {
    if (m.segment_index >= models.size() || by_index[m.segment_index]) {
      throw InvalidArgument("segment model indices must be exactly 0.." + std::to_string(models.size() - 1));
    }
    by_index[m.segment_index] = &m;
  }
  std::set<std::size_t> out;
  for (std::size_t r = 0; r < by_index.size(); ++r) {
    if (!by_index[r]) throw InvalidArgument("missing segment model " + std::to_string(r));
    const auto& m = *by_index[r];
    const auto z = m.logits(features);
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (sigmoid(z[j]) >= m.decision_threshold) out.insert(m.first_rank + j);
    }
  }
  return out;
}

std::vector<std::set<std::size_t>> predict_all(std::span<const SegmentModel> models, const EncodedDataset& data) {
  std::vector<std::set<std::size_t>> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict(models, data.row(i)));
  return out;
}

}  // namespace shloss
