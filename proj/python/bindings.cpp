// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "shloss/cleaner.hpp"
#include "shloss/corpus.hpp"
#include "shloss/error.hpp"
#include "shloss/losses.hpp"
#include "shloss/metrics.hpp"
#include "shloss/pipeline.hpp"
#include "shloss/segmenter.hpp"
#include "shloss/synth.hpp"

namespace py = pybind11;
using namespace shloss;

namespace {

using SegmentTuple = std::tuple<std::size_t, std::size_t, double, double>;

Segmentation to_segmentation(const std::vector<SegmentTuple>& segments) {
  std::vector<Segment> parts;
  for (const auto& [start, end, sigma, fmin] : segments) parts.push_back({start, end, sigma, fmin});
  return Segmentation(kDefaultEta, std::move(parts));
}

RunConfig make_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
  for (const auto& [k, v] : overrides) c.set(k, v);
  c.validate();
  return c;
}

std::pair<double, std::vector<double>> loss_and_grad_py(const std::vector<double>& logits,
                                                        const std::vector<std::uint8_t>& targets,
                                                        const std::string& family, double beta,
                                                        const std::vector<std::uint64_t>& counts, double gamma,
                                                        double cb_beta) {
  LossConfig cfg;
  cfg.family = parse_loss_family(family);
  cfg.gamma = gamma;
  cfg.cb_beta = cb_beta;
  auto out = loss_and_grad({logits, targets, beta, counts}, cfg);
  return {out.loss, std::move(out.grad)};
}

}  // namespace

PYBIND11_MODULE(_shloss, m) {
  m.doc() = "Segmented long-tail multi-label training: losses, segmentation, cleaning, pipeline";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<StageError>(m, "StageError", base.ptr());

  // Losses over q = y p + (1 - y)(1 - p).
  m.def("bce", &bce, py::arg("p"), py::arg("y"), py::arg("epsilon") = 1e-12);
  m.def("ce", [](const std::vector<double>& q) { return ce_multilabel(q); }, py::arg("q"));
  m.def("focal", [](const std::vector<double>& q, double gamma) { return focal(q, gamma); }, py::arg("q"),
        py::arg("gamma") = 2.0);
  m.def("cb_weight", &cb_weight, py::arg("n"), py::arg("cb_beta") = 0.99);
  m.def(
      "cb_focal",
      [](const std::vector<double>& q, double gamma, double cb_beta, const std::vector<std::uint64_t>& counts) {
        return cb_focal(q, gamma, cb_beta, counts);
      },
      py::arg("q"), py::arg("gamma"), py::arg("cb_beta"), py::arg("class_counts"));
  m.def("sh", [](const std::vector<double>& q, double b) { return sh(q, b); }, py::arg("q"), py::arg("beta_sh"));
  m.def(
      "sh_focal", [](const std::vector<double>& q, double b, double gamma) { return sh_focal(q, b, gamma); },
      py::arg("q"), py::arg("beta_sh"), py::arg("gamma") = 2.0);
  m.def("loss_and_grad", &loss_and_grad_py, py::arg("logits"), py::arg("targets"), py::arg("family") = "BCE",
        py::arg("beta_sh") = 1.0, py::arg("class_counts") = std::vector<std::uint64_t>{}, py::arg("gamma") = 2.0,
        py::arg("cb_beta") = 0.99, "Returns (loss, d loss / d logits).");

  // Segmentation. Segments are (start_rank, end_rank, sigma, min_frequency).
  m.def(
      "segment_tail", [](const std::vector<double>& f, double eta) { return segment_tail(f, eta); },
      py::arg("frequencies"), py::arg("eta") = kDefaultEta);
  m.def(
      "segment_all",
      [](const std::vector<double>& f, double eta) {
        const Segmentation seg = segment_all(f, eta);
        std::vector<SegmentTuple> out;
        for (const auto& s : seg.segments())
          out.emplace_back(s.start_rank, s.end_rank, s.sigma, s.min_frequency);
        return out;
      },
      py::arg("frequencies"), py::arg("eta") = kDefaultEta);
  m.def(
      "beta_sh",
      [](const std::vector<std::size_t>& ranks, const std::vector<SegmentTuple>& segments,
         const std::vector<std::uint64_t>& positive_counts, std::size_t r) {
        return beta_sh(ranks, to_segmentation(segments), RateTable(positive_counts), r);
      },
      py::arg("positive_ranks"), py::arg("segments"), py::arg("positive_counts"), py::arg("r"));

  // Cleaner.
  m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); });
  m.def(
      "clean_codes",
      [](const std::map<std::string, double>& scores, double threshold) {
        Record rec;
        rec.id = "r";
        rec.text = "-";
        for (const auto& [code, s] : scores) rec.codes.insert(code);
        auto res = clean_labels_from_scores(rec, scores, threshold);
        return res.record.codes;
      },
      py::arg("scores"), py::arg("threshold") = kDefaultSimilarityThreshold,
      "Codes whose score is strictly above the threshold.");

  // Metrics.
  m.def(
      "micro_f1", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) { return micro_f1(Counts{tp, fp, fn}); },
      py::arg("tp"), py::arg("fp"), py::arg("fn"));

  // Synthetic data.
  m.def("exponent_for_ratio", &exponent_for_ratio, py::arg("num_classes"), py::arg("ratio"));
  m.def(
      "synth",
      [](const std::string& path, std::uint64_t seed, std::size_t classes, std::size_t samples, double ratio,
         std::size_t dim, double labels_per_sample, double noise) {
        SynthSpec spec;
        spec.num_classes = classes;
        spec.num_samples = samples;
        spec.head_tail_ratio = ratio;
        spec.power_exponent = exponent_for_ratio(classes, ratio);
        spec.feature_dim = dim;
        spec.labels_per_sample = labels_per_sample;
        spec.noise_std = noise;
        spec.seed = seed;
        write_dataset_file(path, generate(spec));
      },
      py::arg("path"), py::arg("seed") = 0, py::arg("classes") = 60, py::arg("samples") = 5000,
      py::arg("ratio") = 100.0, py::arg("dim") = 32, py::arg("labels_per_sample") = 1.5, py::arg("noise") = 0.5,
      "Writes a synthetic long-tailed dataset in the JSONL corpus format.");

  // Pipeline.
  m.def(
      "run_pipeline",
      [](const std::string& config, const std::map<std::string, std::string>& overrides, const std::string& stages) {
        const RunConfig c = make_config(config, overrides);
        std::vector<std::pair<std::string, bool>> out;
        {
          py::gil_scoped_release release;
          for (const auto& o : run_pipeline(c, parse_stage_list(stages)))
            out.emplace_back(std::string(to_string(o.stage)), o.skipped);
        }
        return out;
      },
      py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("stages") = "all", "Runs stages; returns (stage, skipped) pairs in pipeline order.");
  m.def(
      "compare_losses",
      [](const std::string& config, const std::map<std::string, std::string>& overrides,
         const std::vector<std::string>& families) {
        const RunConfig c = make_config(config, overrides);
        std::vector<LossFamily> fams;
        for (const auto& f : families) fams.push_back(parse_loss_family(f));
        if (fams.empty()) fams = c.families;
        py::dict out;
        for (const auto& [name, report] : compare_losses(c, fams)) {
          py::dict row;
          row["Total"] = report.total_micro_f1;
          for (const auto& s : report.per_segment) row[py::str(s.name)] = s.micro_f1;
          out[py::str(name)] = row;
        }
        return out;
      },
      py::arg("config") = "", py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("families") = std::vector<std::string>{},
      "Micro F1 per family: {family: {'Total': f1, 'Head': f1, ...}}.");
}
