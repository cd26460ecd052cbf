// SPDX-License-Identifier: Apache-2.0
// Command-line driver for the segmentation / training / evaluation pipeline.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "shloss/error.hpp"
#include "shloss/pipeline.hpp"
#include "shloss/synth.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> stages;
  std::optional<std::string> loss;
  std::optional<double> eta;
  std::optional<std::uint64_t> min_count;
  std::optional<double> threshold;
};

void add_common(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config, "flat key=value run configuration");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--seed", f.seed, "seed for every random draw");
  app.add_option("--stages", f.stages, "comma-separated stages (run only)");
  app.add_option("--loss", f.loss, "comma-separated loss families");
  app.add_option("--eta", f.eta, "segmentation eta in (0, 1]");
  app.add_option("--min-count", f.min_count, "frequency threshold");
  app.add_option("--threshold", f.threshold, "label-cleaning similarity threshold");
}

shloss::RunConfig resolve(const CommonFlags& f) {
  shloss::RunConfig cfg = f.config.empty() ? shloss::RunConfig{} : shloss::load_run_config(f.config);
  if (f.out) cfg.set("out", *f.out);
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.loss) cfg.set("families", *f.loss);
  if (f.eta) cfg.eta = *f.eta;
  if (f.min_count) cfg.min_count = *f.min_count;
  if (f.threshold) cfg.clean_threshold = *f.threshold;
  return cfg;
}

void run_stages(const shloss::RunConfig& cfg, const std::set<shloss::Stage>& stages) {
  for (const auto& o : shloss::run_pipeline(cfg, stages)) {
    spdlog::info("{}: {}", shloss::to_string(o.stage), o.skipped ? "up to date" : "done");
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("shloss");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("SHLOSS_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Frequency segmentation and segmented harmonic loss toolkit"};
  app.require_subcommand(1);
  CommonFlags common;

  struct Verb {
    const char* name;
    const char* help;
    std::optional<shloss::Stage> stage;
  };
  const Verb verbs[] = {
      {"run", "run several stages (see --stages, default all)", std::nullopt},
      {"ingest", "parse records and build model inputs", shloss::Stage::ingest},
      {"clean", "drop codes whose description is not similar to the note", shloss::Stage::clean},
      {"threshold", "remove rare codes", shloss::Stage::threshold},
      {"segment", "segment the class frequency distribution", shloss::Stage::segment},
      {"split", "stratified train/validation/test split", shloss::Stage::split},
      {"train", "train per-segment models for each loss family", shloss::Stage::train},
      {"eval", "segment-wise micro F1 on the test split", shloss::Stage::eval},
  };
  for (const auto& v : verbs) add_common(*app.add_subcommand(v.name, v.help), common);

  auto* compare = app.add_subcommand("compare", "print a loss-family comparison table");
  add_common(*compare, common);
  bool csv = false;
  compare->add_flag("--csv", csv, "machine-readable output");

  auto* synth = app.add_subcommand("synth", "write a synthetic long-tailed dataset");
  shloss::SynthSpec spec;
  std::string synth_out;
  std::optional<double> exponent;
  synth->add_option("--out", synth_out, "dataset file to write")->required();
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--classes", spec.num_classes, "number of classes")->capture_default_str();
  synth->add_option("--samples", spec.num_samples, "number of samples")->capture_default_str();
  synth->add_option("--ratio", spec.head_tail_ratio, "head/tail frequency ratio")->capture_default_str();
  synth->add_option("--exponent", exponent, "power-law exponent (default: from --ratio)");
  synth->add_option("--dim", spec.feature_dim, "feature dimension")->capture_default_str();
  synth->add_option("--labels-per-sample", spec.labels_per_sample, "mean labels per sample")->capture_default_str();
  synth->add_option("--noise", spec.noise_std, "feature noise standard deviation")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.power_exponent = exponent ? *exponent : shloss::exponent_for_ratio(spec.num_classes, spec.head_tail_ratio);
      const auto ds = shloss::generate(spec);
      shloss::write_dataset_file(synth_out, ds);
      spdlog::info("wrote {} records, {} classes to {}", ds.size(), ds.class_universe().size(), synth_out);
      return 0;
    }
    const auto cfg = resolve(common);
    if (compare->parsed()) {
      const auto rows = shloss::compare_losses(cfg, cfg.families);
      if (csv) shloss::write_comparison_csv(std::cout, rows);
      else shloss::write_comparison_table(std::cout, rows);
      return 0;
    }
    for (const auto& v : verbs) {
      if (!app.got_subcommand(v.name)) continue;
      if (v.stage) {
        if (common.stages) throw shloss::InvalidArgument("--stages only applies to 'run'");
        run_stages(cfg, {*v.stage});
      } else {
        run_stages(cfg, shloss::parse_stage_list(common.stages.value_or("all")));
      }
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
