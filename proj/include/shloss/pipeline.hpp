// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shloss/losses.hpp"
#include "shloss/metrics.hpp"
#include "shloss/trainer.hpp"

namespace shloss {

enum class Stage { ingest, clean, threshold, segment, split, train, eval };

inline constexpr Stage kAllStages[] = {Stage::ingest, Stage::clean, Stage::threshold, Stage::segment,
                                       Stage::split,  Stage::train, Stage::eval};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
/// Comma-separated stage names; "all" selects every stage.
std::set<Stage> parse_stage_list(std::string_view list);

/// Everything a run needs. Loaded from a flat `key = value` file; command
/// line flags are applied afterwards with set().
struct RunConfig {
  std::string dataset;
  std::string embeddings;     // embedding manifest; empty skips label cleaning
  std::string abbreviations;  // TSV dictionary; empty disables expansion
  std::string output_dir = "shloss-out";

  std::vector<std::string> section_headers;  // empty keeps the whole note
  std::size_t max_len = kDefaultMaxTokens;
  std::uint64_t min_count = 200;
  bool threshold_fixpoint = false;
  double clean_threshold = 0.55;
  double eta = 0.5;
  std::array<unsigned, 3> split_ratios = {94, 3, 3};
  std::uint64_t seed = 0;

  std::vector<LossFamily> families = {LossFamily::bce, LossFamily::sh_focal};
  /// Train non-SH families per segment too; by default they get one model.
  bool segment_all_families = false;
  bool parallel = true;
  TrainConfig train;
  /// "<family>.<key>" settings, applied on top of `train` for that family.
  std::map<LossFamily, std::vector<std::pair<std::string, std::string>>> family_settings;

  /// Applies one setting. Throws InvalidArgument on an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);

  /// Resolved training config for `family` (seed and loss family filled in).
  TrainConfig train_config(LossFamily family) const;

  /// Checks ranges and that the referenced files exist.
  void validate() const;

  /// Canonical `key=value` lines of every resolved setting, sorted by key.
  std::map<std::string, std::string> canonical() const;
  std::string canonical_text() const;
};

/// Parses a config file. Relative paths are resolved against its directory.
/// '#' starts a comment. Throws ParseError with the line number.
RunConfig load_run_config(const std::string& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

struct StageOutcome {
  Stage stage;
  bool skipped = false;  // fingerprint and outputs matched the manifest
};

/// Runs the requested stages in pipeline order under `config.output_dir`.
///
/// Each stage reads the previous stage's artifacts, writes its own, and
/// records in `manifest.json` a fingerprint of its inputs and settings plus
/// the SHA-256 of every output. A stage whose fingerprint and outputs still
/// match is skipped. Throws StageError when a prerequisite artifact is
/// missing or no longer matches the hash recorded by the stage that wrote it.
std::vector<StageOutcome> run_pipeline(const RunConfig& config, const std::set<Stage>& stages);

/// Evaluates the trained models of each family on the test split. Rows keep
/// the order of `families`; columns are the data segmentation's segments.
/// Throws StageError when a family has no trained models.
std::vector<std::pair<std::string, MetricsReport>> compare_losses(const RunConfig& config,
                                                                  const std::vector<LossFamily>& families);

}  // namespace shloss
