// SPDX-License-Identifier: Apache-2.0
#include "shloss/pipeline.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "shloss/cleaner.hpp"
#include "shloss/corpus.hpp"
#include "shloss/embedding.hpp"
#include "shloss/error.hpp"
#include "shloss/segmenter.hpp"

namespace shloss {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Stage names

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::clean: return "clean";
    case Stage::threshold: return "threshold";
    case Stage::segment: return "segment";
    case Stage::split: return "split";
    case Stage::train: return "train";
    case Stage::eval: return "eval";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown stage '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    std::string item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::set<Stage> parse_stage_list(std::string_view list) {
  std::set<Stage> out;
  for (const auto& name : split_list(list, ',')) {
    if (name == "all") out.insert(std::begin(kAllStages), std::end(kAllStages));
    else out.insert(parse_stage(name));
  }
  if (out.empty()) throw InvalidArgument("empty stage list");
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw InvalidArgument("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v;
  for (char c : value) v += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument("bad value for " + key + ": '" + value + "' (expected true/false)");
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

/// Keys that only change how a TrainConfig is built.
bool set_train_key(TrainConfig& t, const std::string& key, const std::string& value) {
  if (key == "learning_rate") t.learning_rate = parse_number<double>(key, value);
  else if (key == "adam_beta1") t.adam_beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") t.adam_beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") t.adam_eps = parse_number<double>(key, value);
  else if (key == "weight_decay") t.weight_decay = parse_number<double>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "max_steps") t.max_steps = parse_number<std::size_t>(key, value);
  else if (key == "hidden_units") t.hidden_units = parse_number<std::size_t>(key, value);
  else if (key == "decision_threshold") t.decision_threshold = parse_number<double>(key, value);
  else if (key == "prior_bias_init") t.prior_bias_init = parse_bool(key, value);
  else if (key == "gamma") t.loss.gamma = parse_number<double>(key, value);
  else if (key == "cb_beta") t.loss.cb_beta = parse_number<double>(key, value);
  else if (key == "epsilon") t.loss.epsilon = parse_number<double>(key, value);
  else if (key == "sh_on_positives") t.loss.sh_on_positives = parse_bool(key, value);
  else return false;
  return true;
}

void put_train_keys(std::map<std::string, std::string>& out, const std::string& prefix, const TrainConfig& t) {
  out[prefix + "learning_rate"] = format_double(t.learning_rate);
  out[prefix + "adam_beta1"] = format_double(t.adam_beta1);
  out[prefix + "adam_beta2"] = format_double(t.adam_beta2);
  out[prefix + "adam_eps"] = format_double(t.adam_eps);
  out[prefix + "weight_decay"] = format_double(t.weight_decay);
  out[prefix + "batch_size"] = std::to_string(t.batch_size);
  out[prefix + "max_steps"] = std::to_string(t.max_steps);
  out[prefix + "hidden_units"] = std::to_string(t.hidden_units);
  out[prefix + "decision_threshold"] = format_double(t.decision_threshold);
  out[prefix + "prior_bias_init"] = bool_text(t.prior_bias_init);
  out[prefix + "gamma"] = format_double(t.loss.gamma);
  out[prefix + "cb_beta"] = format_double(t.loss.cb_beta);
  out[prefix + "epsilon"] = format_double(t.loss.epsilon);
  out[prefix + "sh_on_positives"] = bool_text(t.loss.sh_on_positives);
}

std::string families_text(const std::vector<LossFamily>& families) {
  std::string out;
  for (LossFamily f : families) {
    if (!out.empty()) out += ',';
    out += to_string(f);
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "dataset") dataset = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "abbreviations") abbreviations = value;
  else if (key == "out" || key == "output_dir") output_dir = value;
  else if (key == "section_headers") section_headers = split_list(value, ',');
  else if (key == "max_len") max_len = parse_number<std::size_t>(key, value);
  else if (key == "min_count") min_count = parse_number<std::uint64_t>(key, value);
  else if (key == "threshold_fixpoint") threshold_fixpoint = parse_bool(key, value);
  else if (key == "clean_threshold" || key == "threshold") clean_threshold = parse_number<double>(key, value);
  else if (key == "eta") eta = parse_number<double>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "segment_all_families") segment_all_families = parse_bool(key, value);
  else if (key == "parallel") parallel = parse_bool(key, value);
  else if (key == "split") {
    const auto parts = split_list(value, ':');
    if (parts.size() != 3) throw InvalidArgument("split must look like 94:3:3, got '" + value + "'");
    for (std::size_t j = 0; j < 3; ++j) split_ratios[j] = parse_number<unsigned>(key, parts[j]);
  } else if (key == "families" || key == "loss") {
    families.clear();
    for (const auto& name : split_list(value, ',')) {
      const LossFamily f = parse_loss_family(name);
      if (std::find(families.begin(), families.end(), f) == families.end()) families.push_back(f);
    }
    if (families.empty()) throw InvalidArgument("families must name at least one loss family");
  } else if (set_train_key(train, key, value)) {
  } else if (const auto dot = key.find('.'); dot != std::string::npos) {
    const LossFamily f = parse_loss_family(key.substr(0, dot));
    const std::string sub = key.substr(dot + 1);
    TrainConfig probe = train;
    if (!set_train_key(probe, sub, value)) throw InvalidArgument("unknown training key '" + sub + "' in " + key);
    family_settings[f].emplace_back(sub, value);
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

TrainConfig RunConfig::train_config(LossFamily family) const {
  TrainConfig t = train;
  if (auto it = family_settings.find(family); it != family_settings.end()) {
    for (const auto& [k, v] : it->second) set_train_key(t, k, v);
  }
  t.seed = seed;
  t.loss.family = family;
  return t;
}

void RunConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in (0, 1]");
  if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
  if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
  if (!(clean_threshold >= -1.0 && clean_threshold <= 1.0)) throw InvalidArgument("clean threshold must lie in [-1, 1]");
  if (output_dir.empty()) throw InvalidArgument("output directory is empty");
  if (families.empty()) throw InvalidArgument("no loss families configured");
  SplitSpec{split_ratios, seed}.validate();
  for (LossFamily f : families) train_config(f).validate();
  for (const auto* path : {&dataset, &embeddings, &abbreviations}) {
    if (!path->empty() && !fs::is_regular_file(*path)) throw InvalidArgument("file not found: " + *path);
  }
}

std::map<std::string, std::string> RunConfig::canonical() const {
  std::map<std::string, std::string> out;
  out["dataset"] = dataset;
  out["embeddings"] = embeddings;
  out["abbreviations"] = abbreviations;
  out["out"] = output_dir;
  std::string headers;
  for (const auto& h : section_headers) headers += (headers.empty() ? "" : ",") + h;
  out["section_headers"] = headers;
  out["max_len"] = std::to_string(max_len);
  out["min_count"] = std::to_string(min_count);
  out["threshold_fixpoint"] = bool_text(threshold_fixpoint);
  out["clean_threshold"] = format_double(clean_threshold);
  out["eta"] = format_double(eta);
  out["split"] = std::to_string(split_ratios[0]) + ":" + std::to_string(split_ratios[1]) + ":" +
                 std::to_string(split_ratios[2]);
  out["seed"] = std::to_string(seed);
  out["families"] = families_text(families);
  out["segment_all_families"] = bool_text(segment_all_families);
  out["parallel"] = bool_text(parallel);
  put_train_keys(out, "", train);
  for (LossFamily f : families) {
    if (family_settings.count(f)) put_train_keys(out, std::string(to_string(f)) + ".", train_config(f));
  }
  return out;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : canonical()) out += k + "=" + v + "\n";
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  const fs::path base = fs::path(path).parent_path();
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if ((key == "dataset" || key == "embeddings" || key == "abbreviations" || key == "out" || key == "output_dir") &&
        !value.empty() && fs::path(value).is_relative()) {
      value = (base / value).lexically_normal().string();
    }
    try {
      cfg.set(key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

namespace {

std::optional<std::string> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

std::string sha256_file(const std::string& path) {
  auto content = slurp(path);
  if (!content) throw Error("cannot read " + path);
  return sha256_hex(*content);
}

// ---------------------------------------------------------------------------
// Manifest and stage plumbing

namespace {

constexpr const char* kManifestFile = "manifest.json";

class Workspace {
 public:
  explicit Workspace(const RunConfig& config) : config_(config), root_(config.output_dir) {
    if (auto text = slurp(root_ / kManifestFile)) {
      try {
        manifest_ = json::parse(*text);
      } catch (const json::exception& e) {
        throw Error("corrupt manifest " + (root_ / kManifestFile).string() + ": " + e.what());
      }
    }
    if (!manifest_.is_object()) manifest_ = json::object();
  }

  const fs::path& root() const { return root_; }

  const json* entry(Stage s) const {
    auto stages = manifest_.find("stages");
    if (stages == manifest_.end()) return nullptr;
    auto it = stages->find(std::string(to_string(s)));
    return it == stages->end() ? nullptr : &*it;
  }

  /// Content of an artifact written by `producer`, checked against the hash
  /// the producer recorded. `consumer` names the stage in errors.
  std::string artifact(Stage producer, const std::string& rel, const std::string& consumer) const {
    const json* e = entry(producer);
    const std::string hint = " (run the " + std::string(to_string(producer)) + " stage first)";
    if (!e || !e->contains("outputs") || !(*e)["outputs"].contains(rel)) {
      throw StageError(consumer, "missing prerequisite artifact " + rel + hint);
    }
    auto content = slurp(root_ / rel);
    if (!content) throw StageError(consumer, "missing prerequisite artifact " + rel + hint);
    if (sha256_hex(*content) != (*e)["outputs"][rel].get<std::string>()) {
      throw StageError(consumer, "stale artifact " + rel + ": contents differ from the hash recorded by the " +
                                     std::string(to_string(producer)) + " stage");
    }
    return *content;
  }

  /// Output paths recorded for `producer` that start with `prefix`.
  std::vector<std::string> outputs_with_prefix(Stage producer, const std::string& prefix) const {
    std::vector<std::string> out;
    const json* e = entry(producer);
    if (!e || !e->contains("outputs")) return out;
    for (const auto& [rel, hash] : (*e)["outputs"].items()) {
      if (rel.rfind(prefix, 0) == 0) out.push_back(rel);
    }
    return out;
  }

  bool up_to_date(Stage s, const std::string& fingerprint) const {
    const json* e = entry(s);
    if (!e || e->value("fingerprint", "") != fingerprint || !e->contains("outputs")) return false;
    for (const auto& [rel, hash] : (*e)["outputs"].items()) {
      auto content = slurp(root_ / rel);
      if (!content || sha256_hex(*content) != hash.get<std::string>()) return false;
    }
    return true;
  }

  void commit(Stage s, const std::string& fingerprint, const std::map<std::string, std::string>& inputs,
              const std::vector<std::pair<std::string, std::string>>& outputs) {
    std::set<std::string> fresh;
    for (const auto& [rel, content] : outputs) fresh.insert(rel);
    if (const json* old = entry(s); old && old->contains("outputs")) {
      for (const auto& [rel, hash] : (*old)["outputs"].items()) {
        if (!fresh.count(rel)) fs::remove(root_ / rel);
      }
    }
    json out_hashes = json::object();
    for (const auto& [rel, content] : outputs) {
      const fs::path p = root_ / rel;
      fs::create_directories(p.parent_path());
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      f.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!f) throw StageError(std::string(to_string(s)), "cannot write " + p.string());
      out_hashes[rel] = sha256_hex(content);
    }
    json e;
    e["fingerprint"] = fingerprint;
    e["config_hash"] = sha256_hex(config_.canonical_text());
    e["inputs"] = inputs;
    e["outputs"] = std::move(out_hashes);
    json stages = manifest_.contains("stages") ? manifest_["stages"] : json::object();
    stages[std::string(to_string(s))] = std::move(e);

    // Keep stage entries in pipeline order so the file is stable.
    json ordered = json::object();
    for (Stage t : kAllStages) {
      const std::string name(to_string(t));
      if (stages.contains(name)) ordered[name] = stages[name];
    }
    manifest_["config"] = config_.canonical();
    manifest_["stages"] = std::move(ordered);
    save();
  }

 private:
  void save() const {
    fs::create_directories(root_);
    std::ofstream f(root_ / kManifestFile, std::ios::trunc);
    f << manifest_.dump(2) << '\n';
    if (!f) throw Error("cannot write manifest in " + root_.string());
  }

  const RunConfig& config_;
  fs::path root_;
  json manifest_;
};

/// Settings that influence each stage's outputs.
std::vector<std::string> stage_keys(Stage s, const RunConfig& config) {
  switch (s) {
    case Stage::ingest: return {"section_headers", "max_len"};
    case Stage::clean: return {"clean_threshold"};
    case Stage::threshold: return {"min_count", "threshold_fixpoint"};
    case Stage::segment: return {"eta"};
    case Stage::split: return {"split", "seed"};
    case Stage::eval: return {"families"};
    case Stage::train: {
      std::vector<std::string> keys = {"families", "segment_all_families", "seed"};
      for (const auto& [k, v] : config.canonical()) {
        TrainConfig probe;
        const auto dot = k.find('.');
        const std::string sub = dot == std::string::npos ? k : k.substr(dot + 1);
        if (set_train_key(probe, sub, v)) keys.push_back(k);
      }
      return keys;
    }
  }
  return {};
}

std::string fingerprint(Stage s, const RunConfig& config, const std::map<std::string, std::string>& inputs) {
  std::string text = "stage=" + std::string(to_string(s)) + "\n";
  const auto canon = config.canonical();
  for (const auto& k : stage_keys(s, config)) text += k + "=" + canon.at(k) + "\n";
  for (const auto& [label, hash] : inputs) text += "input " + label + "=" + hash + "\n";
  return sha256_hex(text);
}

std::string external_hash(const std::string& path, const std::string& stage) {
  auto content = slurp(path);
  if (!content) throw StageError(stage, "cannot read input file " + path);
  return sha256_hex(*content);
}

Dataset dataset_from(const std::string& content) {
  std::istringstream in(content);
  return parse_records(in).dataset;
}

std::string records_text(const Dataset& ds) {
  std::ostringstream out;
  write_records(out, ds);
  return out.str();
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

const char* kFoldNames[3] = {"train", "validation", "test"};

SplitIndices parse_split(const std::string& content, const Dataset& ds) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[ds.records()[i].id] = i;
  SplitIndices out;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "split file: expected id<TAB>fold");
    const auto it = index.find(line.substr(0, tab));
    if (it == index.end()) throw ParseError(line_no, "split file: unknown record " + line.substr(0, tab));
    const std::string fold = line.substr(tab + 1);
    if (fold == kFoldNames[0]) out.train.push_back(it->second);
    else if (fold == kFoldNames[1]) out.validation.push_back(it->second);
    else if (fold == kFoldNames[2]) out.test.push_back(it->second);
    else throw ParseError(line_no, "split file: unknown fold " + fold);
  }
  return out;
}

std::vector<std::vector<std::size_t>> ranks_of(const Dataset& ds, const ClassFrequencyTable& table) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(ds.size());
  for (const auto& rec : ds.records()) {
    std::vector<std::size_t> ranks;
    for (const auto& code : rec.codes) ranks.push_back(table.rank_of(code).value());
    std::sort(ranks.begin(), ranks.end());
    out.push_back(std::move(ranks));
  }
  return out;
}

std::string family_dir(LossFamily f) { return "train/" + std::string(to_string(f)) + "/"; }

std::string checkpoint_path(LossFamily f, std::size_t r) {
  return family_dir(f) + "segment_" + std::to_string(r) + ".ckpt";
}

// Shared by the eval stage and compare_losses.
std::vector<std::pair<std::string, MetricsReport>> evaluate(const Workspace& ws,
                                                            const std::vector<LossFamily>& families,
                                                            const std::string& stage) {
  const Dataset ds = dataset_from(ws.artifact(Stage::threshold, "threshold/dataset.jsonl", stage));
  std::istringstream seg_in(ws.artifact(Stage::segment, "segment/segmentation.tsv", stage));
  const Segmentation seg = read_segmentation(seg_in);
  const SplitIndices split = parse_split(ws.artifact(Stage::split, "split/split.tsv", stage), ds);
  const ClassFrequencyTable table = build_frequency_table(ds);
  if (seg.num_classes() != table.size()) {
    throw StageError(stage, "segmentation covers " + std::to_string(seg.num_classes()) + " classes, dataset has " +
                                std::to_string(table.size()));
  }
  const EncodedDataset test = encode(ds, table).select(split.test);
  LabelSets labels;
  for (const auto& ranks : test.positive_ranks) labels.emplace_back(ranks.begin(), ranks.end());

  std::vector<std::pair<std::string, MetricsReport>> rows;
  for (LossFamily f : families) {
    const auto files = ws.outputs_with_prefix(Stage::train, family_dir(f) + "segment_");
    if (files.empty()) {
      throw StageError(stage, "no trained models for loss family " + std::string(to_string(f)));
    }
    std::vector<SegmentModel> models;
    for (std::size_t r = 0; r < files.size(); ++r) {
      std::istringstream in(ws.artifact(Stage::train, checkpoint_path(f, r), stage));
      models.push_back(read_checkpoint(in));
    }
    const auto preds = predict_all(models, test);
    rows.emplace_back(std::string(to_string(f)), segmentwise_report(preds, labels, seg));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Stages

struct StagePlan {
  std::map<std::string, std::string> inputs;  // label -> hash
  std::function<std::vector<std::pair<std::string, std::string>>()> produce;
};

StagePlan plan_ingest(const RunConfig& config, const Workspace&) {
  const std::string stage = "ingest";
  if (config.dataset.empty()) throw StageError(stage, "no dataset configured");
  StagePlan plan;
  plan.inputs["dataset"] = external_hash(config.dataset, stage);
  if (!config.abbreviations.empty()) plan.inputs["abbreviations"] = external_hash(config.abbreviations, stage);
  plan.produce = [&config] {
    IngestResult res = read_dataset_file(config.dataset);
    AbbreviationMap abbr;
    if (!config.abbreviations.empty()) abbr = read_abbreviation_file(config.abbreviations);
    std::vector<Record> records = res.dataset.records();
    for (auto& rec : records) {
      if (!rec.text) continue;
      std::string text = config.section_headers.empty() ? *rec.text : extract_sections(*rec.text, config.section_headers);
      if (!abbr.empty()) text = expand_abbreviations(text, abbr);
      rec.text = tokenize_and_fit(text, config.max_len).joined();
    }
    const Dataset prepared(std::move(records));
    std::ostringstream text, js;
    write_ingest_report(text, js, res.report);
    return std::vector<std::pair<std::string, std::string>>{
        {"ingest/dataset.jsonl", records_text(prepared)},
        {"ingest/report.txt", text.str()},
        {"ingest/report.json", js.str()},
    };
  };
  return plan;
}

StagePlan plan_clean(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "clean";
  StagePlan plan;
  auto input = std::make_shared<std::string>(ws.artifact(Stage::ingest, "ingest/dataset.jsonl", stage));
  plan.inputs["dataset"] = sha256_hex(*input);
  std::shared_ptr<EmbeddingManifest> manifest;
  if (!config.embeddings.empty()) {
    plan.inputs["embeddings"] = external_hash(config.embeddings, stage);
    manifest = std::make_shared<EmbeddingManifest>(read_embedding_manifest(config.embeddings));
    for (const auto& [id, path] : manifest->notes) plan.inputs["note " + id] = external_hash(path, stage);
    for (const auto& [id, path] : manifest->codes) plan.inputs["code " + id] = external_hash(path, stage);
  }
  plan.produce = [&config, input, manifest, stage] {
    const Dataset ds = dataset_from(*input);
    if (!manifest) {
      return std::vector<std::pair<std::string, std::string>>{
          {"clean/dataset.jsonl", *input},
          {"clean/report.tsv", render([](std::ostream& o) { write_clean_report(o, {}); })},
          {"clean/summary.txt", "label cleaning disabled (no embeddings configured)\n"},
      };
    }
    std::map<std::string, EmbeddingMatrix> descriptions;
    for (const auto& code : ds.class_universe()) {
      auto it = manifest->codes.find(code);
      if (it == manifest->codes.end()) throw StageError(stage, "no description embedding for code " + code);
      descriptions.emplace(code, read_embedding_file(it->second));
    }
    std::vector<CleanReport> reports;
    std::vector<std::string> dropped;
    Dataset kept;
    std::size_t codes_before = 0, codes_after = 0;
    for (const auto& rec : ds.records()) {
      auto it = manifest->notes.find(rec.id);
      if (it == manifest->notes.end()) throw StageError(stage, "no note embedding for record " + rec.id);
      CleanResult res = clean_labels(rec, read_embedding_file(it->second), descriptions, config.clean_threshold);
      codes_before += rec.codes.size();
      codes_after += res.record.codes.size();
      reports.push_back(std::move(res.report));
      if (res.record.codes.empty()) dropped.push_back(rec.id);
      else kept.push_back(std::move(res.record));
    }
    std::ostringstream summary;
    summary << "threshold: " << format_double(config.clean_threshold) << '\n'
            << "codes kept: " << codes_after << " of " << codes_before << '\n'
            << "records dropped (no code left): " << dropped.size() << '\n';
    for (const auto& id : dropped) summary << "  " << id << '\n';
    return std::vector<std::pair<std::string, std::string>>{
        {"clean/dataset.jsonl", records_text(kept)},
        {"clean/report.tsv", render([&](std::ostream& o) { write_clean_report(o, reports); })},
        {"clean/summary.txt", summary.str()},
    };
  };
  return plan;
}

StagePlan plan_threshold(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "threshold";
  StagePlan plan;
  auto input = std::make_shared<std::string>(ws.artifact(Stage::clean, "clean/dataset.jsonl", stage));
  plan.inputs["dataset"] = sha256_hex(*input);
  plan.produce = [&config, input, stage] {
    const Dataset ds = dataset_from(*input);
    if (ds.empty()) throw StageError(stage, "dataset is empty");
    ThresholdResult res = apply_frequency_threshold(ds, config.min_count, config.threshold_fixpoint);
    if (res.dataset.empty()) {
      throw StageError(stage, "no records left at min_count " + std::to_string(config.min_count));
    }
    const ClassFrequencyTable table = build_frequency_table(res.dataset);
    return std::vector<std::pair<std::string, std::string>>{
        {"threshold/dataset.jsonl", records_text(res.dataset)},
        {"threshold/frequency_table.tsv", render([&](std::ostream& o) { write_frequency_table(o, table); })},
        {"threshold/report.txt", render([&](std::ostream& o) { write_threshold_report(o, res.report); })},
    };
  };
  return plan;
}

StagePlan plan_segment(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "segment";
  StagePlan plan;
  auto input = std::make_shared<std::string>(ws.artifact(Stage::threshold, "threshold/dataset.jsonl", stage));
  plan.inputs["dataset"] = sha256_hex(*input);
  plan.produce = [&config, input] {
    const Dataset ds = dataset_from(*input);
    const ClassFrequencyTable table = build_frequency_table(ds);
    const auto freqs = table.frequencies();
    const Segmentation seg = segment_all(freqs, config.eta);
    const RateTable rates = positive_counts(ds, table, seg);
    return std::vector<std::pair<std::string, std::string>>{
        {"segment/segmentation.tsv", render([&](std::ostream& o) { write_segmentation(o, seg); })},
        {"segment/rates.tsv", render([&](std::ostream& o) { write_rate_table(o, rates); })},
    };
  };
  return plan;
}

StagePlan plan_split(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "split";
  StagePlan plan;
  auto input = std::make_shared<std::string>(ws.artifact(Stage::threshold, "threshold/dataset.jsonl", stage));
  plan.inputs["dataset"] = sha256_hex(*input);
  plan.produce = [&config, input] {
    const Dataset ds = dataset_from(*input);
    const ClassFrequencyTable table = build_frequency_table(ds);
    const SplitIndices split = stratified_split(ranks_of(ds, table), SplitSpec{config.split_ratios, config.seed});
    std::vector<int> fold(ds.size());
    for (std::size_t i : split.validation) fold[i] = 1;
    for (std::size_t i : split.test) fold[i] = 2;
    std::ostringstream out;
    out << "id\tfold\n";
    for (std::size_t i = 0; i < ds.size(); ++i) out << ds.records()[i].id << '\t' << kFoldNames[fold[i]] << '\n';
    std::ostringstream summary;
    summary << "train: " << split.train.size() << "\nvalidation: " << split.validation.size()
            << "\ntest: " << split.test.size() << '\n';
    return std::vector<std::pair<std::string, std::string>>{
        {"split/split.tsv", out.str()},
        {"split/summary.txt", summary.str()},
    };
  };
  return plan;
}

StagePlan plan_train(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "train";
  StagePlan plan;
  auto data = std::make_shared<std::string>(ws.artifact(Stage::threshold, "threshold/dataset.jsonl", stage));
  auto seg_text = std::make_shared<std::string>(ws.artifact(Stage::segment, "segment/segmentation.tsv", stage));
  auto split_text = std::make_shared<std::string>(ws.artifact(Stage::split, "split/split.tsv", stage));
  plan.inputs["dataset"] = sha256_hex(*data);
  plan.inputs["segmentation"] = sha256_hex(*seg_text);
  plan.inputs["split"] = sha256_hex(*split_text);
  plan.produce = [&config, data, seg_text, split_text, stage] {
    const Dataset ds = dataset_from(*data);
    std::istringstream seg_in(*seg_text);
    const Segmentation seg = read_segmentation(seg_in);
    const ClassFrequencyTable table = build_frequency_table(ds);
    if (seg.num_classes() != table.size()) {
      throw StageError(stage, "segmentation does not match the thresholded dataset");
    }
    const SplitIndices split = parse_split(*split_text, ds);
    const EncodedDataset train = encode(ds, table).select(split.train);
    std::vector<std::pair<std::string, std::string>> outputs;
    for (LossFamily f : config.families) {
      const bool segmented = uses_beta_sh(f) || config.segment_all_families;
      const Segmentation layout = segmented ? seg : Segmentation::single(table.frequencies());
      const RateTable rates = positive_counts(train.positive_ranks, layout);
      const TrainConfig tc = config.train_config(f);
      spdlog::debug("train: {} with {} model(s), {} steps", to_string(f), layout.size(), tc.max_steps);
      std::vector<TrainResult> results;
      try {
        results = train_all_segments(train, layout, rates, tc, config.parallel);
      } catch (const NumericError& e) {
        throw StageError(stage, std::string(to_string(f)) + ": " + e.what());
      }
      outputs.emplace_back(family_dir(f) + "rates.tsv", render([&](std::ostream& o) { write_rate_table(o, rates); }));
      for (std::size_t r = 0; r < results.size(); ++r) {
        outputs.emplace_back(checkpoint_path(f, r),
                             render([&](std::ostream& o) { write_checkpoint(o, results[r].model); }));
        outputs.emplace_back(family_dir(f) + "loss_" + std::to_string(r) + ".csv",
                             render([&](std::ostream& o) { write_loss_history(o, results[r].loss_history); }));
      }
    }
    return outputs;
  };
  return plan;
}

StagePlan plan_eval(const RunConfig& config, const Workspace& ws) {
  const std::string stage = "eval";
  StagePlan plan;
  // Hash every artifact the evaluation reads; artifact() also verifies them.
  plan.inputs["dataset"] = sha256_hex(ws.artifact(Stage::threshold, "threshold/dataset.jsonl", stage));
  plan.inputs["segmentation"] = sha256_hex(ws.artifact(Stage::segment, "segment/segmentation.tsv", stage));
  plan.inputs["split"] = sha256_hex(ws.artifact(Stage::split, "split/split.tsv", stage));
  for (LossFamily f : config.families) {
    for (const auto& rel : ws.outputs_with_prefix(Stage::train, family_dir(f) + "segment_")) {
      plan.inputs[rel] = sha256_hex(ws.artifact(Stage::train, rel, stage));
    }
  }
  plan.produce = [&config, &ws, stage] {
    const auto rows = evaluate(ws, config.families, stage);
    std::vector<std::pair<std::string, std::string>> outputs;
    for (const auto& [name, report] : rows) {
      outputs.emplace_back("eval/" + name + ".txt",
                           render([&](std::ostream& o) { write_report_table(o, name, report); }));
      outputs.emplace_back("eval/" + name + ".csv", render([&](std::ostream& o) { write_report_csv(o, report); }));
    }
    outputs.emplace_back("eval/comparison.txt", render([&](std::ostream& o) { write_comparison_table(o, rows); }));
    outputs.emplace_back("eval/comparison.csv", render([&](std::ostream& o) { write_comparison_csv(o, rows); }));
    return outputs;
  };
  return plan;
}

StagePlan plan_stage(Stage s, const RunConfig& config, const Workspace& ws) {
  switch (s) {
    case Stage::ingest: return plan_ingest(config, ws);
    case Stage::clean: return plan_clean(config, ws);
    case Stage::threshold: return plan_threshold(config, ws);
    case Stage::segment: return plan_segment(config, ws);
    case Stage::split: return plan_split(config, ws);
    case Stage::train: return plan_train(config, ws);
    case Stage::eval: return plan_eval(config, ws);
  }
  throw InvalidArgument("unknown stage");
}

}  // namespace

std::vector<StageOutcome> run_pipeline(const RunConfig& config, const std::set<Stage>& stages) {
  config.validate();
  Workspace ws(config);
  std::vector<StageOutcome> outcomes;
  for (Stage s : kAllStages) {
    if (!stages.count(s)) continue;
    const std::string name(to_string(s));
    StagePlan plan = plan_stage(s, config, ws);
    const std::string fp = fingerprint(s, config, plan.inputs);
    if (ws.up_to_date(s, fp)) {
      spdlog::debug("{}: up to date, skipped", name);
      outcomes.push_back({s, true});
      continue;
    }
    spdlog::debug("{}: running", name);
    std::vector<std::pair<std::string, std::string>> outputs;
    try {
      outputs = plan.produce();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e.what());
    }
    ws.commit(s, fp, plan.inputs, outputs);
    outcomes.push_back({s, false});
  }
  return outcomes;
}

std::vector<std::pair<std::string, MetricsReport>> compare_losses(const RunConfig& config,
                                                                  const std::vector<LossFamily>& families) {
  if (families.empty()) throw InvalidArgument("compare_losses: no families given");
  const Workspace ws(config);
  return evaluate(ws, families, "compare");
}

}  // namespace shloss
