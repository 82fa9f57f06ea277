#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "randprompt/checkpoint.hpp"
#include "randprompt/embedding_store.hpp"
#include "randprompt/errors.hpp"
#include "randprompt/metrics.hpp"
#include "randprompt/mlp.hpp"
#include "randprompt/prompts.hpp"
#include "randprompt/rng.hpp"
#include "randprompt/scores.hpp"
#include "randprompt/scoring.hpp"

namespace randprompt {

namespace fs = std::filesystem;

enum class Setup { zero_shot_unknown, zero_shot_known, few_shot };

inline std::string to_string(Setup s) {
  switch (s) {
    case Setup::zero_shot_unknown: return "zero_shot_unknown";
    case Setup::zero_shot_known: return "zero_shot_known";
    case Setup::few_shot: return "few_shot";
  }
  return "?";
}

inline Setup setup_from_string(std::string_view s) {
  if (s == "zero_shot_unknown" || s == "unknown") return Setup::zero_shot_unknown;
  if (s == "zero_shot_known" || s == "known") return Setup::zero_shot_known;
  if (s == "few_shot" || s == "few_shot_k" || s == "few") return Setup::few_shot;
  throw ConfigError("unknown setup: " + std::string(s));
}

struct ComponentSet {
  bool s_pr = true;
  bool s_fnn = true;
  bool s_img = false;

  bool empty() const { return !s_pr && !s_fnn && !s_img; }

  std::string to_string() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!out.empty()) out += ",";
      out += name;
    };
    add(s_pr, "s_pr");
    add(s_fnn, "s_fnn");
    add(s_img, "s_img");
    return out;
  }

  /// Comma-separated subset of s_pr, s_fnn, s_img.
  static ComponentSet parse(std::string_view text) {
    ComponentSet c{false, false, false};
    std::stringstream ss{std::string(text)};
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "s_pr") {
        c.s_pr = true;
      } else if (item == "s_fnn") {
        c.s_fnn = true;
      } else if (item == "s_img") {
        c.s_img = true;
      } else if (!item.empty()) {
        throw ConfigError("unknown score component: " + item);
      }
    }
    if (c.empty()) throw ConfigError("no score components selected");
    return c;
  }

  friend bool operator==(const ComponentSet&, const ComponentSet&) = default;
};

/// File locations. `train_dir` and `guide_dir` may contain the placeholders
/// {seed}, {n_pairs} and {word_pair} (the word-pair slug).
struct ExperimentPaths {
  std::string manifest;
  std::string images;      // EMB1, one row per manifest entry
  std::string ref_images;  // EMB1, one row per manifest reference path
  std::string train_dir;   // normals.emb + anomalies.emb
  std::string guide_dir;   // normals.emb + anomalies.emb (one row each); known setup: <guide_dir>/<category>/
};

struct ExperimentConfig {
  Setup setup = Setup::zero_shot_unknown;
  std::size_t shots = 0;
  WordPair word_pair;
  std::size_t n_pairs = 10000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ComponentSet components;
  std::vector<double> weights;  // fusion weights in s_pr, s_fnn, s_img order; empty = all 1
  bool multi_crop = true;       // provenance only; crops are taken by the extractor
  double temperature = 0.01;
  MlpArchitecture arch;         // input_dim is taken from the training data
  TrainConfig train;            // seed is overridden per run
  ExperimentPaths paths;

  void validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
    if (components.empty()) throw ConfigError("no score components selected");
    if (components.s_img && setup != Setup::few_shot) throw ConfigError("s_img requires the few_shot setup");
    if (setup == Setup::few_shot && shots < 1) throw ConfigError("few_shot setup needs shots >= 1");
    if (!weights.empty()) {
      const std::size_t n = std::size_t{components.s_pr} + components.s_fnn + components.s_img;
      if (weights.size() != n) throw ConfigError("need one fusion weight per selected component");
    }
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    try {
      train.validate();
      MlpArchitecture probe = arch;
      probe.input_dim = 1;
      probe.validate();
    } catch (const ArgumentError& ex) {
      throw ConfigError(ex.what());
    }
  }

  /// Grouping tag for reports: "zero-shot", "zero-shot (known object)" or "<k>-shot".
  std::string setup_tag() const {
    switch (setup) {
      case Setup::zero_shot_unknown: return "zero-shot";
      case Setup::zero_shot_known: return "zero-shot (known object)";
      case Setup::few_shot: return std::to_string(shots) + "-shot";
    }
    return "?";
  }

  /// Short label like "s_pr+s_fnn" for report titles.
  std::string label() const {
    std::string s = components.to_string();
    std::replace(s.begin(), s.end(), ',', '+');
    return s;
  }
};

/// Replaces {seed}, {n_pairs} and {word_pair} in a path template.
inline std::string expand_path(std::string path, const ExperimentConfig& cfg, std::uint64_t seed) {
  auto replace_all = [&](const std::string& key, const std::string& value) {
    for (std::size_t pos = path.find(key); pos != std::string::npos; pos = path.find(key, pos + value.size())) {
      path.replace(pos, key.size(), value);
    }
  };
  replace_all("{seed}", std::to_string(seed));
  replace_all("{n_pairs}", std::to_string(cfg.n_pairs));
  replace_all("{word_pair}", cfg.word_pair.slug());
  return path;
}

/// Default data root from RANDPROMPT_AD_DATA; relative paths resolve against it.
inline fs::path resolve_data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || p.empty()) return path;
  if (const char* root = std::getenv("RANDPROMPT_AD_DATA"); root != nullptr && *root != '\0') {
    return fs::path(root) / path;
  }
  return path;
}

/// Everything a run reads from disk.
struct ExperimentInputs {
  DatasetManifest manifest;
  EmbeddingMatrix images;
  std::optional<EmbeddingMatrix> ref_images;
  PairedEmbeddingSet training;                       // empty unless s_fnn
  std::map<std::string, PairedEmbeddingSet> guides;  // "" = object-agnostic guide
};

namespace detail {

inline void require_files(const std::vector<fs::path>& files) {
  std::string missing;
  for (const auto& f : files) {
    if (!fs::exists(f)) missing += "\n  " + f.string();
  }
  if (!missing.empty()) throw IoError("missing input files:" + missing);
}

inline PairedEmbeddingSet read_pair_dir(const fs::path& dir) {
  return PairedEmbeddingSet(read_embeddings(dir / "normals.emb"), read_embeddings(dir / "anomalies.emb"));
}

}  // namespace detail

/// Loads the inputs a configuration needs for one seed. Missing files are
/// reported together. Scoring with a saved model passes load_training = false.
inline ExperimentInputs load_inputs(const ExperimentConfig& cfg, std::uint64_t seed, bool load_training = true) {
  cfg.validate();
  const fs::path manifest_path = resolve_data_path(cfg.paths.manifest);
  const fs::path images_path = resolve_data_path(cfg.paths.images);
  std::vector<fs::path> needed{manifest_path, images_path};
  const fs::path train_dir = resolve_data_path(expand_path(cfg.paths.train_dir, cfg, seed));
  const fs::path guide_dir = resolve_data_path(expand_path(cfg.paths.guide_dir, cfg, seed));
  const bool want_training = cfg.components.s_fnn && load_training;
  if (want_training) {
    needed.push_back(train_dir / "normals.emb");
    needed.push_back(train_dir / "anomalies.emb");
  }
  if (cfg.components.s_img) needed.push_back(resolve_data_path(cfg.paths.ref_images));
  detail::require_files(needed);

  ExperimentInputs in;
  in.manifest = read_manifest(manifest_path);
  in.images = read_embeddings(images_path);
  if (in.images.count() != in.manifest.entries.size()) {
    throw DataError("image embeddings have " + std::to_string(in.images.count()) + " rows, manifest has " +
                    std::to_string(in.manifest.entries.size()) + " entries");
  }
  if (cfg.components.s_pr) {
    std::vector<fs::path> guide_files;
    if (cfg.setup == Setup::zero_shot_known) {
      for (const auto& cat : in.manifest.categories()) {
        guide_files.push_back(guide_dir / cat / "normals.emb");
        guide_files.push_back(guide_dir / cat / "anomalies.emb");
      }
      detail::require_files(guide_files);
      for (const auto& cat : in.manifest.categories()) in.guides[cat] = detail::read_pair_dir(guide_dir / cat);
    } else {
      detail::require_files({guide_dir / "normals.emb", guide_dir / "anomalies.emb"});
      in.guides[""] = detail::read_pair_dir(guide_dir);
    }
    for (const auto& [cat, g] : in.guides) {
      if (g.size() != 1) throw DataError("guide embeddings for '" + cat + "' must hold exactly one pair");
      if (g.dim() != in.images.dim()) throw DataError("guide and image embedding dims differ");
    }
  }
  if (want_training) {
    in.training = detail::read_pair_dir(train_dir);
    if (in.training.dim() != in.images.dim()) {
      throw DataError("training embeddings have dim " + std::to_string(in.training.dim()) + ", images have " +
                      std::to_string(in.images.dim()));
    }
  }
  if (cfg.components.s_img) {
    in.ref_images = read_embeddings(resolve_data_path(cfg.paths.ref_images));
    if (in.ref_images->count() != in.manifest.ref_count()) {
      throw DataError("reference embeddings have " + std::to_string(in.ref_images->count()) +
                      " rows, manifest lists " + std::to_string(in.manifest.ref_count()) + " references");
    }
    if (in.ref_images->dim() != in.images.dim()) throw DataError("reference and image embedding dims differ");
  }
  return in;
}

/// Trains the detector for one seed on the first n_pairs training pairs.
inline TrainResult train_detector(const ExperimentConfig& cfg, const PairedEmbeddingSet& training, std::uint64_t seed,
                                  const BatchObserver& observer = {}) {
  if (training.size() < cfg.n_pairs) {
    throw DataError("n_pairs is " + std::to_string(cfg.n_pairs) + " but only " + std::to_string(training.size()) +
                    " training pairs are available");
  }
  MlpArchitecture arch = cfg.arch;
  arch.input_dim = training.dim();
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  return train(training.head(cfg.n_pairs), arch, tc, observer);
}

/// Indices into the category's reference list, in a per-(seed, category)
/// random order. Taking a prefix of k gives the k-shot set, so sets for
/// growing k are nested.
inline std::vector<std::size_t> reference_order(std::size_t candidates, std::uint64_t seed, const std::string& category) {
  std::vector<std::size_t> order(candidates);
  for (std::size_t i = 0; i < candidates; ++i) order[i] = i;
  Xoshiro256 rng(derive_seed(seed, "refs/" + category));
  rng.shuffle(std::span(order));
  return order;
}

/// Per-component and fused scores for one seed, aligned with manifest rows.
struct SeedScores {
  std::vector<ScoreVector> components;  // in s_pr, s_fnn, s_img order
  ScoreVector fused;
};

inline ScoreVector compute_prompt_scores(const ExperimentConfig& cfg, const ExperimentInputs& in) {
  std::vector<double> values(in.images.count());
  std::map<std::string, std::pair<EmbeddingMatrix, EmbeddingMatrix>> unit_guides;
  for (const auto& [cat, g] : in.guides) unit_guides[cat] = {l2_normalize(g.normals), l2_normalize(g.anomalies)};
  for (std::size_t i = 0; i < in.images.count(); ++i) {
    const auto& cat = in.manifest.entries[i].category;
    const auto it = unit_guides.find(cfg.setup == Setup::zero_shot_known ? cat : std::string{});
    if (it == unit_guides.end()) throw DataError("no guide embeddings for category '" + cat + "'");
    try {
      values[i] = prompt_guided_score(it->second.first.row(0), it->second.second.row(0), in.images.row(i), cfg.temperature);
    } catch (const DataError&) {
      throw DataError("image row " + std::to_string(i) + " has zero norm");
    }
  }
  return ScoreVector::identity_ids(std::move(values), ScoreKind::s_pr);
}

inline ScoreVector compute_reference_scores(const ExperimentConfig& cfg, const ExperimentInputs& in, std::uint64_t seed) {
  const auto rows = in.manifest.ref_rows();
  std::vector<double> values(in.images.count(), 0.0);
  for (const auto& cat : in.manifest.categories()) {
    const auto it = rows.find(cat);
    const std::size_t available = it == rows.end() ? 0 : it->second.size();
    if (available < cfg.shots) {
      throw ConfigError("category '" + cat + "' has " + std::to_string(available) + " reference images, " +
                        std::to_string(cfg.shots) + "-shot needs more");
    }
    const auto order = reference_order(available, seed, cat);
    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < cfg.shots; ++k) chosen.push_back(it->second[order[k]]);
    const EmbeddingMatrix refs = in.ref_images->select(chosen);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < in.manifest.entries.size(); ++i) {
      if (in.manifest.entries[i].category == cat) members.push_back(i);
    }
    const auto s = score_reference(in.images.select(members), refs);
    for (std::size_t j = 0; j < members.size(); ++j) values[members[j]] = s.values[j];
  }
  return ScoreVector::identity_ids(std::move(values), ScoreKind::s_img);
}

/// Scores every manifest row for one seed. `params` must be given when s_fnn
/// is selected.
inline SeedScores score_seed(const ExperimentConfig& cfg, const ExperimentInputs& in, std::uint64_t seed,
                             const MlpParams* params) {
  SeedScores out;
  if (cfg.components.s_pr) out.components.push_back(compute_prompt_scores(cfg, in));
  if (cfg.components.s_fnn) {
    if (params == nullptr) throw StateError("s_fnn requested without a trained detector");
    out.components.push_back(score_fnn(*params, in.images, cfg.train.normalize_inputs));
  }
  if (cfg.components.s_img) out.components.push_back(compute_reference_scores(cfg, in, seed));
  out.fused = fuse(out.components, cfg.weights);
  for (double v : out.fused.values) {
    if (!std::isfinite(v)) throw TrainingError("non-finite anomaly score");
  }
  return out;
}

/// Groups a score vector by manifest category and evaluates each group.
inline EvalReport evaluate_scores(const DatasetManifest& manifest, const ScoreVector& scores) {
  std::map<std::string, LabeledScores> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& e = manifest.entries.at(scores.sample_ids[i]);
    auto& g = groups[e.category];
    g.scores.push_back(scores.values[i]);
    g.labels.push_back(e.label);
  }
  return evaluate_categories(groups);
}

/// Score rows for CSV export: one row per sample per component, plus the
/// fused score when more than one component is selected.
inline std::vector<ScoreRecord> score_records(const DatasetManifest& manifest, const SeedScores& scores) {
  std::vector<ScoreRecord> rows;
  auto emit = [&](const ScoreVector& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& e = manifest.entries.at(s.sample_ids[i]);
      rows.push_back({s.sample_ids[i], e.category, e.label, std::string(to_string(s.kind)), s.values[i]});
    }
  };
  for (const auto& c : scores.components) emit(c);
  if (scores.components.size() > 1) emit(scores.fused);
  return rows;
}

/// Rebuilds per-kind category groups from score CSV rows and evaluates the
/// requested kind.
inline EvalReport evaluate_records(const std::vector<ScoreRecord>& rows, const std::string& kind) {
  std::map<std::string, LabeledScores> groups;
  for (const auto& r : rows) {
    if (r.score_kind != kind) continue;
    auto& g = groups[r.category];
    g.scores.push_back(r.value);
    g.labels.push_back(r.label);
  }
  if (groups.empty()) throw DataError("no scores of kind " + kind);
  return evaluate_categories(groups);
}

/// Kind evaluated by default for a score CSV: "sum" when present, else the
/// single kind in the file.
inline std::string default_eval_kind(const std::vector<ScoreRecord>& rows) {
  std::set<std::string> kinds;
  for (const auto& r : rows) kinds.insert(r.score_kind);
  if (kinds.count("sum")) return "sum";
  if (kinds.size() == 1) return *kinds.begin();
  throw DataError("score file mixes kinds without a fused 'sum'; pass --kind");
}

/// Runs every seed and folds the per-seed reports. `observer` sees each seed's
/// training batches.
inline EvalReport run_experiment(const ExperimentConfig& cfg, const BatchObserver& observer = {}) {
  cfg.validate();
  std::vector<EvalReport> runs;
  for (auto seed : cfg.seeds) {
    const ExperimentInputs in = load_inputs(cfg, seed);
    std::optional<TrainResult> trained;
    if (cfg.components.s_fnn) trained = train_detector(cfg, in.training, seed, observer);
    const auto scores = score_seed(cfg, in, seed, trained ? &trained->params : nullptr);
    runs.push_back(evaluate_scores(in.manifest, scores.fused));
  }
  return seed_statistics(runs);
}

/// Zero-shot evaluation (object unknown or known).
inline EvalReport run_zero_shot(const ExperimentConfig& cfg) {
  if (cfg.setup == Setup::few_shot) throw ConfigError("run_zero_shot called with a few_shot setup");
  return run_experiment(cfg);
}

/// k-shot evaluation adding s_img to the fusion. References are resampled per seed.
inline EvalReport run_few_shot(ExperimentConfig cfg) {
  cfg.setup = Setup::few_shot;
  cfg.components.s_img = true;
  if (cfg.shots < 1) throw ConfigError("few-shot evaluation needs shots >= 1");
  return run_experiment(cfg);
}

enum class SweepVariable { n_pairs, word_pair };

struct SweepSpec {
  SweepVariable variable = SweepVariable::n_pairs;
  std::vector<std::string> values;

  void validate() const {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
  }
};

/// Values of the word-pair grid, row-major.
inline std::vector<std::string> word_pair_grid_values() {
  std::vector<std::string> out;
  for (const auto& wp : word_pair_grid()) out.push_back(wp.name());
  return out;
}

inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, SweepVariable var, const std::string& value) {
  if (var == SweepVariable::n_pairs) {
    try {
      std::size_t used = 0;
      const auto n = std::stoull(value, &used);
      if (used != value.size() || n < 1) throw std::invalid_argument(value);
      cfg.n_pairs = n;
    } catch (const std::exception&) {
      throw ConfigError("bad n_pairs sweep value: " + value);
    }
  } else {
    try {
      cfg.word_pair = WordPair::parse(value);
    } catch (const ArgumentError& ex) {
      throw ConfigError(ex.what());
    }
  }
  return cfg;
}

inline std::vector<std::pair<std::string, EvalReport>> run_sweep(const ExperimentConfig& cfg, const SweepSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::string, EvalReport>> out;
  for (const auto& value : spec.values) {
    const auto run_cfg = apply_sweep_value(cfg, spec.variable, value);
    out.emplace_back(value, run_experiment(run_cfg));
  }
  return out;
}

inline std::string sweep_csv(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "value,runs,auroc_mean,auroc_std,aupr_mean,aupr_std,f1_max_mean,f1_max_std\n";
  for (const auto& [value, r] : rows) {
    out << '"' << value << "\"," << r.runs << ',' << r.mean.auroc.mean << ',' << r.mean.auroc.std << ','
        << r.mean.aupr.mean << ',' << r.mean.aupr.std << ',' << r.mean.f1_max.mean << ',' << r.mean.f1_max.std
        << '\n';
  }
  return out.str();
}

/// Report JSON: provenance of the configuration plus the metrics.
inline nlohmann::json provenance_json(const ExperimentConfig& cfg) {
  return {{"setup", to_string(cfg.setup)},
          {"setup_tag", cfg.setup_tag()},
          {"shots", cfg.shots},
          {"word_pair", cfg.word_pair.name()},
          {"n_pairs", cfg.n_pairs},
          {"seeds", cfg.seeds},
          {"components", cfg.components.to_string()},
          {"weights", cfg.weights},
          {"multi_crop", cfg.multi_crop},
          {"temperature", cfg.temperature},
          {"architecture", to_json(cfg.arch)},
          {"train_config", to_json(cfg.train)}};
}

inline nlohmann::json report_json(const ExperimentConfig& cfg, const EvalReport& report) {
  return {{"provenance", provenance_json(cfg)}, {"report", to_json(report)}};
}

// ---------------------------------------------------------------------------
// Dataset adapters
// ---------------------------------------------------------------------------

namespace detail {
inline bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

inline std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace detail

/// MVTec-AD style layout: <root>/<category>/test/<good|defect>/*.png with
/// <root>/<category>/train/good/ as reference candidates. VisA converted with
/// its one-class split uses the same layout. Paths are relative to root.
inline DatasetManifest build_manifest_mvtec(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  DatasetManifest m;
  for (const auto& cat_dir : detail::sorted_subdirs(root)) {
    const std::string cat = cat_dir.filename().string();
    for (const auto& state_dir : detail::sorted_subdirs(cat_dir / "test")) {
      const int label = state_dir.filename() == "good" ? 0 : 1;
      for (const auto& img : detail::sorted_images(state_dir)) {
        m.entries.push_back({fs::relative(img, root).generic_string(), label, cat});
      }
    }
    for (const auto& img : detail::sorted_images(cat_dir / "train" / "good")) {
      m.refs[cat].push_back(fs::relative(img, root).generic_string());
    }
  }
  if (m.entries.empty()) throw DataError("no test images found under " + root.string());
  m.validate();
  return m;
}

/// Raw VisA layout: <root>/<category>/Data/Images/{Normal,Anomaly}/*. No split
/// is implied, so every image is a test entry and no references are listed.
inline DatasetManifest build_manifest_visa_raw(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  DatasetManifest m;
  for (const auto& cat_dir : detail::sorted_subdirs(root)) {
    const std::string cat = cat_dir.filename().string();
    for (const auto& [sub, label] : {std::pair{"Normal", 0}, std::pair{"Anomaly", 1}}) {
      for (const auto& img : detail::sorted_images(cat_dir / "Data" / "Images" / sub)) {
        m.entries.push_back({fs::relative(img, root).generic_string(), label, cat});
      }
    }
  }
  if (m.entries.empty()) throw DataError("no images found under " + root.string());
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic fixture
// ---------------------------------------------------------------------------

/// Two isotropic Gaussian clusters sharing a common offset. The anomaly
/// cluster sits `margin` standard deviations from the normal one along a
/// fixed unit direction. "Text" training pairs and "image" test samples are
/// drawn from the same clusters; the guides are the cluster means.
struct SyntheticSpec {
  std::size_t dim = 64;
  std::size_t n_pairs = 2000;
  std::vector<std::string> categories{"alpha", "beta", "gamma"};
  std::size_t normals_per_category = 100;
  std::size_t anomalies_per_category = 100;
  std::size_t refs_per_category = 8;
  double sigma = 1.0;
  double margin = 4.0;   // in units of sigma
  double offset = 10.0;  // norm of the shared offset, in units of sigma
  std::uint64_t seed = 0;
};

struct SyntheticClusters {
  std::vector<double> normal_mean;
  std::vector<double> anomaly_mean;
};

inline SyntheticClusters synthetic_clusters(const SyntheticSpec& spec) {
  if (spec.dim < 2) throw ArgumentError("synthetic fixture needs dim >= 2");
  Xoshiro256 rng(derive_seed(spec.seed, "synthetic/means"));
  // Random orthonormal pair (offset direction, separation direction).
  std::vector<double> a(spec.dim), b(spec.dim);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  auto normalize = [](std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
  };
  normalize(a);
  double proj = 0.0;
  for (std::size_t i = 0; i < spec.dim; ++i) proj += a[i] * b[i];
  for (std::size_t i = 0; i < spec.dim; ++i) b[i] -= proj * a[i];
  normalize(b);
  SyntheticClusters c{std::vector<double>(spec.dim), std::vector<double>(spec.dim)};
  const double half = 0.5 * spec.margin * spec.sigma;
  for (std::size_t i = 0; i < spec.dim; ++i) {
    c.normal_mean[i] = spec.offset * spec.sigma * a[i] - half * b[i];
    c.anomaly_mean[i] = spec.offset * spec.sigma * a[i] + half * b[i];
  }
  return c;
}

inline EmbeddingMatrix sample_cluster(const std::vector<double>& mean, double sigma, std::size_t n, Xoshiro256& rng,
                                      EmbeddingKind kind) {
  EmbeddingMatrix m(mean.size(), n, kind);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < mean.size(); ++c) row[c] = static_cast<float>(mean[c] + sigma * rng.normal());
  }
  return m;
}

/// Writes manifest.json, images.emb, refs.emb, train/, guide/ (plus
/// guide/<category>/ for the known-object setup) and config.json under `dir`.
/// Returns the matching experiment configuration.
inline ExperimentConfig write_synthetic_fixture(const fs::path& dir, const SyntheticSpec& spec) {
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "guide");
  const auto clusters = synthetic_clusters(spec);

  Xoshiro256 train_rng(derive_seed(spec.seed, "synthetic/train"));
  auto train_normals = sample_cluster(clusters.normal_mean, spec.sigma, spec.n_pairs, train_rng, EmbeddingKind::text);
  auto train_anomalies = sample_cluster(clusters.anomaly_mean, spec.sigma, spec.n_pairs, train_rng, EmbeddingKind::text);
  write_embeddings(train_normals, dir / "train" / "normals.emb");
  write_embeddings(train_anomalies, dir / "train" / "anomalies.emb");

  auto mean_row = [&](const std::vector<double>& mean) {
    std::vector<float> row(mean.begin(), mean.end());
    return EmbeddingMatrix(spec.dim, std::move(row), EmbeddingKind::text);
  };
  write_embeddings(mean_row(clusters.normal_mean), dir / "guide" / "normals.emb");
  write_embeddings(mean_row(clusters.anomaly_mean), dir / "guide" / "anomalies.emb");

  DatasetManifest manifest;
  std::vector<float> image_data, ref_data;
  Xoshiro256 image_rng(derive_seed(spec.seed, "synthetic/images"));
  for (const auto& cat : spec.categories) {
    fs::create_directories(dir / "guide" / cat);
    write_embeddings(mean_row(clusters.normal_mean), dir / "guide" / cat / "normals.emb");
    write_embeddings(mean_row(clusters.anomaly_mean), dir / "guide" / cat / "anomalies.emb");
    auto normals = sample_cluster(clusters.normal_mean, spec.sigma, spec.normals_per_category, image_rng, EmbeddingKind::image);
    auto anomalies =
        sample_cluster(clusters.anomaly_mean, spec.sigma, spec.anomalies_per_category, image_rng, EmbeddingKind::image);
    for (std::size_t i = 0; i < normals.count(); ++i) {
      manifest.entries.push_back({cat + "/test/good/" + std::to_string(i) + ".png", 0, cat});
    }
    for (std::size_t i = 0; i < anomalies.count(); ++i) {
      manifest.entries.push_back({cat + "/test/defect/" + std::to_string(i) + ".png", 1, cat});
    }
    for (std::size_t i = 0; i < spec.refs_per_category; ++i) {
      manifest.refs[cat].push_back(cat + "/train/good/" + std::to_string(i) + ".png");
    }
    image_data.insert(image_data.end(), normals.data().begin(), normals.data().end());
    image_data.insert(image_data.end(), anomalies.data().begin(), anomalies.data().end());
  }
  // refs.emb follows the manifest's lexicographic category order.
  {
    Xoshiro256 ref_rng(derive_seed(spec.seed, "synthetic/refs"));
    for (const auto& [cat, paths] : manifest.refs) {
      auto refs = sample_cluster(clusters.normal_mean, spec.sigma, paths.size(), ref_rng, EmbeddingKind::image);
      ref_data.insert(ref_data.end(), refs.data().begin(), refs.data().end());
    }
  }
  write_manifest(manifest, dir / "manifest.json");
  write_embeddings(EmbeddingMatrix(spec.dim, std::move(image_data), EmbeddingKind::image), dir / "images.emb");
  write_embeddings(EmbeddingMatrix(spec.dim, std::move(ref_data), EmbeddingKind::image), dir / "refs.emb");

  ExperimentConfig cfg;
  cfg.n_pairs = spec.n_pairs;
  cfg.seeds = {0};
  cfg.multi_crop = false;
  cfg.paths.manifest = (dir / "manifest.json").string();
  cfg.paths.images = (dir / "images.emb").string();
  cfg.paths.ref_images = (dir / "refs.emb").string();
  cfg.paths.train_dir = (dir / "train").string();
  cfg.paths.guide_dir = (dir / "guide").string();

  nlohmann::json j{{"manifest", cfg.paths.manifest},   {"images", cfg.paths.images},
                   {"refs", cfg.paths.ref_images},     {"train-dir", cfg.paths.train_dir},
                   {"guide-dir", cfg.paths.guide_dir}, {"n-pairs", cfg.n_pairs}};
  std::ofstream(dir / "config.json") << j.dump(2) << '\n';
  return cfg;
}

}  // namespace randprompt
