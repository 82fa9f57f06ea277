// randprompt: prompt generation, detector training, scoring and evaluation
// for zero-shot anomaly detection on vision-language embeddings.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "randprompt.hpp"

namespace fs = std::filesystem;
using namespace randprompt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// Root-level --config; subcommands pass it up via fallthrough. Must run
/// before subcommands are added so they inherit both settings.
void use_json_config(CLI::App& app) {
  app.config_formatter(std::make_shared<cli::JsonConfig>(&app));
  app.set_config("--config", "", "JSON file supplying any flag (command line wins)");
  app.allow_config_extras(CLI::config_extras_mode::ignore);
  app.fallthrough();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

/// Flags that describe the detector and its training schedule.
struct TrainFlags {
  int epochs = 2;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double lr_decay = 0.1;
  std::vector<std::size_t> hidden{512, 256, 128};
  double dropout = 0.2;
  bool raw_inputs = false;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Rows per batch (pairs kept together)")->capture_default_str();
    app->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay, "Decoupled weight decay")->capture_default_str();
    app->add_option("--lr-decay", lr_decay, "Learning-rate factor applied after the first epoch")
        ->capture_default_str();
    app->add_option("--hidden", hidden, "Three hidden widths")->expected(3)->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate after each hidden block")->capture_default_str();
    app->add_flag("--raw-inputs", raw_inputs, "Feed un-normalized embeddings to the detector");
  }

  void apply(ExperimentConfig& cfg) const {
    cfg.train.epochs = epochs;
    cfg.train.batch_size = batch_size;
    cfg.train.lr = lr;
    cfg.train.weight_decay = weight_decay;
    cfg.train.lr_decay_factor = lr_decay;
    cfg.train.normalize_inputs = !raw_inputs;
    if (hidden.size() != kHiddenLayers) throw ConfigError("--hidden needs three widths");
    for (std::size_t i = 0; i < kHiddenLayers; ++i) cfg.arch.hidden_dims[i] = hidden[i];
    cfg.arch.dropout_rate = dropout;
  }
};

/// Flags shared by score, report and sweep.
struct ExperimentFlags {
  std::string manifest, images, refs, train_dir, guide_dir;
  std::string setup = "zero_shot_unknown";
  std::size_t shots = 0;
  std::string word_pair = "default";
  std::size_t n_pairs = 10000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string components = "s_pr,s_fnn";
  std::vector<double> weights;
  double temperature = 0.01;
  bool multi_crop = true;
  TrainFlags train;

  void add(CLI::App* app, bool with_seed_list) {
    app->add_option("--manifest", manifest, "Dataset manifest JSON");
    app->add_option("--images", images, "EMB1 image embeddings aligned with the manifest");
    app->add_option("--refs", refs, "EMB1 reference-image embeddings (few-shot)");
    app->add_option("--train-dir", train_dir, "Directory with normals.emb/anomalies.emb (placeholders allowed)");
    app->add_option("--guide-dir", guide_dir, "Directory with guide normals.emb/anomalies.emb");
    app->add_option("--setup", setup, "zero_shot_unknown | zero_shot_known | few_shot")->capture_default_str();
    app->add_option("--shots", shots, "Reference images per category (few-shot)");
    app->add_option("--word-pair", word_pair, "'normal|anomaly' or 'default'")->capture_default_str();
    app->add_option("--n-pairs", n_pairs, "Training pairs to use")->capture_default_str();
    if (with_seed_list) app->add_option("--seeds", seeds, "Seeds to run")->delimiter(',');
    app->add_option("--components", components, "Subset of s_pr,s_fnn,s_img")->capture_default_str();
    app->add_option("--weights", weights, "Fusion weights, one per component")->delimiter(',');
    app->add_option("--temperature", temperature, "Softmax temperature for s_pr")->capture_default_str();
    app->add_flag("--multi-crop,!--no-multi-crop", multi_crop, "Record that image embeddings used multi-crop");
    train.add(app);
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    cfg.setup = setup_from_string(setup);
    cfg.shots = shots;
    try {
      cfg.word_pair = word_pair_by_name(word_pair);
    } catch (const ArgumentError& ex) {
      throw ConfigError(ex.what());
    }
    cfg.n_pairs = n_pairs;
    cfg.seeds = seeds;
    cfg.components = ComponentSet::parse(components);
    if (cfg.setup == Setup::few_shot) cfg.components.s_img = true;
    cfg.weights = weights;
    cfg.temperature = temperature;
    cfg.multi_crop = multi_crop;
    cfg.paths = {manifest, images, refs, train_dir, guide_dir};
    train.apply(cfg);
    auto require = [](const std::string& value, const char* flag) {
      if (value.empty()) throw ConfigError(std::string(flag) + " is required");
    };
    require(manifest, "--manifest");
    require(images, "--images");
    if (cfg.components.s_pr) require(guide_dir, "--guide-dir");
    if (cfg.components.s_img) require(refs, "--refs");
    cfg.validate();
    return cfg;
  }
};

int run_gen_prompts(std::uint64_t seed, long long n_pairs, const std::string& word_pair, int l_min, int l_max,
                    const std::string& alphabet, bool guide, const std::string& object, const fs::path& out) {
  WordPair words;
  try {
    words = word_pair_by_name(word_pair);
  } catch (const ArgumentError& ex) {
    throw ConfigError(ex.what());
  }
  if (guide) {
    const PromptPair p = guide_prompts(words, object);
    write_prompt_file(out, seed, std::span(&p, 1));
    std::cout << "wrote guide prompts to " << out << "\n";
    return kExitOk;
  }
  RandomWordConfig cfg;
  try {
    cfg = RandomWordConfig(l_min, l_max, alphabet, seed);
  } catch (const ArgumentError& ex) {
    throw ConfigError(ex.what());
  }
  if (n_pairs <= 0) throw ConfigError("--n-pairs must be >= 1");
  const auto pairs = generate_prompt_set(cfg, words, n_pairs);
  write_prompt_file(out, seed, pairs);
  std::cout << "wrote " << pairs.size() << " prompt pairs to " << out << "\n";
  return kExitOk;
}

int run_train(const std::string& train_dir, std::uint64_t seed, std::size_t n_pairs, const std::string& word_pair,
              const TrainFlags& flags, const fs::path& out) {
  if (train_dir.empty()) throw ConfigError("--train-dir is required");
  ExperimentConfig cfg;
  try {
    cfg.word_pair = word_pair_by_name(word_pair);
  } catch (const ArgumentError& ex) {
    throw ConfigError(ex.what());
  }
  cfg.n_pairs = n_pairs;
  cfg.seeds = {seed};
  flags.apply(cfg);
  cfg.validate();
  const fs::path dir = resolve_data_path(expand_path(train_dir, cfg, seed));
  const PairedEmbeddingSet training(read_embeddings(dir / "normals.emb"), read_embeddings(dir / "anomalies.emb"));
  const auto result = train_detector(cfg, training, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  save_checkpoint({result.params, tc, result.epoch_losses}, out);
  std::cout << "trained " << result.steps << " steps;";
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::cout << " epoch " << e << " loss " << result.epoch_losses[e] << ";";
  }
  std::cout << " wrote " << out << "\n";
  return kExitOk;
}

int run_score(const ExperimentFlags& flags, std::uint64_t seed, const std::string& model, const fs::path& out) {
  ExperimentConfig cfg = flags.build();
  cfg.seeds = {seed};
  std::optional<Checkpoint> ck;
  if (cfg.components.s_fnn) {
    if (model.empty()) throw ConfigError("--model is required when s_fnn is selected");
    ck = load_checkpoint(resolve_data_path(model));
    cfg.train.normalize_inputs = ck->config.normalize_inputs;
  }
  const auto inputs = load_inputs(cfg, seed, false);
  if (ck && ck->params.arch.input_dim != inputs.images.dim()) {
    throw DataError("model expects dim " + std::to_string(ck->params.arch.input_dim) + ", images have " +
                    std::to_string(inputs.images.dim()));
  }
  const auto scores = score_seed(cfg, inputs, seed, ck ? &ck->params : nullptr);
  write_score_csv(out, score_records(inputs.manifest, scores));
  std::cout << "wrote " << scores.fused.size() << " samples (" << cfg.label() << ") to " << out << "\n";
  return kExitOk;
}

int run_eval(const fs::path& scores_path, std::string kind, const fs::path& out, const std::string& table_out) {
  const auto rows = read_score_csv(scores_path);
  if (kind.empty()) kind = default_eval_kind(rows);
  const auto report = evaluate_records(rows, kind);
  nlohmann::json j{{"score_kind", kind}, {"report", to_json(report)}};
  write_text(out, j.dump(2) + "\n");
  const std::string table = format_table(report, kind);
  if (!table_out.empty()) write_text(table_out, table);
  std::cout << table;
  return kExitOk;
}

int run_report(const ExperimentFlags& flags, const fs::path& out, const std::string& table_out) {
  const ExperimentConfig cfg = flags.build();
  const auto report = run_experiment(cfg);
  write_text(out, report_json(cfg, report).dump(2) + "\n");
  const std::string table = format_table(report, cfg.setup_tag() + " " + cfg.label());
  if (!table_out.empty()) write_text(table_out, table);
  std::cout << table;
  return kExitOk;
}

int run_sweep_cmd(const ExperimentFlags& flags, const std::string& variable, std::vector<std::string> values,
                  const fs::path& out) {
  const ExperimentConfig cfg = flags.build();
  SweepSpec spec;
  if (variable == "n_pairs" || variable == "n-pairs") {
    spec.variable = SweepVariable::n_pairs;
  } else if (variable == "word_pair" || variable == "word-pair") {
    spec.variable = SweepVariable::word_pair;
    if (values.size() == 1 && values[0] == "grid") values = word_pair_grid_values();
  } else {
    throw ConfigError("unknown sweep variable: " + variable);
  }
  spec.values = std::move(values);
  const auto rows = run_sweep(cfg, spec);
  write_text(out, sweep_csv(rows));
  for (const auto& [value, report] : rows) {
    std::cout << value << "  AUROC " << 100.0 * report.mean.auroc.mean << " ± " << 100.0 * report.mean.auroc.std
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot anomaly detection with random-word prompt augmentation"};
  app.require_subcommand(1);
  use_json_config(app);

  // gen-prompts
  auto* gen = app.add_subcommand("gen-prompts", "Generate augmented prompt pairs (or guide prompts)");
  std::uint64_t gen_seed = 0;
  long long gen_n = 10000;
  std::string gen_words = "default", gen_alphabet(kDefaultAlphabet), gen_object = "object", gen_out;
  int gen_lmin = 5, gen_lmax = 10;
  bool gen_guide = false;
  gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
  gen->add_option("--n-pairs", gen_n, "Number of prompt pairs")->capture_default_str();
  gen->add_option("--word-pair", gen_words, "'normal|anomaly' or 'default'")->capture_default_str();
  gen->add_option("--l-min", gen_lmin, "Minimum random word length")->capture_default_str();
  gen->add_option("--l-max", gen_lmax, "Maximum random word length")->capture_default_str();
  gen->add_option("--alphabet", gen_alphabet, "Random word characters")->capture_default_str();
  gen->add_flag("--guide", gen_guide, "Write the guide prompt pair instead");
  gen->add_option("--object", gen_object, "Object word for guide prompts")->capture_default_str();
  gen->add_option("--out", gen_out, "Output prompt file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the detector on paired text embeddings");
  std::string tr_dir, tr_out, tr_words = "default";
  std::uint64_t tr_seed = 0;
  std::size_t tr_n = 10000;
  TrainFlags tr_flags;
  tr->add_option("--train-dir", tr_dir, "Directory with normals.emb/anomalies.emb");
  tr->add_option("--seed", tr_seed, "Seed for init, shuffling and dropout")->capture_default_str();
  tr->add_option("--n-pairs", tr_n, "Training pairs to use")->capture_default_str();
  tr->add_option("--word-pair", tr_words, "Fills {word_pair} in --train-dir")->capture_default_str();
  tr_flags.add(tr);
  tr->add_option("--out", tr_out, "Output model checkpoint")->required();

  // score
  auto* sc = app.add_subcommand("score", "Score image embeddings and write a score CSV");
  ExperimentFlags sc_flags;
  std::uint64_t sc_seed = 0;
  std::string sc_model, sc_out;
  sc_flags.add(sc, false);
  sc->add_option("--seed", sc_seed, "Seed for reference sampling")->capture_default_str();
  sc->add_option("--model", sc_model, "Model checkpoint (needed for s_fnn)");
  sc->add_option("--out", sc_out, "Output score CSV")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a score CSV per category");
  std::string ev_scores, ev_kind, ev_out, ev_table;
  ev->add_option("--scores", ev_scores, "Score CSV")->required();
  ev->add_option("--kind", ev_kind, "Score kind to evaluate (default: sum, or the only kind)");
  ev->add_option("--out", ev_out, "Output report JSON")->required();
  ev->add_option("--table", ev_table, "Also write the text table here");

  // report
  auto* rp = app.add_subcommand("report", "Run the full multi-seed experiment");
  ExperimentFlags rp_flags;
  std::string rp_out, rp_table;
  rp_flags.add(rp, true);
  rp->add_option("--out", rp_out, "Output report JSON")->required();
  rp->add_option("--table", rp_table, "Also write the text table here");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Repeat the experiment over n_pairs or word pairs");
  ExperimentFlags sw_flags;
  std::string sw_var = "n_pairs", sw_out;
  std::vector<std::string> sw_values;
  sw_flags.add(sw, true);
  sw->add_option("--variable", sw_var, "n_pairs | word_pair")->capture_default_str();
  sw->add_option("--values", sw_values, "Values to sweep ('grid' = all 16 word pairs)")->delimiter(',')->required();
  sw->add_option("--out", sw_out, "Output sweep CSV")->required();

  // synth
  auto* sy = app.add_subcommand("synth", "Write the synthetic Gaussian fixture");
  SyntheticSpec sy_spec;
  std::string sy_out;
  sy->add_option("--out", sy_out, "Output directory")->required();
  sy->add_option("--dim", sy_spec.dim, "Embedding dimension")->capture_default_str();
  sy->add_option("--n-pairs", sy_spec.n_pairs, "Training pairs")->capture_default_str();
  sy->add_option("--seed", sy_spec.seed, "Fixture seed")->capture_default_str();

  // manifest
  auto* mf = app.add_subcommand("manifest", "Build a manifest from a dataset directory");
  std::string mf_layout = "mvtec", mf_root, mf_out;
  mf->add_option("--layout", mf_layout, "mvtec | visa-raw")->capture_default_str();
  mf->add_option("--root", mf_root, "Dataset root")->required();
  mf->add_option("--out", mf_out, "Output manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return run_gen_prompts(gen_seed, gen_n, gen_words, gen_lmin, gen_lmax, gen_alphabet, gen_guide, gen_object, gen_out);
    if (*tr) return run_train(tr_dir, tr_seed, tr_n, tr_words, tr_flags, tr_out);
    if (*sc) return run_score(sc_flags, sc_seed, sc_model, sc_out);
    if (*ev) return run_eval(ev_scores, ev_kind, ev_out, ev_table);
    if (*rp) return run_report(rp_flags, rp_out, rp_table);
    if (*sw) return run_sweep_cmd(sw_flags, sw_var, sw_values, sw_out);
    if (*sy) {
      write_synthetic_fixture(sy_out, sy_spec);
      std::cout << "wrote synthetic fixture to " << sy_out << "\n";
      return kExitOk;
    }
    if (*mf) {
      DatasetManifest m;
      if (mf_layout == "mvtec") {
        m = build_manifest_mvtec(mf_root);
      } else if (mf_layout == "visa-raw") {
        m = build_manifest_visa_raw(mf_root);
      } else {
        throw ConfigError("unknown layout: " + mf_layout);
      }
      write_manifest(m, mf_out);
      std::cout << "wrote " << m.entries.size() << " entries to " << mf_out << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
