// prosurv: synthetic data generation, training, evaluation, missing-modality
// sweeps and alignment reports.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.

#include "prosurv/checkpoint.hpp"
#include "prosurv/config.hpp"
#include "prosurv/data_io.hpp"
#include "prosurv/errors.hpp"
#include "prosurv/synth.hpp"
#include "prosurv/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prosurv;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string manifest;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> fold;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "Override the run seed");
  cmd->add_option("--manifest", o.manifest, "Dataset manifest (overrides config)");
  cmd->add_option("--out", o.out, "Output directory (overrides config out_dir)");
  cmd->add_option("--epochs", o.epochs, "Override the epoch count");
  cmd->add_option("--fold", o.fold, "Fold index to train/evaluate");
}

TrainConfig resolve_config(const CommonOptions& o) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.synth.seed = *o.seed;
  }
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.fold) cfg.fold = *o.fold;
  cfg.validate();
  return cfg;
}

data::Dataset load_data(const TrainConfig& cfg) {
  if (cfg.manifest.empty()) throw UsageError("no manifest given (set 'manifest' in the config or pass --manifest)");
  return data::load_dataset(cfg.manifest);
}

data::FoldSplit fold_split(const TrainConfig& cfg, const data::Dataset& ds) {
  return data::split_folds(ds.samples.size(), cfg.split_ratios, cfg.folds, cfg.seed).at(static_cast<std::size_t>(cfg.fold));
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

const std::vector<std::size_t>& pick_split(const data::FoldSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw UsageError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<double> parse_rates(const std::string& text) {
  std::vector<double> rates;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double r = std::stod(item, &used);
      if (used != item.size() || r < 0.0 || r > 1.0) throw std::invalid_argument(item);
      rates.push_back(r);
    } catch (const std::exception&) {
      throw UsageError("--rates: '" + item + "' is not a rate in [0, 1]");
    }
  }
  if (rates.empty()) throw UsageError("--rates: no rates given");
  return rates;
}

int run_synth(const CommonOptions& o) {
  const TrainConfig cfg = resolve_config(o);
  const fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "synth" : fs::path(o.out);
  const auto manifest = synth::write_dataset(cfg.synth, out);
  std::cout << json{{"manifest", manifest.string()}, {"patients", cfg.synth.num_patients}}.dump(2) << '\n';
  return 0;
}

int run_train(const CommonOptions& o, bool all_folds) {
  const TrainConfig cfg = resolve_config(o);
  const auto ds = load_data(cfg);
  fs::create_directories(cfg.out_dir);
  const auto save_fold = [&](const train::TrainResult& r) {
    const fs::path dir = fs::path(cfg.out_dir) / ("fold" + std::to_string(r.checkpoint.config.fold));
    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint.psck", r.checkpoint);
    write_json(dir / "metrics.json", train::metrics_json(r));
    return dir;
  };
  if (all_folds) {
    const auto cv = train::cross_validate(cfg, ds, &std::cerr);
    json folds = json::array();
    for (const auto& r : cv.folds) {
      save_fold(r);
      folds.push_back(train::metrics_json(r));
    }
    json summary{{"folds", folds}, {"test_cindex_mean", cv.mean_test_cindex}, {"test_cindex_std", cv.std_test_cindex}};
    write_json(fs::path(cfg.out_dir) / "metrics.json", summary);
    std::cout << json{{"test_cindex_mean", cv.mean_test_cindex}, {"test_cindex_std", cv.std_test_cindex}}.dump(2)
              << '\n';
    return 0;
  }
  const auto result = train::train(cfg, ds, fold_split(cfg, ds), &std::cerr);
  const auto dir = save_fold(result);
  std::cout << json{{"checkpoint", (dir / "checkpoint.psck").string()},
                    {"best_epoch", result.best_epoch},
                    {"best_val_cindex", result.best_val_cindex},
                    {"test_cindex", train::to_json(result.test)}}
                   .dump(2)
            << '\n';
  return 0;
}

struct Loaded {
  Checkpoint ckpt;
  std::unique_ptr<model::ProSurvModel> model;
  train::Cohort cohort;
  data::FoldSplit split;
};

// The manifest comes from --manifest, else the --config file, else the
// checkpoint's own training config.
std::string manifest_override(const CommonOptions& o) {
  if (!o.manifest.empty()) return o.manifest;
  if (!o.config.empty()) return load_config(o.config).manifest;
  return {};
}

Loaded load_for_eval(const std::string& checkpoint_path, const std::string& manifest) {
  Loaded l;
  l.ckpt = load_checkpoint(checkpoint_path);
  if (!manifest.empty()) l.ckpt.config.manifest = manifest;
  const auto raw = load_data(l.ckpt.config);
  l.model = build_model(l.ckpt);
  l.cohort = train::apply_preprocessing(raw, l.ckpt.edges, l.ckpt.gene_normalizer);
  l.split = fold_split(l.ckpt.config, raw);
  return l;
}

int run_eval(const std::string& checkpoint, const std::string& manifest, const std::string& split_name,
             const std::string& scenario) {
  const auto l = load_for_eval(checkpoint, manifest);
  const auto& idx = pick_split(l.split, split_name);
  json report{{"checkpoint", checkpoint}, {"split", split_name}, {"epoch", l.ckpt.epoch}};
  if (scenario.empty() || scenario == "all") {
    report["cindex"] = train::to_json(train::evaluate_scenarios(*l.model, l.cohort, idx));
  } else if (scenario == "natural") {
    const auto r = train::evaluate(*l.model, l.cohort, idx, std::nullopt);
    report["scenario"] = "natural";
    report["cindex"] = r.cindex;
    report["samples"] = r.samples;
  } else {
    const auto sc = model::scenario_from_string(scenario);
    const auto r = train::evaluate(*l.model, l.cohort, idx, sc);
    report["scenario"] = model::to_string(sc);
    report["cindex"] = r.cindex;
    report["samples"] = r.samples;
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

int run_sweep(const CommonOptions& o, const std::string& rates_text) {
  const TrainConfig cfg = resolve_config(o);
  const auto ds = load_data(cfg);
  const auto rows = train::sweep_missing(cfg, ds, fold_split(cfg, ds), parse_rates(rates_text), &std::cerr);
  fs::create_directories(cfg.out_dir);
  const json j = train::to_json(rows);
  write_json(fs::path(cfg.out_dir) / "sweep.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_align(const std::string& checkpoint, const std::string& manifest, const std::string& split_name) {
  const auto l = load_for_eval(checkpoint, manifest);
  const auto report = train::alignment_report(*l.model, l.cohort, pick_split(l.split, split_name));
  json j = train::to_json(report);
  j["split"] = split_name;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-guided cross-modal survival prediction"};
  app.require_subcommand(1);

  CommonOptions synth_opts, train_opts, sweep_opts, eval_opts, align_opts;
  const auto add_eval_options = [](CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON config file (only its manifest is used)");
    cmd->add_option("--manifest", o.manifest, "Dataset manifest (defaults to the checkpoint's)");
  };
  bool all_folds = false;
  std::string checkpoint, split_name = "test", scenario, rates = "0,0.25,0.5";

  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate a synthetic cohort with a planted risk signal");
  add_common(synth_cmd, synth_opts);

  auto* train_cmd = app.add_subcommand("train", "Train and select the best-validation checkpoint");
  add_common(train_cmd, train_opts);
  train_cmd->add_flag("--all-folds", all_folds, "Run every fold and report mean/std test C-index");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_eval_options(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split_name, "train, val or test");
  eval_cmd->add_option("--scenario", scenario, "natural, complete, pathology, genomics or all (default)");

  auto* sweep_cmd = app.add_subcommand("sweep-missing", "Retrain with growing fractions of unimodal patients");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--rates", rates, "Comma-separated rates in [0, 1]");

  auto* align_cmd = app.add_subcommand("align-report", "Original vs translated feature distance");
  add_eval_options(align_cmd, align_opts);
  align_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  align_cmd->add_option("--split", split_name, "train, val or test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) return run_synth(synth_opts);
    if (*train_cmd) return run_train(train_opts, all_folds);
    if (*eval_cmd) return run_eval(checkpoint, manifest_override(eval_opts), split_name, scenario);
    if (*sweep_cmd) return run_sweep(sweep_opts, rates);
    if (*align_cmd) return run_align(checkpoint, manifest_override(align_opts), split_name);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
