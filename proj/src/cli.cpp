/* Copyright 2026 The wsad Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wsad/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wsad/errors.hpp"
#include "wsad/runner.hpp"
#include "wsad/synth.hpp"

namespace wsad {
namespace {

// Paths given relative to nothing in particular are looked up under
// $WSAD_DATA_ROOT when they do not exist as given.
std::filesystem::path resolve_input(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative() && !std::filesystem::exists(p)) {
    if (const char* root = std::getenv("WSAD_DATA_ROOT"); root != nullptr && *root != '\0') {
      return std::filesystem::path(root) / p;
    }
  }
  return p;
}

void require_file(const std::filesystem::path& path, const std::string& what, const std::string& producer) {
  if (!std::filesystem::exists(path)) {
    throw IoError("missing " + what + " " + path.string() + "; produce it with `wsad " + producer + "`");
  }
}

DatasetManifest load_manifest_arg(const std::string& path) {
  const auto resolved = resolve_input(path);
  require_file(resolved, "manifest", "synth");
  return read_manifest(resolved);
}

NormalBank load_bank_arg(const std::string& stem) {
  const auto resolved = resolve_input(stem);
  require_file(bank_features_path(resolved), "normal bank", "bank build");
  require_file(bank_origins_path(resolved), "normal bank origins", "bank build");
  return NormalBank::load(resolved);
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const double v = std::stod(text);
      return {v, v};
    }
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("expected a range like 0.1:1.0, got '" + text + "'");
  }
}

std::pair<std::uint32_t, std::uint32_t> parse_hw(const std::string& text) {
  const auto x = text.find_first_of("xX,");
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    return {static_cast<std::uint32_t>(std::stoul(text.substr(0, x))),
            static_cast<std::uint32_t>(std::stoul(text.substr(x + 1)))};
  } catch (const std::exception&) {
    throw ConfigError("expected HxW, got '" + text + "'");
  }
}

// Flags shared by every stage that reads raw feature maps.
struct AggregationFlags {
  std::uint32_t patch_size = 5;
  std::vector<std::uint32_t> layers{0};
  std::string target_hw;
  CLI::Option* patch_opt = nullptr;
  CLI::Option* layers_opt = nullptr;
  CLI::Option* target_opt = nullptr;

  void attach(CLI::App* app) {
    patch_opt = app->add_option("--patch-size", patch_size, "Aggregation neighborhood p (odd)");
    layers_opt = app->add_option("--layers", layers, "Layer indices to align")->delimiter(',');
    target_opt = app->add_option("--target-hw", target_hw, "Aligned resolution HxW (default: first layer)");
  }

  void apply(AggregationConfig& config) const {
    if (patch_opt->count()) config.patch_size = patch_size;
    if (layers_opt->count()) config.layer_indices = layers;
    if (target_opt->count()) config.target_hw = parse_hw(target_hw);
  }

  AggregationConfig build() const {
    AggregationConfig config;
    apply(config);
    return config;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised patch-feature anomaly detection", "wsad"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature-map dataset");
  SynthConfig synth_cfg;
  std::string synth_out, blob = "5x5";
  synth->add_option("--out", synth_out, "Dataset root directory")->required();
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--normal-train", synth_cfg.n_normal_train);
  synth->add_option("--anomaly-train", synth_cfg.n_anomaly_train);
  synth->add_option("--normal-test", synth_cfg.n_normal_test);
  synth->add_option("--anomaly-test", synth_cfg.n_anomaly_test);
  synth->add_option("--height", synth_cfg.height);
  synth->add_option("--width", synth_cfg.width);
  synth->add_option("--channels", synth_cfg.channels);
  synth->add_option("--blob", blob, "Lesion extent HxW in patches");
  synth->add_option("--shift", synth_cfg.shift_magnitude);
  synth->add_option("--sigma", synth_cfg.noise_sigma);
  synth->callback([&] {
    action = [&] {
      std::tie(synth_cfg.blob_height, synth_cfg.blob_width) = parse_hw(blob);
      const auto manifest = generate_synthetic(synth_cfg, synth_out);
      out << "wrote " << manifest.entries.size() << " entries to "
          << (std::filesystem::path(synth_out) / "manifest.jsonl").string() << '\n';
    };
  });

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Align and aggregate feature maps into patch sets");
  std::string agg_manifest, agg_out;
  AggregationFlags agg_flags;
  agg->add_option("--manifest", agg_manifest)->required();
  agg->add_option("--out", agg_out, "Output dataset root")->required();
  agg_flags.attach(agg);
  agg->callback([&] {
    action = [&] {
      const auto manifest = load_manifest_arg(agg_manifest);
      const auto config = agg_flags.build();
      DatasetManifest result;
      result.root = agg_out;
      for (const auto& e : manifest.entries) {
        const PatchSet ps = extract_patch_set(e, manifest, config);
        ManifestEntry copy = e;
        copy.layer_paths.clear();
        copy.aggregated = true;
        copy.feature_path = "features/" + e.id + ".wsfx";
        write_feature_map(ps.features, result.resolve(copy.feature_path));
        if (e.mask_path) {
          copy.mask_path = "masks/" + e.id + ".wsfx";
          write_feature_map(read_feature_map(manifest.resolve(*e.mask_path)), result.resolve(*copy.mask_path));
        }
        result.entries.push_back(std::move(copy));
      }
      write_manifest(result, std::filesystem::path(agg_out) / "manifest.jsonl");
      out << "aggregated " << result.entries.size() << " images\n";
    };
  });

  // bank build
  auto* bank = app.add_subcommand("bank", "Normal bank operations");
  bank->require_subcommand(1);
  auto* bank_build = bank->add_subcommand("build", "Build the normal bank from train-normal images");
  std::string bank_manifest, bank_out;
  double bank_subsample = 1.0;
  std::uint64_t bank_seed = 0;
  AggregationFlags bank_flags;
  bank_build->add_option("--manifest", bank_manifest)->required();
  bank_build->add_option("--out", bank_out, "Output stem (writes <stem>.wsfx and <stem>.origins.jsonl)")->required();
  bank_build->add_option("--bank-subsample", bank_subsample, "Keep this fraction of rows (uniform random)");
  bank_build->add_option("--seed", bank_seed, "Subsampling seed");
  bank_flags.attach(bank_build);
  bank_build->callback([&] {
    action = [&] {
      const auto manifest = load_manifest_arg(bank_manifest);
      const NormalBank b = build_bank(manifest, bank_flags.build(), BankOptions{bank_subsample, bank_seed});
      b.save(bank_out);
      out << "bank: " << b.size() << " rows x " << b.channels() << " channels\n";
    };
  });

  // mine
  auto* mine_cmd = app.add_subcommand("mine", "Mine anomaly features from train-anomaly images");
  std::string mine_manifest, mine_bank, mine_out;
  double mine_r = 0.2;
  unsigned mine_threads = 1;
  AggregationFlags mine_flags;
  mine_cmd->add_option("--manifest", mine_manifest)->required();
  mine_cmd->add_option("--bank", mine_bank, "Bank stem")->required();
  mine_cmd->add_option("--r", mine_r, "Retention rate in (0, 1]");
  mine_cmd->add_option("--out", mine_out, "Output stem")->required();
  mine_cmd->add_option("--threads", mine_threads);
  mine_flags.attach(mine_cmd);
  mine_cmd->callback([&] {
    action = [&] {
      const auto manifest = load_manifest_arg(mine_manifest);
      const NormalBank b = load_bank_arg(mine_bank);
      const auto anomalies = extract_split(manifest, Split::kTrainAnomaly, mine_flags.build());
      const MinedAnomalySet mined = mine(b, anomalies, mine_r, mine_threads);
      save_mined(mined, mine_out);
      out << "mined " << mined.size() << " of " << mined.candidate_count << " anomaly features\n";
    };
  });

  // mix
  auto* mix = app.add_subcommand("mix", "Augment mined features by linear mixing with the bank");
  std::string mix_mined, mix_bank, mix_out, mix_alpha = "0.1:1.0";
  std::uint64_t mix_seed = 0;
  std::size_t mix_target = 0;
  bool mix_off = false;
  mix->add_option("--mined", mix_mined, "Mined stem")->required();
  mix->add_option("--bank", mix_bank, "Bank stem")->required();
  mix->add_option("--alpha", mix_alpha, "Mixing factor range low:high");
  mix->add_option("--seed", mix_seed);
  mix->add_option("--target", mix_target, "Output size (default: bank size)");
  mix->add_flag("--no-mixing", mix_off, "Copy the mined set unchanged");
  mix->add_option("--out", mix_out, "Output stem")->required();
  mix->callback([&] {
    action = [&] {
      require_file(resolve_input(mix_mined + ".wsfx"), "mined set", "mine");
      const MinedAnomalySet mined = load_mined(resolve_input(mix_mined));
      const NormalBank b = load_bank_arg(mix_bank);
      const auto [lo, hi] = parse_range(mix_alpha);
      AugmentedAnomalySet a;
      if (mix_off) {
        a = without_mixing(mined);
      } else if (mix_target == 0) {
        a = augment(mined, b, true, lo, hi, mix_seed);
      } else {
        a = linear_mix(mined, b, mix_target, lo, hi, mix_seed);
      }
      save_augmented(a, mix_out);
      out << "augmented set: " << a.size() << " rows\n";
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the discriminator");
  std::string train_bank, train_aug, train_out, train_log;
  TrainConfig tc;
  train_cmd->add_option("--bank", train_bank, "Bank stem")->required();
  train_cmd->add_option("--augmented", train_aug, "Augmented anomaly stem")->required();
  train_cmd->add_option("--epochs", tc.epochs);
  train_cmd->add_option("--lr", tc.learning_rate);
  train_cmd->add_option("--batch", tc.batch_size);
  train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--hidden", tc.hidden_dim, "Hidden width (default: input width)");
  train_cmd->add_option("--threads", tc.threads);
  train_cmd->add_option("--out", train_out, "Model file (.wsdm)")->required();
  train_cmd->add_option("--log", train_log, "Per-epoch loss log (JSON lines)");
  train_cmd->callback([&] {
    action = [&] {
      const NormalBank b = load_bank_arg(train_bank);
      require_file(resolve_input(train_aug + ".wsfx"), "augmented anomaly set", "mix");
      const AugmentedAnomalySet a = load_augmented(resolve_input(train_aug));
      const TrainResult tr = train(b.rows(), a.rows(), tc);
      tr.model.save(train_out);
      if (!train_log.empty()) write_train_log(tr.epoch_losses, train_log);
      if (!tr.epoch_losses.empty()) out << "final loss " << tr.epoch_losses.back() << '\n';
    };
  });

  // score
  auto* score = app.add_subcommand("score", "Score test images");
  std::string score_model, score_knn_bank, score_manifest, score_out, score_maps, score_renders;
  std::uint32_t render_scale = 16;
  double render_sigma = 4.0;
  unsigned score_threads = 1;
  AggregationFlags score_flags;
  auto* model_opt = score->add_option("--model", score_model, "Discriminator (.wsdm)");
  auto* knn_opt = score->add_option("--knn-bank", score_knn_bank, "Score by nearest-normal distance instead");
  model_opt->excludes(knn_opt);
  score->add_option("--manifest", score_manifest)->required();
  score->add_option("--out", score_out, "Score file (JSON lines)")->required();
  score->add_option("--maps-dir", score_maps, "Write raw anomaly maps as WSFX");
  score->add_option("--render-dir", score_renders, "Write PGM renders");
  score->add_option("--render-scale", render_scale);
  score->add_option("--render-sigma", render_sigma);
  score->add_option("--threads", score_threads);
  score_flags.attach(score);
  score->callback([&] {
    action = [&] {
      if (score_model.empty() && score_knn_bank.empty()) throw ConfigError("score needs --model or --knn-bank");
      const auto manifest = load_manifest_arg(score_manifest);
      const auto tests = extract_split(manifest, Split::kTest, score_flags.build());
      std::vector<ImageResult> results;
      if (!score_model.empty()) {
        const auto model_path = resolve_input(score_model);
        require_file(model_path, "model", "train");
        results = score_split(Discriminator::load(model_path), manifest, tests, score_maps, score_renders,
                              render_scale, render_sigma);
      } else {
        results = knn_score_split(load_bank_arg(score_knn_bank), manifest, tests, score_threads);
      }
      write_scores(results, score_out);
      out << "scored " << results.size() << " images\n";
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compute AUROC / ACC / F1 from score files");
  std::vector<std::string> eval_scores;
  std::string eval_out, eval_md;
  eval_cmd->add_option("--scores", eval_scores, "One score file per run")->required();
  eval_cmd->add_option("--out", eval_out, "Report JSON");
  eval_cmd->add_option("--markdown", eval_md, "Markdown table");
  eval_cmd->add_flag("--repeat-aggregate", "Aggregate several runs (implied by multiple --scores)");
  eval_cmd->callback([&] {
    action = [&] {
      std::vector<EvalReport> reports;
      for (const auto& path : eval_scores) {
        const auto resolved = resolve_input(path);
        require_file(resolved, "score file", "score");
        reports.push_back(evaluate(read_scores(resolved)));
      }
      const EvalReport report = aggregate_runs(reports);
      if (!eval_out.empty()) {
        write_report(report, eval_out, eval_md);
      } else if (!eval_md.empty()) {
        std::ofstream md(eval_md);
        md << report_to_markdown(report);
      }
      out << report_to_json(report) << '\n';
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline end to end");
  std::string run_config_path, run_manifest, run_out, run_alpha;
  AggregationFlags run_flags;
  RunConfig run_flags_cfg;
  bool no_mining = false, no_mixing = false;
  run->add_option("--config", run_config_path, "JSON config (flags override it)");
  auto* o_manifest = run->add_option("--manifest", run_manifest);
  auto* o_out = run->add_option("--out", run_out, "Output directory");
  auto* o_r = run->add_option("--r", run_flags_cfg.retention_rate);
  auto* o_alpha = run->add_option("--alpha", run_alpha, "low:high");
  auto* o_epochs = run->add_option("--epochs", run_flags_cfg.train.epochs);
  auto* o_lr = run->add_option("--lr", run_flags_cfg.train.learning_rate);
  auto* o_batch = run->add_option("--batch", run_flags_cfg.train.batch_size);
  auto* o_seed = run->add_option("--seed", run_flags_cfg.train.seed);
  auto* o_hidden = run->add_option("--hidden", run_flags_cfg.train.hidden_dim);
  auto* o_repeat = run->add_option("--repeat", run_flags_cfg.repeat, "Independent runs, seeds seed..seed+n-1");
  auto* o_threads = run->add_option("--threads", run_flags_cfg.threads);
  auto* o_subsample = run->add_option("--bank-subsample", run_flags_cfg.bank_subsample);
  auto* o_maps = run->add_flag("--write-maps", run_flags_cfg.write_maps);
  auto* o_render = run->add_flag("--render", run_flags_cfg.render);
  auto* o_no_mining = run->add_flag("--no-mining", no_mining, "Use all anomaly-image features");
  auto* o_no_mixing = run->add_flag("--no-mixing", no_mixing, "Train on the mined set without augmentation");
  run_flags.attach(run);
  run->callback([&] {
    action = [&] {
      RunConfig c;
      if (!run_config_path.empty()) {
        const auto path = resolve_input(run_config_path);
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        c = run_config_from_json(ss.str());
      }
      run_flags.apply(c.aggregation);
      if (o_manifest->count()) c.manifest = run_manifest;
      if (!c.manifest.empty()) c.manifest = resolve_input(c.manifest.string());
      if (o_out->count()) c.output_dir = run_out;
      if (o_r->count()) c.retention_rate = run_flags_cfg.retention_rate;
      if (o_alpha->count()) std::tie(c.alpha_low, c.alpha_high) = parse_range(run_alpha);
      if (o_epochs->count()) c.train.epochs = run_flags_cfg.train.epochs;
      if (o_lr->count()) c.train.learning_rate = run_flags_cfg.train.learning_rate;
      if (o_batch->count()) c.train.batch_size = run_flags_cfg.train.batch_size;
      if (o_seed->count()) c.train.seed = run_flags_cfg.train.seed;
      if (o_hidden->count()) c.train.hidden_dim = run_flags_cfg.train.hidden_dim;
      if (o_repeat->count()) c.repeat = run_flags_cfg.repeat;
      if (o_threads->count()) c.threads = run_flags_cfg.threads;
      if (o_subsample->count()) c.bank_subsample = run_flags_cfg.bank_subsample;
      if (o_maps->count()) c.write_maps = true;
      if (o_render->count()) c.render = true;
      if (o_no_mining->count()) c.mining = !no_mining;
      if (o_no_mixing->count()) c.mixing = !no_mixing;
      if (!c.manifest.empty()) require_file(c.manifest, "manifest", "synth");
      const RunOutcome outcome = run_all(c);
      if (outcome.knn_fallback) out << "scored with the kNN baseline (no anomaly training images)\n";
      out << report_to_markdown(outcome.report);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace wsad
