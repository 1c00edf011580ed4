// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

// dgdm: dataset generation, training, sampling and evaluation from config files.
// Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dgdm/experiment.hpp"
#include "dgdm/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using dgdm::ConfigError;
using dgdm::ExperimentConfig;

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

struct ConfigArgs {
  std::vector<std::string> files;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", files, "Config file (JSON); later files override earlier ones")
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "Override one key, key=value (repeatable)");
  }
  ExperimentConfig load() const { return dgdm::load_config(files, overrides); }
};

void apply_files(ExperimentConfig& config, const std::vector<std::string>& files) {
  for (const auto& path : files) {
    std::ifstream in(path);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
    dgdm::apply_json(config, doc, path);
  }
}

std::string fixed(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion forecasting with a deterministic guide: data, training, sampling, evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset (manifest plus arrays)");
  ConfigArgs gen_args;
  gen_args.attach(gen);
  bool force = false;
  gen->add_flag("--force", force, "Overwrite an existing dataset");

  // train
  auto* train = app.add_subcommand("train", "Train into output.dir (logs and checkpoints)");
  ConfigArgs train_args;
  train_args.attach(train);
  std::string resume;
  train->add_option("--resume", resume, "Checkpoint to resume from, or 'auto' for checkpoints/last.pt");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw forecast ensembles from a checkpoint");
  std::string checkpoint, out_dir, split = "test", input_path, weights, svs;
  std::vector<std::string> sample_files, sample_overrides;
  std::vector<std::int64_t> clips;
  std::optional<std::int64_t> n_samples, reverse_steps;
  std::optional<double> eta, truncation;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset_dir;
  bool sequential = false;
  sample->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  sample->add_option("-c,--config", sample_files, "Config overlay applied to the checkpoint's config")
      ->check(CLI::ExistingFile);
  sample->add_option("-s,--set", sample_overrides, "Override one key, key=value (repeatable)");
  sample->add_option("--out", out_dir, "Output directory (default <output.dir>/forecasts/seed_<seed>)");
  sample->add_option("--split", split, "Split to draw clips from")->check(CLI::IsMember({"train", "val", "test"}));
  sample->add_option("--clips", clips, "Clip positions within the split (default: first inference.max_clips)")
      ->delimiter(',');
  sample->add_option("--input", input_path, "Observed frames .npy in physical units, [B,C,L,H,W] or [C,L,H,W]")
      ->check(CLI::ExistingFile);
  sample->add_option("--dataset", dataset_dir, "Dataset directory (its normalization is used)");
  sample->add_option("--n-samples", n_samples, "Ensemble members (default inference.n_samples)");
  sample->add_option("--eta", eta, "Reverse-step stochasticity in [0, 1]");
  sample->add_option("--truncation", truncation, "Truncation fraction in [0, 1)");
  sample->add_option("--reverse-steps", reverse_steps, "Reverse steps for the longest frame");
  sample->add_option("--svs", svs, "Sequential variance schedule")->check(CLI::IsMember({"on", "off"}));
  sample->add_option("--seed", seed, "Sampling seed (default: first of inference.seeds)");
  sample->add_option("--weights", weights, "Weights to sample with")->check(CLI::IsMember({"ema", "live"}));
  sample->add_flag("--sequential", sequential, "Draw members one at a time instead of as one batch");

  // eval
  auto* eval = app.add_subcommand("eval", "Score forecast directories; one directory per seed");
  dgdm::EvalRequest eval_req;
  bool no_plots = false;
  eval->add_option("-f,--forecasts", eval_req.forecast_dirs, "Forecast directories written by sample")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--truth", eval_req.truth_path, "Ground truth .npy overriding each directory's truth.npy")
      ->check(CLI::ExistingFile);
  eval->add_flag("--no-truth", eval_req.ignore_truth, "Ignore ground truth (members scored against the ensemble mean)");
  eval->add_option("--out", eval_req.out_dir, "Report directory")->required();
  eval->add_flag("--frame-sum", eval_req.frame_sum, "MAE/MSE aggregates sum over frames");
  eval->add_flag("--best", "Add oracle best-of-N rows (needs ground truth)");
  eval->add_flag("--no-plots", no_plots, "Skip the PNG grids");
  eval->add_option("--plot-clips", eval_req.plot_clips, "Clips rendered per forecast directory");
  eval->add_option("--description", eval_req.description, "Label written into the reports");

  // run
  auto* run = app.add_subcommand("run", "gen-data (if needed), train, sample every inference seed, eval");
  ConfigArgs run_args;
  run_args.attach(run);
  dgdm::RunOptions run_opts;
  run->add_flag("--force-data", run_opts.force_data, "Regenerate the dataset first");
  run->add_option("--resume", run_opts.resume, "Checkpoint to resume training from, or 'auto'");

  // config
  auto* config = app.add_subcommand("config", "Inspect configuration");
  config->require_subcommand(1);
  auto* defaults = config->add_subcommand("defaults", "Print every key with its default");
  auto* schema = config->add_subcommand("schema", "Print the config JSON Schema");
  auto* report_schema = config->add_subcommand("report-schema", "Print the report.json JSON Schema");
  auto* show = config->add_subcommand("show", "Print the resolved config");
  ConfigArgs show_args;
  show_args.attach(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen) {
      dgdm::generate_dataset(gen_args.load(), force, std::cout);
    } else if (*train) {
      const auto r = dgdm::train_experiment(train_args.load(), resume, std::cout);
      std::cout << "trained steps " << r.start_step << ".." << r.steps << "; loss " << fixed(r.first_loss) << " -> "
                << fixed(r.last_loss) << "; wrote " << r.final_checkpoint << "\n";
    } else if (*sample) {
      auto cfg = dgdm::checkpoint_config(checkpoint, {});
      apply_files(cfg, sample_files);
      for (const auto& o : sample_overrides) dgdm::apply_override(cfg, o);
      if (dataset_dir) cfg.dataset.dir = *dataset_dir;
      if (n_samples) cfg.inference.n_samples = *n_samples;
      if (eta) cfg.diffusion.eta = *eta;
      if (truncation) cfg.diffusion.truncation_fraction = *truncation;
      if (reverse_steps) cfg.diffusion.reverse_steps = *reverse_steps;
      if (!svs.empty()) cfg.diffusion.svs_enabled = svs == "on";
      if (!weights.empty()) cfg.inference.use_ema = weights == "ema";
      if (sequential) cfg.inference.batched = false;
      cfg.validate();
      dgdm::SampleRequest req;
      req.checkpoint = checkpoint;
      req.split = split;
      req.clips = clips;
      req.input_path = input_path;
      req.seed = seed ? *seed : static_cast<std::uint64_t>(cfg.inference.seeds.front());
      req.out_dir = out_dir.empty()
                        ? (fs::path(cfg.output_dir) / "forecasts" / ("seed_" + std::to_string(req.seed))).string()
                        : out_dir;
      const auto r = dgdm::sample_experiment(cfg, req);
      std::cout << "wrote " << r.members << " member(s) for " << r.clips << " clip(s) to " << r.dir << "\n";
      for (const auto& [name, digest] : r.provenance["files"].items())
        std::cout << "  " << name << " fnv1a64=" << digest.get<std::string>() << "\n";
    } else if (*eval) {
      eval_req.best = eval->count("--best") > 0;
      eval_req.plots = !no_plots;
      const auto r = dgdm::evaluate_forecasts(eval_req, std::cout);
      std::cout << "scored " << r.reports.size() << " forecast set(s); reports in " << eval_req.out_dir << "\n";
    } else if (*run) {
      const auto cfg = run_args.load();
      const auto r = dgdm::run_experiment(cfg, run_opts, std::cout);
      std::cout << "reports in " << (fs::path(cfg.output_dir) / "eval").string() << "\n";
    } else if (*defaults) {
      std::cout << dgdm::to_flat_json(ExperimentConfig{}).dump(2) << "\n";
    } else if (*schema) {
      std::cout << dgdm::config_schema().dump(2) << "\n";
    } else if (*report_schema) {
      std::cout << dgdm::report_schema().dump(2) << "\n";
    } else if (*show) {
      std::cout << dgdm::to_flat_json(show_args.load()).dump(2) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
