// icnf: command-line driver for the forecasting-augmentation pipeline.
//
//   icnf synth            --out RAW
//   icnf prep             --data RAW --out PREP
//   icnf train-forecaster --data PREP --out FORECASTERS [--model lstm|brainlm|all] [--family ...]
//   icnf extend           --data DIR --ckpt CKPT --out DIR
//   icnf build-variants   --data PREP --forecasters FORECASTERS --out VARIANTS
//   icnf train-classifier --data VARIANTS/variant_d --out CKPT
//   icnf run-matrix       --data VARIANTS --out RUNDIR
//   icnf interpret        --ckpt FORECASTERS/brainlm_baseline.ckpt --data PREP --out sensitivity.csv
//
// Every subcommand accepts --config FILE (default: built-in desk profile),
// --seed N and --threads N.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "desk_profile.hpp"
#include "icnf/config.hpp"
#include "icnf/error.hpp"
#include "icnf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace icnf;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  std::string data;
};

void add_common(CLI::App* cmd, Common& c, const char* out_help, bool needs_data) {
  cmd->add_option("--config", c.config_path, "INI run configuration (default: built-in desk profile)");
  cmd->add_option("--seed", c.seed, "Master seed (overrides [run] seed)");
  cmd->add_option("--threads", c.threads, "Worker threads (overrides [run] threads)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, out_help)->required();
  if (needs_data) cmd->add_option("--data", c.data, "Input directory")->required();
}

config::RunConfig resolve_config(const Common& c) {
  config::RunConfig cfg = c.config_path.empty() ? config::parse_config(kDeskProfile) : config::load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  config::finalize(cfg);
  return cfg;
}

std::vector<pipeline::ForecasterJob> select_jobs(const std::string& model, const std::string& family) {
  std::vector<pipeline::ForecasterJob> jobs;
  for (const auto& job : pipeline::all_forecaster_jobs()) {
    const bool model_ok = model == "all" || forecast::parse_kind(model) == job.kind;
    const bool family_ok = family == "all" || (family == "replicated") == job.replicated;
    if (model_ok && family_ok) jobs.push_back(job);
  }
  return jobs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative-forecasting augmentation for ICN time-series classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "icnf 0.1.0");

  Common common;
  std::string ckpt, forecasters, model = "all", family = "all";

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic cohort");
  add_common(synth, common, "Cohort directory to write", false);

  auto* prep = app.add_subcommand("prep", "Z-score every subject's channels");
  add_common(prep, common, "Normalized cohort directory", true);

  auto* train_fc = app.add_subcommand("train-forecaster", "Train LSTM / BrainLM forecasters");
  add_common(train_fc, common, "Directory for checkpoints and metrics", true);
  train_fc->add_option("--model", model, "lstm | brainlm | all")->check(CLI::IsMember({"lstm", "brainlm", "all"}));
  train_fc->add_option("--family", family, "baseline | replicated | all")
      ->check(CLI::IsMember({"baseline", "replicated", "all"}));

  auto* extend = app.add_subcommand("extend", "Append forecast timestamps to every series");
  add_common(extend, common, "Extended cohort directory", true);
  extend->add_option("--ckpt", ckpt, "Forecaster checkpoint")->required();

  auto* build = app.add_subcommand("build-variants", "Build dataset variants a..f");
  add_common(build, common, "Root directory for variant_<id>/ cohorts", true);
  build->add_option("--forecasters", forecasters, "Directory written by train-forecaster")->required();

  auto* train_cls = app.add_subcommand("train-classifier", "Train one TA-LSTM on a variant");
  add_common(train_cls, common, "Checkpoint file to write", true);

  auto* matrix = app.add_subcommand("run-matrix", "5-fold x N-seed cross-validation over the variants");
  add_common(matrix, common, "Run directory", true);

  auto* interp = app.add_subcommand("interpret", "Per-class channel-silencing sensitivity of BrainLM");
  add_common(interp, common, "Sensitivity CSV to write", true);
  interp->add_option("--ckpt", ckpt, "BrainLM checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const config::RunConfig cfg = resolve_config(common);
    const fs::path out = common.out;
    const fs::path data = common.data;

    if (synth->parsed()) {
      const auto cohort = pipeline::synth(cfg, out);
      std::printf("synth: %zu subjects (%zu CN, %zu AD) -> %s\n", cohort.size(), cohort.count(data::Label::kCN),
                  cohort.count(data::Label::kAD), out.c_str());
    } else if (prep->parsed()) {
      const auto raw = pipeline::require_cohort(data, "synth");
      pipeline::prep(raw, cfg, out);
      std::printf("prep: %zu subjects z-scored -> %s\n", raw.size(), out.c_str());
    } else if (train_fc->parsed()) {
      const auto cohort = pipeline::require_cohort(data, "prep");
      for (const auto& r : pipeline::train_forecasters(cohort, cfg, select_jobs(model, family), out)) {
        std::printf("%s/%s: val_mse %.6f  hold_baseline %.6f  ratio %.3f\n",
                    std::string(forecast::kind_name(r.job.kind)).c_str(), r.job.replicated ? "replicated" : "baseline",
                    r.val_mse, r.hold_baseline_mse, r.val_mse / r.hold_baseline_mse);
      }
    } else if (extend->parsed()) {
      const auto forecaster = forecast::Forecaster::load(ckpt);
      const auto cohort = pipeline::require_cohort(data, "prep", data::LoadOptions{{}, cfg.brainlm.channels});
      pipeline::extend(cohort, forecaster, cfg, out);
      std::printf("extend: %zu subjects +%zu steps -> %s\n", cohort.size(), forecaster.horizon(), out.c_str());
    } else if (build->parsed()) {
      const auto cohort = pipeline::require_cohort(data, "prep");
      if (!fs::is_directory(forecasters)) {
        throw DataError("forecaster directory " + forecasters + " not found; produce it with `icnf train-forecaster`");
      }
      const auto built = pipeline::build_variants(cohort, experiment::ForecasterSet::load(forecasters), cfg, out);
      for (const auto& [id, v] : built) std::printf("variant %c: %zu subjects, T=%zu\n", id, v.size(), v[0].length());
    } else if (train_cls->parsed()) {
      const auto variant = pipeline::require_cohort(data, "build-variants", data::LoadOptions{{}, data::kChannels});
      const auto result = pipeline::train_classifier(variant, cfg, out);
      std::printf("train-classifier: best epoch %zu, val AUC %.4f -> %s\n", result.best_epoch,
                  result.val_auc[result.best_epoch], out.c_str());
    } else if (matrix->parsed()) {
      const auto variants = pipeline::load_variants(data, cfg.matrix.variants);
      const auto result = pipeline::run_matrix(variants, cfg, out);
      std::printf("variant,mean_auc,std,p_vs_ref\n");
      for (const auto& row : result.summary) {
        std::printf("%c,%.4f,%.4f,%s\n", row.variant, row.mean_auc, row.std_auc,
                    row.p_vs_ref ? std::to_string(*row.p_vs_ref).c_str() : "NA");
      }
    } else if (interp->parsed()) {
      const auto forecaster = forecast::Forecaster::load(ckpt);
      const auto* brainlm = forecaster.brainlm();
      if (!brainlm) throw ConfigError("interpret needs a BrainLM checkpoint; " + ckpt + " holds an LSTM forecaster");
      const auto cohort = pipeline::require_cohort(data, "prep", data::LoadOptions{{}, data::kChannels});
      const auto table = pipeline::interpret(*brainlm, cohort, cfg, out);
      const auto ranking = interpret::rank_sensitivities(table, 5);
      for (const auto* list : {&ranking.cn, &ranking.ad}) {
        std::printf("%s top-5:", list == &ranking.cn ? "CN" : "AD");
        for (const auto& r : *list) {
          std::printf(" %zu(%+.3f%%,%s)", r.channel, r.delta_percent,
                      std::string(interpret::direction_colour(r.direction)).c_str());
        }
        std::printf("\n");
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "icnf: configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "icnf: %s\n", e.what());
    return 1;
  }
  return 0;
}
