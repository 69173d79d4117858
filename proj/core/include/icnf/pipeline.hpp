#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "icnf/config.hpp"
#include "icnf/experiment.hpp"
#include "icnf/interpret.hpp"

// Stage drivers shared by the `icnf` executable and the end-to-end tests. Each
// stage reads its inputs from disk, writes its outputs plus a stage.json
// manifest (config hash and FNV-1a hashes of every output) into its directory.
namespace icnf::pipeline {

namespace fs = std::filesystem;

/// 16 hex digits of FNV-1a over the file bytes.
std::string file_hash(const fs::path& path);

void write_stage_manifest(const fs::path& dir, std::string_view stage, const config::RunConfig& config,
                          const std::vector<fs::path>& outputs);

/// Loads a cohort directory or throws naming the subcommand that produces it.
data::Cohort require_cohort(const fs::path& dir, std::string_view producer, const data::LoadOptions& options = {});

/// synth: seeded synthetic cohort (raw, not normalized).
data::Cohort synth(const config::RunConfig& config, const fs::path& out);

/// prep: per-subject, per-channel z-scoring.
data::Cohort prep(const data::Cohort& raw, const config::RunConfig& config, const fs::path& out);

struct ForecasterJob {
  forecast::ForecasterKind kind;
  bool replicated;
};
std::vector<ForecasterJob> all_forecaster_jobs();

struct ForecasterReport {
  ForecasterJob job;
  double val_mse = 0.0;
  double hold_baseline_mse = 0.0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

/// train-forecaster: trains each job on the sliding windows of
/// truncate(137) / replicate(194) of the prepped cohort. Writes
/// <kind>_<family>.ckpt, <kind>_<family>.metrics.csv and forecasters.csv.
std::vector<ForecasterReport> train_forecasters(const data::Cohort& prepped, const config::RunConfig& config,
                                                const std::vector<ForecasterJob>& jobs, const fs::path& out);

forecast::Forecaster make_forecaster(forecast::ForecasterKind kind, const config::RunConfig& config,
                                     std::uint64_t seed);

/// extend: appends horizon() forecast steps to every record.
data::Cohort extend(const data::Cohort& cohort, const forecast::Forecaster& model, const config::RunConfig& config,
                    const fs::path& out);

/// build-variants: writes <out>/variant_<id>/ cohorts for every selected variant.
std::map<char, data::Cohort> build_variants(const data::Cohort& prepped, const experiment::ForecasterSet& forecasters,
                                            const config::RunConfig& config, const fs::path& out);
std::map<char, data::Cohort> load_variants(const fs::path& dir, std::string_view ids);
fs::path variant_dir(const fs::path& root, char id);

/// train-classifier: one TA-LSTM on a variant directory using the first
/// seed's holdout split and fold 0; writes the checkpoint and metrics CSV.
classify::ClassifierTrainResult train_classifier(const data::Cohort& variant, const config::RunConfig& config,
                                                 const fs::path& ckpt);

experiment::MatrixResult run_matrix(const std::map<char, data::Cohort>& variants, const config::RunConfig& config,
                                    const fs::path& out);

interpret::SensitivityTable interpret(const forecast::BrainLm& model, const data::Cohort& cohort,
                                      const config::RunConfig& config, const fs::path& csv);

}  // namespace icnf::pipeline
