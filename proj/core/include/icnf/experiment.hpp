#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icnf/classify.hpp"
#include "icnf/data.hpp"
#include "icnf/forecast.hpp"

namespace icnf::experiment {

// ---- dataset variants ------------------------------------------------------

struct VariantSpec {
  char id;
  std::string_view construction;
  std::size_t length;  // expected T of every record
  bool replicated;     // built on the replicated (194) series instead of the truncated (137) one
  std::optional<forecast::ForecasterKind> forecaster;
};

const std::array<VariantSpec, 6>& variant_specs();
const VariantSpec& variant_spec(char id);

/// The four forecasters the augmented variants need: {LSTM, BrainLM} trained on
/// truncated (baseline) or replicated windows.
struct ForecasterSet {
  std::optional<forecast::Forecaster> lstm_baseline;
  std::optional<forecast::Forecaster> brainlm_baseline;
  std::optional<forecast::Forecaster> lstm_replicated;
  std::optional<forecast::Forecaster> brainlm_replicated;

  const std::optional<forecast::Forecaster>& get(forecast::ForecasterKind kind, bool replicated) const;
  std::optional<forecast::Forecaster>& get(forecast::ForecasterKind kind, bool replicated);

  /// Loads whichever of the four checkpoints exist under `dir`.
  static ForecasterSet load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

/// "lstm_baseline.ckpt", "brainlm_replicated.ckpt", ...
std::string forecaster_filename(forecast::ForecasterKind kind, bool replicated);

/// Source series the forecasters of a family are trained on: truncate(137) or replicate(194).
data::Cohort base_series(const data::Cohort& cohort, bool replicated);

/// Builds variant `id` from a (z-scored) mixed-length cohort. Throws when the
/// needed checkpoint is missing or any record misses the declared length.
data::Cohort build_variant(const data::Cohort& cohort, char id, const ForecasterSet& forecasters,
                           std::uint64_t seed);

// ---- splits ----------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;  // indices into the label vector, ascending
  std::vector<std::size_t> test;
};

/// Per-class seeded holdout with round-half-up counts: test gets
/// floor(n_c * fraction + 0.5) members of class c.
Split stratified_split(std::span<const data::Label> labels, double test_fraction, std::uint64_t seed);

/// k stratified folds over `labels`; fold f's `test` is its validation part.
/// Members of each class are shuffled and dealt round-robin, so per-class fold
/// sizes differ by at most one.
std::vector<Split> kfold(std::span<const data::Label> labels, std::size_t k, std::uint64_t seed);

// ---- cross-validation matrix -----------------------------------------------

enum class SignificanceTest { kPairedT, kWilcoxon };
std::string_view test_name(SignificanceTest test);
SignificanceTest parse_test(std::string_view text);

struct MatrixConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string variants = "abcdef";
  double test_fraction = 0.10;
  std::size_t folds = 5;
  char reference = 'd';
  SignificanceTest test = SignificanceTest::kPairedT;
  classify::TaLstmConfig model{};
  classify::ClassifierTrainConfig train{};
  std::size_t threads = 1;
  bool save_checkpoints = true;
  /// Written into run_manifest.json; a resumed run must carry the same hash.
  std::string config_hash;
};

struct CellResult {
  char variant = 'a';
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  double auc = 0.0;
  std::size_t best_epoch = 0;
  friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct SummaryRow {
  char variant = 'a';
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample standard deviation
  std::optional<double> p_vs_ref;  // empty for the reference or an undefined test
  std::size_t n = 0;
};

struct MatrixResult {
  std::vector<CellResult> cells;  // ordered by variant, seed, fold
  std::vector<SummaryRow> summary;
};

/// One cell: split by `seed`, train on fold `fold`, select on its validation
/// part, score the held-out test set.
CellResult run_cell(const data::Cohort& variant, char id, std::uint64_t seed, std::size_t fold,
                    const MatrixConfig& config, std::optional<classify::TaLstm>* best_out = nullptr);

std::vector<SummaryRow> summarize(std::span<const CellResult> cells, const MatrixConfig& config);

/// Runs every (variant, seed, fold) cell on a work queue of `config.threads`
/// workers and writes under `run_dir`:
///   manifest.csv        variant,seed,fold,auc
///   summary.csv         variant,mean_auc,std,p_vs_ref
///   run_manifest.json   config hash, seeds, variants, status, checkpoint paths
///   timing.csv          wall time per cell (the only nondeterministic output)
///   checkpoints/        best classifier per cell
/// Finished cells are appended to cells.partial.csv as they complete, so an
/// interrupted run with the same config hash resumes where it stopped.
MatrixResult run_matrix(const std::map<char, data::Cohort>& variants, const MatrixConfig& config,
                        const std::filesystem::path& run_dir);

void write_manifest_csv(const std::filesystem::path& path, std::span<const CellResult> cells);
std::vector<CellResult> read_manifest_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows);

}  // namespace icnf::experiment
