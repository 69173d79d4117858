#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "icnf/classify.hpp"
#include "icnf/data.hpp"
#include "icnf/experiment.hpp"
#include "icnf/forecast.hpp"

namespace icnf::config {

/// Every tunable of the pipeline. Defaults are the full protocol constants
/// (window 24 / step 4, batch 32, 500 forecaster and 800 classifier epochs,
/// 5 seeds x 5 folds); configs/desk.ini scales them down.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;  // synthesis, forecaster training, extension placeholders
  std::size_t threads = 1;

  // [paths] (command-line flags take precedence)
  std::string data_dir;
  std::string out_dir;

  // [synth]
  data::SynthOptions synth{};

  // [windows]
  std::size_t window = windows::kWindow;
  std::size_t step = windows::kStep;
  std::size_t mask_denominator = 6;

  // [forecast], [lstm], [brainlm]
  forecast::ForecastTrainConfig forecast_train{};
  forecast::LstmForecasterConfig lstm{};
  forecast::BrainLmConfig brainlm{};

  // [classify]
  classify::TaLstmConfig classifier{};
  classify::ClassifierTrainConfig classify_train{};

  // [experiment]
  experiment::MatrixConfig matrix{};

  // [interpret]
  std::size_t interpret_eval_batch = 256;

  std::size_t context() const { return window - window / mask_denominator; }
  std::size_t horizon() const { return window / mask_denominator; }
};

/// Parses INI text. Unknown sections/keys and malformed or out-of-range values
/// throw ConfigError naming `section.key`. The result is validated.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError on inconsistent settings.
void validate(const RunConfig& config);
/// Propagates the shared [run]/[windows] settings into the per-module structs
/// and validates. Call after changing fields programmatically.
void finalize(RunConfig& config);

/// Canonical "section.key=value" listing of every field, in a fixed order.
std::string canonical_text(const RunConfig& config);
/// 16 hex digits of FNV-1a over canonical_text.
std::string config_hash(const RunConfig& config);

}  // namespace icnf::config
