#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

#include "icnf/data.hpp"
#include "icnf/forecast.hpp"
#include "icnf/windows.hpp"

namespace icnf::interpret {

/// Copy of `batch` with channel `channel` zeroed at every position of every window.
windows::WindowBatch silence_channel(const windows::WindowBatch& batch, std::size_t channel);

/// Mean over windows of the per-window masked-position MSE. Windows are
/// evaluated `eval_batch` at a time; the result does not depend on that size
/// beyond floating-point summation order.
double masked_loss(const forecast::BrainLm& model, const windows::WindowBatch& batch, std::size_t eval_batch = 256);

struct ClassSensitivity {
  data::Label label = data::Label::kCN;
  std::size_t windows = 0;
  double baseline_loss = 0.0;
  std::vector<double> perturbed_loss;  // per channel
  std::vector<double> delta_percent;   // 100 * (L(i) - L) / L
};

/// Sliding windows of all records of `label` in `cohort`, evaluated with and
/// without each channel silenced. Channels are spread over `threads` workers.
ClassSensitivity class_sensitivity(const forecast::BrainLm& model, const data::Cohort& cohort, data::Label label,
                                   std::size_t threads = 1, std::size_t eval_batch = 256);

struct SensitivityTable {
  ClassSensitivity cn;
  ClassSensitivity ad;
  const ClassSensitivity& operator[](data::Label label) const { return label == data::Label::kAD ? ad : cn; }
};

SensitivityTable sensitivity_table(const forecast::BrainLm& model, const data::Cohort& cohort,
                                   std::size_t threads = 1, std::size_t eval_batch = 256);

enum class Direction { kAdAboveCn, kCnAboveAd, kEqual };
/// "red" when the AD delta exceeds CN, "blue" when CN exceeds AD, "none" when equal.
std::string_view direction_colour(Direction d);

struct RankedChannel {
  std::size_t channel = 0;
  double delta_percent = 0.0;
  std::size_t rank = 0;  // 1-based
  Direction direction = Direction::kEqual;
};

struct Ranking {
  std::vector<RankedChannel> cn;  // top_k, descending delta, ties by ascending channel
  std::vector<RankedChannel> ad;
};

/// Full per-class order, descending by delta. Ties keep ascending channel order.
std::vector<std::size_t> rank_order(const std::vector<double>& deltas);

Ranking rank_sensitivities(const SensitivityTable& table, std::size_t top_k = 5);

/// class,channel_index,domain,delta_percent,rank — one row per (class, channel).
void write_sensitivity_csv(const std::filesystem::path& path, const SensitivityTable& table);

}  // namespace icnf::interpret
