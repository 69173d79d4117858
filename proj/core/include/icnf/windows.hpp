#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icnf/data.hpp"

namespace icnf::windows {

inline constexpr std::size_t kWindow = 24;
inline constexpr std::size_t kStep = 4;
inline constexpr std::size_t kContext = 20;
inline constexpr std::size_t kTarget = 4;

/// First `target_len` timestamps of the record.
data::IcnRecord truncate(const data::IcnRecord& record, std::size_t target_len = data::kRegularLength);

/// Extends the record by appending its own first `target_len - T` timestamps.
/// Requires T <= target_len <= 2T.
data::IcnRecord replicate(const data::IcnRecord& record, std::size_t target_len = data::kExtendedLength);

data::Cohort truncate(const data::Cohort& cohort, std::size_t target_len = data::kRegularLength);
data::Cohort replicate(const data::Cohort& cohort, std::size_t target_len = data::kExtendedLength);

/// Number of full windows: floor((T - window) / step) + 1.
std::size_t window_count(std::size_t length, std::size_t window = kWindow, std::size_t step = kStep);

struct WindowSource {
  std::string subject_id;
  data::Label label = data::Label::kCN;
  std::size_t start = 0;
  friend bool operator==(const WindowSource&, const WindowSource&) = default;
};

/// Segmented windows stored time-major as [N][window][channels], the layout the
/// forecasters consume directly.
struct WindowBatch {
  std::size_t window = kWindow;
  std::size_t channels = data::kChannels;
  std::size_t context_len = kContext;
  std::size_t target_len = kTarget;
  std::vector<double> values;
  std::vector<WindowSource> sources;

  std::size_t size() const { return sources.size(); }
  double at(std::size_t n, std::size_t channel, std::size_t t) const {
    return values[(n * window + t) * channels + channel];
  }
  std::span<const double> window_values(std::size_t n) const {
    return std::span<const double>(values).subspan(n * window * channels, window * channels);
  }
  /// Windows at `indices`, in that order.
  WindowBatch select(std::span<const std::size_t> indices) const;
  void append(const WindowBatch& other);
};

/// Sliding-window segmentation; trailing partial windows are dropped.
WindowBatch slide(const data::IcnRecord& record, std::size_t window = kWindow, std::size_t step = kStep,
                  std::size_t context_len = kContext);
WindowBatch slide(const data::Cohort& cohort, std::size_t window = kWindow, std::size_t step = kStep,
                  std::size_t context_len = kContext);

/// Boolean mask over window positions marking the final window/denominator
/// positions. Throws when the window length is not divisible by `denominator`.
std::vector<bool> mask_tail(std::size_t window = kWindow, std::size_t denominator = 6);

struct MaskedBatch {
  WindowBatch batch;
  std::vector<bool> mask;
};
MaskedBatch mask_tail(WindowBatch batch, std::size_t denominator);

/// Seeded split of windows into (train, validation). With `by_subject`, all
/// windows of a subject land on the same side.
std::pair<WindowBatch, WindowBatch> split_windows(const WindowBatch& batch, double train_fraction,
                                                  std::uint64_t seed, bool by_subject = false);

}  // namespace icnf::windows
