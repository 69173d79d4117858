#include "icnf/windows.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "icnf/error.hpp"
#include "icnf/rng.hpp"

namespace icnf::windows {

using data::Cohort;
using data::IcnRecord;
using data::Series;

IcnRecord truncate(const IcnRecord& record, std::size_t target_len) {
  const std::size_t t = record.length();
  if (t < target_len) {
    throw DataError("truncate: subject " + record.subject_id + " has T=" + std::to_string(t) +
                    " < target " + std::to_string(target_len));
  }
  Series out(record.series.channels(), target_len);
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto src = record.series.channel(c);
    std::copy_n(src.begin(), target_len, out.channel(c).begin());
  }
  return {record.subject_id, record.label, std::move(out)};
}

IcnRecord replicate(const IcnRecord& record, std::size_t target_len) {
  const std::size_t t = record.length();
  if (target_len < t) {
    throw DataError("replicate: subject " + record.subject_id + " has T=" + std::to_string(t) +
                    " > target " + std::to_string(target_len));
  }
  if (target_len > 2 * t) {
    throw DataError("replicate: target " + std::to_string(target_len) + " exceeds 2T=" + std::to_string(2 * t) +
                    " for subject " + record.subject_id + "; single-pass replication is insufficient");
  }
  Series out(record.series.channels(), target_len);
  for (std::size_t c = 0; c < out.channels(); ++c) {
    auto src = record.series.channel(c);
    auto dst = out.channel(c);
    std::copy(src.begin(), src.end(), dst.begin());
    std::copy_n(src.begin(), target_len - t, dst.begin() + static_cast<long>(t));
  }
  return {record.subject_id, record.label, std::move(out)};
}

Cohort truncate(const Cohort& cohort, std::size_t target_len) {
  std::vector<IcnRecord> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort.records()) out.push_back(truncate(r, target_len));
  return Cohort(std::move(out), cohort.channels());
}

Cohort replicate(const Cohort& cohort, std::size_t target_len) {
  std::vector<IcnRecord> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort.records()) out.push_back(replicate(r, target_len));
  return Cohort(std::move(out), cohort.channels());
}

std::size_t window_count(std::size_t length, std::size_t window, std::size_t step) {
  if (window == 0 || step == 0) throw DataError("window and step must be positive");
  if (length < window) return 0;
  return (length - window) / step + 1;
}

WindowBatch WindowBatch::select(std::span<const std::size_t> indices) const {
  WindowBatch out;
  out.window = window;
  out.channels = channels;
  out.context_len = context_len;
  out.target_len = target_len;
  const std::size_t stride = window * channels;
  out.values.reserve(indices.size() * stride);
  out.sources.reserve(indices.size());
  for (std::size_t i : indices) {
    auto w = window_values(i);
    out.values.insert(out.values.end(), w.begin(), w.end());
    out.sources.push_back(sources.at(i));
  }
  return out;
}

void WindowBatch::append(const WindowBatch& other) {
  if (other.size() == 0) return;
  if (size() == 0 && values.empty()) {
    *this = other;
    return;
  }
  if (other.window != window || other.channels != channels || other.context_len != context_len) {
    throw DataError("cannot append window batches with different geometry");
  }
  values.insert(values.end(), other.values.begin(), other.values.end());
  sources.insert(sources.end(), other.sources.begin(), other.sources.end());
}

WindowBatch slide(const IcnRecord& record, std::size_t window, std::size_t step, std::size_t context_len) {
  const std::size_t t = record.length();
  if (t < window) {
    throw DataError("slide: subject " + record.subject_id + " has T=" + std::to_string(t) +
                    " < window " + std::to_string(window));
  }
  if (context_len > window) throw DataError("slide: context length exceeds window");
  WindowBatch batch;
  batch.window = window;
  batch.channels = record.series.channels();
  batch.context_len = context_len;
  batch.target_len = window - context_len;
  const std::size_t n = window_count(t, window, step);
  batch.values.resize(n * window * batch.channels);
  batch.sources.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = i * step;
    for (std::size_t k = 0; k < window; ++k) {
      double* row = batch.values.data() + (i * window + k) * batch.channels;
      for (std::size_t c = 0; c < batch.channels; ++c) row[c] = record.series.at(c, start + k);
    }
    batch.sources.push_back({record.subject_id, record.label, start});
  }
  return batch;
}

WindowBatch slide(const Cohort& cohort, std::size_t window, std::size_t step, std::size_t context_len) {
  WindowBatch all;
  all.window = window;
  all.channels = cohort.channels();
  all.context_len = context_len;
  all.target_len = window - context_len;
  for (const auto& r : cohort.records()) all.append(slide(r, window, step, context_len));
  return all;
}

std::vector<bool> mask_tail(std::size_t window, std::size_t denominator) {
  if (denominator == 0 || window == 0 || window % denominator != 0) {
    throw DataError("mask_tail: window length " + std::to_string(window) + " is not divisible by " +
                    std::to_string(denominator));
  }
  std::vector<bool> mask(window, false);
  std::fill(mask.end() - static_cast<long>(window / denominator), mask.end(), true);
  return mask;
}

MaskedBatch mask_tail(WindowBatch batch, std::size_t denominator) {
  auto mask = mask_tail(batch.window, denominator);
  return {std::move(batch), std::move(mask)};
}

std::pair<WindowBatch, WindowBatch> split_windows(const WindowBatch& batch, double train_fraction,
                                                  std::uint64_t seed, bool by_subject) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  if (batch.size() < 2) throw DataError("split_windows: need at least 2 windows");
  Rng rng(derive_seed(seed, "windows/split"));
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  if (by_subject) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < batch.size(); ++i) groups[batch.sources[i].subject_id].push_back(i);
    if (groups.size() < 2) throw DataError("split_windows: subject-level split needs at least 2 subjects");
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [id, idx] : groups) order.push_back(&idx);
    std::shuffle(order.begin(), order.end(), rng.engine());
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(order.size()) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
    for (std::size_t g = 0; g < order.size(); ++g) {
      auto& side = g < n_train ? train : val;
      side.insert(side.end(), order[g]->begin(), order[g]->end());
    }
  } else {
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(order.size()) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
    train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    val.assign(order.begin() + static_cast<long>(n_train), order.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {batch.select(train), batch.select(val)};
}

}  // namespace icnf::windows
