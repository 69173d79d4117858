#include "icnf/interpret.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "icnf/error.hpp"

namespace icnf::interpret {

windows::WindowBatch silence_channel(const windows::WindowBatch& batch, std::size_t channel) {
  if (channel >= batch.channels) {
    throw DataError("silence_channel: channel " + std::to_string(channel) + " out of range [0, " +
                    std::to_string(batch.channels) + ")");
  }
  windows::WindowBatch out = batch;
  for (std::size_t pos = channel; pos < out.values.size(); pos += out.channels) out.values[pos] = 0.0;
  return out;
}

double masked_loss(const forecast::BrainLm& model, const windows::WindowBatch& batch, std::size_t eval_batch) {
  if (batch.size() == 0) throw DataError("masked_loss: no windows");
  if (eval_batch == 0) throw ConfigError("masked_loss: eval_batch must be positive");
  const auto& cfg = model.config();
  if (batch.window != cfg.window || batch.channels != cfg.channels) {
    throw ShapeError("masked_loss: windows are [" + std::to_string(batch.window) + " x " +
                     std::to_string(batch.channels) + "], model expects [" + std::to_string(cfg.window) + " x " +
                     std::to_string(cfg.channels) + "]");
  }
  const auto mask = model.default_mask();
  const std::size_t w = cfg.window, c = cfg.channels;
  const auto n_masked = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  const double denom = static_cast<double>(n_masked * c);

  NoGradGuard no_grad;
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < batch.size(); start += eval_batch) {
    idx.resize(std::min(eval_batch, batch.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor x = forecast::windows_tensor(batch, idx);
    const Tensor recon = model.forward(x, mask);
    const auto pred = recon.values();
    const auto target = x.values();
    for (std::size_t n = 0; n < idx.size(); ++n) {
      double sse = 0.0;
      for (std::size_t t = 0; t < w; ++t) {
        if (!mask[t]) continue;
        const std::size_t base = (n * w + t) * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double e = pred[base + ch] - target[base + ch];
          sse += e * e;
        }
      }
      total += sse / denom;
    }
  }
  return total / static_cast<double>(batch.size());
}

ClassSensitivity class_sensitivity(const forecast::BrainLm& model, const data::Cohort& cohort, data::Label label,
                                   std::size_t threads, std::size_t eval_batch) {
  const data::Cohort members = cohort.subset(label);
  if (members.size() == 0) {
    throw DataError("class_sensitivity: no " + std::string(data::label_name(label)) + " subjects in cohort");
  }
  const auto& cfg = model.config();
  const windows::WindowBatch batch = windows::slide(members, cfg.window, windows::kStep, cfg.window - cfg.window / cfg.mask_denominator);
  if (batch.size() == 0) {
    throw DataError("class_sensitivity: " + std::string(data::label_name(label)) + " records are shorter than one window");
  }

  ClassSensitivity out;
  out.label = label;
  out.windows = batch.size();
  out.baseline_loss = masked_loss(model, batch, eval_batch);
  out.perturbed_loss.assign(batch.channels, 0.0);
  out.delta_percent.assign(batch.channels, 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t ch = next++; ch < batch.channels; ch = next++) {
      out.perturbed_loss[ch] = masked_loss(model, silence_channel(batch, ch), eval_batch);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, batch.channels); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t ch = 0; ch < batch.channels; ++ch) {
    out.delta_percent[ch] = out.perturbed_loss[ch] == out.baseline_loss
                                ? 0.0
                                : 100.0 * (out.perturbed_loss[ch] - out.baseline_loss) / out.baseline_loss;
  }
  return out;
}

SensitivityTable sensitivity_table(const forecast::BrainLm& model, const data::Cohort& cohort, std::size_t threads,
                                   std::size_t eval_batch) {
  return {class_sensitivity(model, cohort, data::Label::kCN, threads, eval_batch),
          class_sensitivity(model, cohort, data::Label::kAD, threads, eval_batch)};
}

std::string_view direction_colour(Direction d) {
  switch (d) {
    case Direction::kAdAboveCn: return "red";
    case Direction::kCnAboveAd: return "blue";
    case Direction::kEqual: break;
  }
  return "none";
}

std::vector<std::size_t> rank_order(const std::vector<double>& deltas) {
  std::vector<std::size_t> order(deltas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return deltas[a] > deltas[b]; });
  return order;
}

Ranking rank_sensitivities(const SensitivityTable& table, std::size_t top_k) {
  const auto& cn = table.cn.delta_percent;
  const auto& ad = table.ad.delta_percent;
  if (cn.size() != ad.size()) throw DataError("rank_sensitivities: class tables differ in channel count");
  auto direction = [&](std::size_t ch) {
    if (ad[ch] > cn[ch]) return Direction::kAdAboveCn;
    if (cn[ch] > ad[ch]) return Direction::kCnAboveAd;
    return Direction::kEqual;
  };
  auto ranked = [&](const std::vector<double>& deltas) {
    const auto order = rank_order(deltas);
    std::vector<RankedChannel> out;
    for (std::size_t r = 0; r < std::min(top_k, order.size()); ++r) {
      out.push_back({order[r], deltas[order[r]], r + 1, direction(order[r])});
    }
    return out;
  };
  return {ranked(cn), ranked(ad)};
}

void write_sensitivity_csv(const std::filesystem::path& path, const SensitivityTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "class,channel_index,domain,delta_percent,rank\n";
  char buf[40];
  for (const ClassSensitivity* cls : {&table.cn, &table.ad}) {
    const auto order = rank_order(cls->delta_percent);
    std::vector<std::size_t> rank(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
    for (std::size_t ch = 0; ch < cls->delta_percent.size(); ++ch) {
      std::snprintf(buf, sizeof(buf), "%.17g", cls->delta_percent[ch]);
      out << data::label_name(cls->label) << ',' << ch << ','
          << (ch < data::kChannels ? data::domain_name(data::channel_meta(ch).domain) : std::string_view("unknown"))
          << ',' << buf << ',' << rank[ch] << '\n';
    }
  }
}

}  // namespace icnf::interpret
