#include "icnf/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "icnf/error.hpp"
#include "icnf/metrics.hpp"
#include "icnf/nn.hpp"
#include "icnf/rng.hpp"

namespace icnf::classify {

namespace {

std::string layer_name(std::size_t l) { return "lstm" + std::to_string(l); }

std::vector<int> binary_labels(const data::Cohort& cohort) {
  std::vector<int> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort.records()) out.push_back(r.label == data::Label::kAD ? 1 : 0);
  return out;
}

void require_both_classes(const data::Cohort& cohort, const char* split) {
  if (cohort.count(data::Label::kCN) == 0 || cohort.count(data::Label::kAD) == 0) {
    throw DataError(std::string("train_classifier: ") + split + " split has a single class (" +
                    std::to_string(cohort.count(data::Label::kCN)) + " CN, " +
                    std::to_string(cohort.count(data::Label::kAD)) + " AD)");
  }
}

}  // namespace

std::string_view attention_mode_name(AttentionMode mode) {
  return mode == AttentionMode::kLiteral ? "literal" : "context";
}

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "context") return AttentionMode::kContext;
  if (text == "literal") return AttentionMode::kLiteral;
  throw ConfigError("unknown attention mode '" + std::string(text) + "'; expected context or literal");
}

TaLstm::TaLstm(const TaLstmConfig& config, std::uint64_t seed) : config_(config) {
  if (config.channels == 0 || config.hidden == 0 || config.layers == 0) {
    throw ConfigError("ta-lstm dimensions must be positive");
  }
  if (config.attention == AttentionMode::kLiteral && config.literal_length == 0) {
    throw ConfigError("ta-lstm: literal attention head needs the series length");
  }
  Rng rng(derive_seed(seed, "classify/init"));
  for (std::size_t l = 0; l < config.layers; ++l) {
    nn::add_lstm(params_, layer_name(l), l == 0 ? config.channels : config.hidden, config.hidden, rng,
                 config.forget_bias);
  }
  params_.add_uniform("attn.query", {config.hidden, 1}, config.hidden, rng);
  const std::size_t head_in = config.attention == AttentionMode::kContext ? config.hidden : config.literal_length;
  nn::add_linear(params_, "head", head_in, 1, rng);
  params_.set_meta("channels", static_cast<double>(config.channels));
  params_.set_meta("hidden", static_cast<double>(config.hidden));
  params_.set_meta("layers", static_cast<double>(config.layers));
  params_.set_meta("attention", static_cast<double>(config.attention));
  params_.set_meta("literal_length", static_cast<double>(config.literal_length));
}

TaLstm::TaLstm(ParamStore params) : params_(std::move(params)) {
  config_.channels = static_cast<std::size_t>(params_.meta("channels"));
  config_.hidden = static_cast<std::size_t>(params_.meta("hidden"));
  config_.layers = static_cast<std::size_t>(params_.meta("layers"));
  config_.attention = static_cast<AttentionMode>(static_cast<int>(params_.meta("attention")));
  config_.literal_length = static_cast<std::size_t>(params_.meta("literal_length"));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const auto lstm = nn::lstm_weights(params_, layer_name(l));
    const std::size_t in = l == 0 ? config_.channels : config_.hidden;
    if (lstm.hidden != config_.hidden || lstm.w_x.shape() != Shape{in, 4 * config_.hidden}) {
      throw FormatError("ta-lstm checkpoint: layer " + std::to_string(l) + " has unexpected shape");
    }
  }
  if (params_.at("attn.query").shape() != Shape{config_.hidden, 1}) {
    throw FormatError("ta-lstm checkpoint: attention query has unexpected shape");
  }
}

ClassifierOutput TaLstm::forward(const Tensor& series) const {
  if (series.rank() != 3) throw ShapeError("ta_lstm_forward: expected [B, T, C], got " + shape_string(series.shape()));
  if (series.dim(2) != config_.channels) {
    throw DataError("ta_lstm_forward: series has " + std::to_string(series.dim(2)) + " channels, expected " +
                    std::to_string(config_.channels));
  }
  const std::size_t b = series.dim(0), t = series.dim(1), h = config_.hidden;
  if (t == 0) throw DataError("ta_lstm_forward: empty series");
  if (config_.attention == AttentionMode::kLiteral && t != config_.literal_length) {
    throw DataError("ta_lstm_forward: literal attention head expects T=" + std::to_string(config_.literal_length) +
                    ", got " + std::to_string(t));
  }

  std::vector<Tensor> steps = nn::unstack_time(series);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    steps = nn::run_lstm(nn::lstm_weights(params_, layer_name(l)), steps);
  }
  std::vector<Tensor> rows;
  rows.reserve(t);
  for (const Tensor& step : steps) rows.push_back(reshape(step, {b, 1, h}));
  const Tensor hidden = rows.size() == 1 ? rows.front() : concat(rows, 1);  // [B, T, h]

  const Tensor scores =
      scale(reshape(matmul(hidden, params_.at("attn.query")), {b, t}), 1.0 / std::sqrt(static_cast<double>(h)));
  const Tensor alpha = softmax(scores, 1);
  const nn::Linear head = nn::linear_weights(params_, "head");
  Tensor logits;
  if (config_.attention == AttentionMode::kContext) {
    const Tensor context = reshape(matmul(reshape(alpha, {b, 1, t}), hidden), {b, h});
    logits = reshape(nn::apply(head, context), {b});
  } else {
    logits = reshape(nn::apply(head, alpha), {b});
  }

  ClassifierOutput out{logits, alpha, {}};
  out.probability.reserve(b);
  for (double z : logits.values()) out.probability.push_back(1.0 / (1.0 + std::exp(-z)));
  return out;
}

Tensor series_tensor(const data::Cohort& cohort, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("series_tensor: no records selected");
  const std::size_t t = cohort[indices[0]].length();
  const std::size_t c = cohort.channels();
  std::vector<double> values(indices.size() * t * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& r = cohort[indices[i]];
    if (r.length() != t) {
      throw DataError("series_tensor: subject " + r.subject_id + " has T=" + std::to_string(r.length()) +
                      ", batch expects " + std::to_string(t));
    }
    double* dst = values.data() + i * t * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      auto src = r.series.channel(ch);
      for (std::size_t k = 0; k < t; ++k) dst[k * c + ch] = src[k];
    }
  }
  return Tensor({indices.size(), t, c}, std::move(values));
}

std::vector<double> predict(const TaLstm& model, const data::Cohort& cohort, std::size_t eval_batch) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(cohort.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < cohort.size(); start += eval_batch) {
    idx.resize(std::min(eval_batch, cohort.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto result = model.forward(series_tensor(cohort, idx));
    out.insert(out.end(), result.probability.begin(), result.probability.end());
  }
  return out;
}

ClassifierTrainResult train_classifier(const TaLstm& init, const data::Cohort& train, const data::Cohort& val,
                                       const ClassifierTrainConfig& config) {
  require_both_classes(train, "train");
  require_both_classes(val, "validation");
  if (config.epochs == 0) throw ConfigError("classifier epochs must be >= 1");
  if (config.batch_size == 0) throw ConfigError("classifier batch_size must be positive");

  TaLstm model = init.clone();
  ClassifierTrainResult result{init.clone(), 0, {}, {}};
  AdamState state = make_adam_state(model.params(), config.adam);
  Rng shuffle(derive_seed(config.seed, "classify/train/shuffle"));
  const auto val_labels = binary_labels(val);
  std::vector<double> targets_all;
  for (const auto& r : train.records()) targets_all.push_back(data::label_value(r.label));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best_auc = -1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<double> targets;
      targets.reserve(idx.size());
      for (std::size_t i : idx) targets.push_back(targets_all[i]);
      model.params().zero_grad();
      const auto out = model.forward(series_tensor(train, idx));
      const Tensor loss = bce_with_logits(out.logits, Tensor({idx.size()}, std::move(targets)));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("classifier loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      backward(loss);
      adam_step(model.params(), state);
      total += value * static_cast<double>(idx.size());
    }
    result.train_loss.push_back(total / static_cast<double>(order.size()));
    const double val_auc = metrics::auc(predict(model, val, config.eval_batch_size), val_labels);
    result.val_auc.push_back(val_auc);
    if (val_auc > best_auc) {
      best_auc = val_auc;
      result.best = model.clone();
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const ClassifierTrainResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,val_auc,best\n";
  char line[128];
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%d\n", e, result.train_loss[e], result.val_auc[e],
                  e == result.best_epoch ? 1 : 0);
    out << line;
  }
}

}  // namespace icnf::classify
