#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "icnf/adam.hpp"
#include "icnf/data.hpp"
#include "icnf/params.hpp"

namespace icnf::classify {

/// How attention over time becomes a logit.
///   kContext: c = sum_t alpha_t h_t, logit = head(c)        (head: hidden -> 1)
///   kLiteral: logit = head(alpha)                           (head: T -> 1)
enum class AttentionMode { kContext = 0, kLiteral = 1 };
std::string_view attention_mode_name(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view text);

struct TaLstmConfig {
  std::size_t channels = data::kChannels;
  std::size_t hidden = 64;
  std::size_t layers = 3;
  AttentionMode attention = AttentionMode::kContext;
  /// Series length; only used (and required) by the literal attention head.
  std::size_t literal_length = 0;
  double forget_bias = 1.0;
};

struct ClassifierOutput {
  Tensor logits;     // [B]
  Tensor attention;  // [B, T], rows on the simplex
  std::vector<double> probability;  // sigmoid(logits)
};

/// Stacked LSTM followed by scaled dot-product time attention with a learned
/// query: s_t = (q . h_t) / sqrt(hidden), alpha = softmax(s).
class TaLstm {
 public:
  TaLstm(const TaLstmConfig& config, std::uint64_t seed);
  explicit TaLstm(ParamStore params);

  const TaLstmConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  TaLstm clone() const { return TaLstm(params_.clone()); }

  /// series [B, T, C] -> logits, attention, probabilities.
  ClassifierOutput forward(const Tensor& series) const;

 private:
  TaLstmConfig config_;
  ParamStore params_;
};

/// Stacks records at `indices` into [B, T, C]; all records must share T.
Tensor series_tensor(const data::Cohort& cohort, std::span<const std::size_t> indices);

/// AD probabilities for every record, in cohort order.
std::vector<double> predict(const TaLstm& model, const data::Cohort& cohort, std::size_t eval_batch = 64);

struct ClassifierTrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 800;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  std::size_t eval_batch_size = 64;
};

struct ClassifierTrainResult {
  TaLstm best;                      // checkpoint with the highest validation AUC
  std::size_t best_epoch = 0;       // 0-based epoch that produced `best`
  std::vector<double> train_loss;   // per epoch, mean binary cross-entropy
  std::vector<double> val_auc;      // per epoch
};

/// Adam / binary cross-entropy training. Throws before any compute when the
/// train or validation split lacks one of the classes.
ClassifierTrainResult train_classifier(const TaLstm& init, const data::Cohort& train, const data::Cohort& val,
                                       const ClassifierTrainConfig& config);

void write_metrics_csv(const std::filesystem::path& path, const ClassifierTrainResult& result);

}  // namespace icnf::classify
