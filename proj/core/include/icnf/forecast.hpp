#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "icnf/adam.hpp"
#include "icnf/data.hpp"
#include "icnf/nn.hpp"
#include "icnf/params.hpp"
#include "icnf/windows.hpp"

namespace icnf::forecast {

enum class ForecasterKind { kLstm = 1, kBrainLm = 2 };
std::string_view kind_name(ForecasterKind kind);
ForecasterKind parse_kind(std::string_view text);

struct LstmForecasterConfig {
  std::size_t channels = data::kChannels;
  std::size_t hidden = 50;
  std::size_t context = windows::kContext;
  std::size_t horizon = windows::kTarget;
  double forget_bias = 1.0;
};

/// Single-layer stateless LSTM whose final hidden state feeds a linear head
/// emitting `horizon` steps for every channel at once.
class LstmForecaster {
 public:
  LstmForecaster(const LstmForecasterConfig& config, std::uint64_t seed);
  /// Rebuilds from checkpoint entries; validates every shape.
  explicit LstmForecaster(ParamStore params);

  const LstmForecasterConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  /// context [B, context, C] -> prediction [B, horizon, C]
  Tensor forward(const Tensor& context) const;

 private:
  LstmForecasterConfig config_;
  ParamStore params_;
};

struct BrainLmConfig {
  std::size_t channels = data::kChannels;
  std::size_t window = windows::kWindow;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ff = 256;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t mask_denominator = 6;
  /// Reconstruction loss restricted to masked positions (default) or the full window.
  bool masked_loss = true;
};

/// Masked-reconstruction encoder-decoder transformer over time points. Each
/// time point is one token (a linear embedding of all channels); masked points
/// are replaced by a learned mask token before the encoder, and the decoder
/// cross-attends to the encoder output to reconstruct every position.
class BrainLm {
 public:
  BrainLm(const BrainLmConfig& config, std::uint64_t seed);
  explicit BrainLm(ParamStore params);

  const BrainLmConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  std::vector<bool> default_mask() const;

  /// window [B, W, C] -> reconstruction [B, W, C]. Values at masked positions
  /// never enter the computation.
  Tensor forward(const Tensor& window, const std::vector<bool>& mask, nn::AttentionTrace* trace = nullptr) const;
  /// Training objective for one batch of windows.
  Tensor loss(const Tensor& window, const std::vector<bool>& mask) const;

 private:
  BrainLmConfig config_;
  ParamStore params_;
};

/// Gathers the masked positions of x [B, W, C] into [B, n_masked, C].
Tensor masked_positions(const Tensor& x, const std::vector<bool>& mask);

/// Either forecaster behind one interface.
class Forecaster {
 public:
  Forecaster(LstmForecaster model) : model_(std::move(model)) {}
  Forecaster(BrainLm model) : model_(std::move(model)) {}
  static Forecaster from_checkpoint(ParamStore params);
  static Forecaster load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// Deep copy; copies of a Forecaster otherwise share parameter storage.
  Forecaster clone() const { return from_checkpoint(params().clone()); }

  ForecasterKind kind() const;
  const ParamStore& params() const;
  ParamStore& params();
  std::size_t channels() const;
  std::size_t context() const;  // observed timestamps consumed
  std::size_t horizon() const;  // timestamps produced

  /// Training loss on full windows [B, context + horizon, C].
  Tensor loss(const Tensor& windows) const;
  /// Forecast [B, horizon, C] for full windows whose tail is unknown. For the
  /// LSTM only the first `context` steps are read; for BrainLM the tail is
  /// masked, so its values are irrelevant.
  Tensor predict(const Tensor& windows) const;

  const LstmForecaster* lstm() const { return std::get_if<LstmForecaster>(&model_); }
  const BrainLm* brainlm() const { return std::get_if<BrainLm>(&model_); }

 private:
  std::variant<LstmForecaster, BrainLm> model_;
};

struct ForecastTrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 500;
  double train_fraction = 0.8;
  bool split_by_subject = false;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  std::size_t eval_batch_size = 256;
};

struct ForecastTrainResult {
  Forecaster model;
  std::vector<double> train_loss;  // per epoch, mean training objective
  std::vector<double> val_mse;     // per epoch, MSE on the forecast positions
  double hold_baseline_mse = 0.0;  // last-value-hold on the validation windows
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

/// Converts windows at `indices` into a [B, W, C] tensor.
Tensor windows_tensor(const windows::WindowBatch& batch, std::span<const std::size_t> indices);

/// Forecast MSE (positions context..W-1) over a window batch.
double forecast_mse(const Forecaster& model, const windows::WindowBatch& batch, std::size_t eval_batch = 256);
/// MSE of repeating each channel's last context value across the horizon.
double hold_baseline_mse(const windows::WindowBatch& batch);

/// Adam/MSE training on a seeded train/validation split of `batch`. Aborts
/// with NumericError naming epoch and batch if the loss becomes NaN.
ForecastTrainResult train_forecaster(Forecaster model, const windows::WindowBatch& batch,
                                     const ForecastTrainConfig& config);

/// Appends `steps` forecast timestamps to a record. `seed` drives the random
/// placeholder timestamps the BrainLM path appends before masking.
data::IcnRecord extend_series(const data::IcnRecord& record, const Forecaster& model, std::size_t steps,
                              std::uint64_t seed);
data::Cohort extend_series(const data::Cohort& cohort, const Forecaster& model, std::size_t steps,
                           std::uint64_t seed);

}  // namespace icnf::forecast
