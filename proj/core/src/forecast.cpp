#include "icnf/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icnf/error.hpp"
#include "icnf/rng.hpp"

namespace icnf::forecast {

namespace {

std::size_t meta_size(const ParamStore& params, std::string_view key) {
  return static_cast<std::size_t>(params.meta(key));
}

void expect_shape(const ParamStore& params, const std::string& name, const Shape& shape) {
  if (!params.contains(name)) throw FormatError("checkpoint is missing parameter '" + name + "'");
  if (params.at(name).shape() != shape) {
    throw FormatError("parameter '" + name + "' has shape " + shape_string(params.at(name).shape()) +
                      ", expected " + shape_string(shape));
  }
}

void expect_linear(const ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out) {
  expect_shape(params, prefix + ".weight", {in, out});
  expect_shape(params, prefix + ".bias", {out});
}

void expect_norm(const ParamStore& params, const std::string& prefix, std::size_t d) {
  expect_shape(params, prefix + ".gamma", {d});
  expect_shape(params, prefix + ".beta", {d});
}

void expect_attention(const ParamStore& params, const std::string& prefix, std::size_t d) {
  for (const char* part : {".query", ".key", ".value", ".out"}) expect_linear(params, prefix + part, d, d);
}

struct Run {
  std::size_t start;
  std::size_t length;
  bool masked;
};

std::vector<Run> mask_runs(const std::vector<bool>& mask) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!runs.empty() && runs.back().masked == mask[i]) {
      ++runs.back().length;
    } else {
      runs.push_back({i, 1, mask[i]});
    }
  }
  return runs;
}

Tensor feed_forward(const ParamStore& params, const std::string& prefix, const Tensor& x) {
  return nn::apply(nn::linear_weights(params, prefix + ".ff2"),
                   gelu(nn::apply(nn::linear_weights(params, prefix + ".ff1"), x)));
}

}  // namespace

std::string_view kind_name(ForecasterKind kind) { return kind == ForecasterKind::kLstm ? "lstm" : "brainlm"; }

ForecasterKind parse_kind(std::string_view text) {
  if (text == "lstm") return ForecasterKind::kLstm;
  if (text == "brainlm") return ForecasterKind::kBrainLm;
  throw ConfigError("unknown forecaster '" + std::string(text) + "'; expected lstm or brainlm");
}

// ---------------------------------------------------------------------------
// Stateless LSTM

LstmForecaster::LstmForecaster(const LstmForecasterConfig& config, std::uint64_t seed) : config_(config) {
  if (config.channels == 0 || config.hidden == 0 || config.context == 0 || config.horizon == 0) {
    throw ConfigError("lstm forecaster dimensions must be positive");
  }
  Rng rng(derive_seed(seed, "forecast/lstm/init"));
  nn::add_lstm(params_, "lstm", config.channels, config.hidden, rng, config.forget_bias);
  nn::add_linear(params_, "head", config.hidden, config.horizon * config.channels, rng);
  params_.set_meta("model_kind", static_cast<double>(ForecasterKind::kLstm));
  params_.set_meta("channels", static_cast<double>(config.channels));
  params_.set_meta("hidden", static_cast<double>(config.hidden));
  params_.set_meta("context", static_cast<double>(config.context));
  params_.set_meta("horizon", static_cast<double>(config.horizon));
}

LstmForecaster::LstmForecaster(ParamStore params) : params_(std::move(params)) {
  if (static_cast<int>(params_.meta("model_kind")) != static_cast<int>(ForecasterKind::kLstm)) {
    throw FormatError("checkpoint is not an LSTM forecaster");
  }
  config_.channels = meta_size(params_, "channels");
  config_.hidden = meta_size(params_, "hidden");
  config_.context = meta_size(params_, "context");
  config_.horizon = meta_size(params_, "horizon");
  const std::size_t c = config_.channels, h = config_.hidden;
  expect_shape(params_, "lstm.w_x", {c, 4 * h});
  expect_shape(params_, "lstm.w_h", {h, 4 * h});
  expect_shape(params_, "lstm.bias", {4 * h});
  expect_linear(params_, "head", h, config_.horizon * c);
}

Tensor LstmForecaster::forward(const Tensor& context) const {
  if (context.rank() != 3 || context.dim(1) != config_.context || context.dim(2) != config_.channels) {
    throw ShapeError("lstm_forward: expected context [B, " + std::to_string(config_.context) + ", " +
                     std::to_string(config_.channels) + "], got " + shape_string(context.shape()));
  }
  const std::vector<Tensor> steps = nn::unstack_time(context);
  const std::vector<Tensor> hidden = nn::run_lstm(nn::lstm_weights(params_, "lstm"), steps);
  const Tensor flat = nn::apply(nn::linear_weights(params_, "head"), hidden.back());
  return reshape(flat, {context.dim(0), config_.horizon, config_.channels});
}

// ---------------------------------------------------------------------------
// Masked transformer

BrainLm::BrainLm(const BrainLmConfig& config, std::uint64_t seed) : config_(config) {
  const std::size_t d = config.d_model;
  if (config.heads == 0 || d % config.heads != 0) {
    throw ConfigError("brainlm: d_model " + std::to_string(d) + " not divisible by " +
                      std::to_string(config.heads) + " heads");
  }
  if (config.mask_denominator == 0 || config.window % config.mask_denominator != 0) {
    throw ConfigError("brainlm: window " + std::to_string(config.window) + " not divisible by mask denominator " +
                      std::to_string(config.mask_denominator));
  }
  Rng rng(derive_seed(seed, "forecast/brainlm/init"));
  nn::add_linear(params_, "embed", config.channels, d, rng);
  params_.add_uniform("pos.encoder", {config.window, d}, d, rng);
  params_.add_uniform("mask_token", {d}, d, rng);
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    nn::add_layer_norm(params_, p + ".norm1", d);
    nn::add_attention(params_, p + ".attn", d, rng);
    nn::add_layer_norm(params_, p + ".norm2", d);
    nn::add_linear(params_, p + ".ff1", d, config.ff, rng);
    nn::add_linear(params_, p + ".ff2", config.ff, d, rng);
  }
  nn::add_layer_norm(params_, "enc.norm", d);
  params_.add_uniform("pos.decoder", {config.window, d}, d, rng);
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    nn::add_layer_norm(params_, p + ".norm1", d);
    nn::add_attention(params_, p + ".self_attn", d, rng);
    nn::add_layer_norm(params_, p + ".norm2", d);
    nn::add_attention(params_, p + ".cross_attn", d, rng);
    nn::add_layer_norm(params_, p + ".norm3", d);
    nn::add_linear(params_, p + ".ff1", d, config.ff, rng);
    nn::add_linear(params_, p + ".ff2", config.ff, d, rng);
  }
  nn::add_layer_norm(params_, "dec.norm", d);
  nn::add_linear(params_, "head", d, config.channels, rng);

  params_.set_meta("model_kind", static_cast<double>(ForecasterKind::kBrainLm));
  params_.set_meta("channels", static_cast<double>(config.channels));
  params_.set_meta("window", static_cast<double>(config.window));
  params_.set_meta("d_model", static_cast<double>(d));
  params_.set_meta("heads", static_cast<double>(config.heads));
  params_.set_meta("ff", static_cast<double>(config.ff));
  params_.set_meta("encoder_layers", static_cast<double>(config.encoder_layers));
  params_.set_meta("decoder_layers", static_cast<double>(config.decoder_layers));
  params_.set_meta("mask_denominator", static_cast<double>(config.mask_denominator));
  params_.set_meta("masked_loss", config.masked_loss ? 1.0 : 0.0);
}

BrainLm::BrainLm(ParamStore params) : params_(std::move(params)) {
  if (static_cast<int>(params_.meta("model_kind")) != static_cast<int>(ForecasterKind::kBrainLm)) {
    throw FormatError("checkpoint is not a BrainLM forecaster");
  }
  config_.channels = meta_size(params_, "channels");
  config_.window = meta_size(params_, "window");
  config_.d_model = meta_size(params_, "d_model");
  config_.heads = meta_size(params_, "heads");
  config_.ff = meta_size(params_, "ff");
  config_.encoder_layers = meta_size(params_, "encoder_layers");
  config_.decoder_layers = meta_size(params_, "decoder_layers");
  config_.mask_denominator = meta_size(params_, "mask_denominator");
  config_.masked_loss = params_.meta("masked_loss") != 0.0;
  const std::size_t d = config_.d_model, c = config_.channels;
  if (config_.heads == 0 || d % config_.heads != 0) throw FormatError("brainlm checkpoint: invalid head count");
  expect_linear(params_, "embed", c, d);
  expect_shape(params_, "pos.encoder", {config_.window, d});
  expect_shape(params_, "mask_token", {d});
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    expect_norm(params_, p + ".norm1", d);
    expect_attention(params_, p + ".attn", d);
    expect_norm(params_, p + ".norm2", d);
    expect_linear(params_, p + ".ff1", d, config_.ff);
    expect_linear(params_, p + ".ff2", config_.ff, d);
  }
  expect_norm(params_, "enc.norm", d);
  expect_shape(params_, "pos.decoder", {config_.window, d});
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    expect_norm(params_, p + ".norm1", d);
    expect_attention(params_, p + ".self_attn", d);
    expect_norm(params_, p + ".norm2", d);
    expect_attention(params_, p + ".cross_attn", d);
    expect_norm(params_, p + ".norm3", d);
    expect_linear(params_, p + ".ff1", d, config_.ff);
    expect_linear(params_, p + ".ff2", config_.ff, d);
  }
  expect_norm(params_, "dec.norm", d);
  expect_linear(params_, "head", d, c);
}

std::vector<bool> BrainLm::default_mask() const {
  return windows::mask_tail(config_.window, config_.mask_denominator);
}

Tensor BrainLm::forward(const Tensor& window, const std::vector<bool>& mask, nn::AttentionTrace* trace) const {
  const std::size_t w = config_.window, c = config_.channels, d = config_.d_model;
  if (window.rank() != 3 || window.dim(1) != w || window.dim(2) != c) {
    throw ShapeError("brainlm_forward: expected window [B, " + std::to_string(w) + ", " + std::to_string(c) +
                     "], got " + shape_string(window.shape()));
  }
  if (mask.size() != w) {
    throw ShapeError("brainlm_forward: mask has " + std::to_string(mask.size()) + " positions, window has " +
                     std::to_string(w));
  }
  const std::size_t b = window.dim(0);

  const nn::Linear embed = nn::linear_weights(params_, "embed");
  const Tensor& mask_token = params_.at("mask_token");
  std::vector<Tensor> pieces;
  for (const Run& run : mask_runs(mask)) {
    if (run.masked) {
      pieces.push_back(add(Tensor::zeros({b, run.length, d}), mask_token));
    } else {
      pieces.push_back(nn::apply(embed, slice(window, 1, run.start, run.length)));
    }
  }
  Tensor x = pieces.size() == 1 ? pieces.front() : concat(pieces, 1);
  std::vector<std::size_t> positions(w);
  std::iota(positions.begin(), positions.end(), 0);
  x = add(x, embedding(params_.at("pos.encoder"), positions));

  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    const auto attn = nn::attention_weights(params_, p + ".attn", config_.heads);
    const Tensor normed = nn::apply(nn::layer_norm_weights(params_, p + ".norm1"), x);
    x = add(x, nn::apply(attn, normed, normed, trace));
    x = add(x, feed_forward(params_, p, nn::apply(nn::layer_norm_weights(params_, p + ".norm2"), x)));
  }
  const Tensor memory = nn::apply(nn::layer_norm_weights(params_, "enc.norm"), x);

  Tensor y = add(memory, embedding(params_.at("pos.decoder"), positions));
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    const auto self_attn = nn::attention_weights(params_, p + ".self_attn", config_.heads);
    const auto cross_attn = nn::attention_weights(params_, p + ".cross_attn", config_.heads);
    const Tensor normed = nn::apply(nn::layer_norm_weights(params_, p + ".norm1"), y);
    y = add(y, nn::apply(self_attn, normed, normed, trace));
    y = add(y, nn::apply(cross_attn, nn::apply(nn::layer_norm_weights(params_, p + ".norm2"), y), memory, trace));
    y = add(y, feed_forward(params_, p, nn::apply(nn::layer_norm_weights(params_, p + ".norm3"), y)));
  }
  y = nn::apply(nn::layer_norm_weights(params_, "dec.norm"), y);
  return nn::apply(nn::linear_weights(params_, "head"), y);
}

Tensor BrainLm::loss(const Tensor& window, const std::vector<bool>& mask) const {
  const Tensor recon = forward(window, mask);
  if (!config_.masked_loss) return mse(recon, window);
  return mse(masked_positions(recon, mask), masked_positions(window, mask));
}

Tensor masked_positions(const Tensor& x, const std::vector<bool>& mask) {
  if (x.rank() != 3 || x.dim(1) != mask.size()) {
    throw ShapeError("masked_positions: mask of length " + std::to_string(mask.size()) + " does not fit " +
                     shape_string(x.shape()));
  }
  std::vector<Tensor> parts;
  for (const Run& run : mask_runs(mask)) {
    if (run.masked) parts.push_back(slice(x, 1, run.start, run.length));
  }
  if (parts.empty()) throw ShapeError("masked_positions: mask selects no positions");
  return parts.size() == 1 ? parts.front() : concat(parts, 1);
}

// ---------------------------------------------------------------------------
// Forecaster facade

Forecaster Forecaster::from_checkpoint(ParamStore params) {
  const auto kind = static_cast<int>(params.meta("model_kind"));
  if (kind == static_cast<int>(ForecasterKind::kLstm)) return Forecaster(LstmForecaster(std::move(params)));
  if (kind == static_cast<int>(ForecasterKind::kBrainLm)) return Forecaster(BrainLm(std::move(params)));
  throw FormatError("checkpoint holds an unknown model kind " + std::to_string(kind));
}

Forecaster Forecaster::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw FormatError("forecaster checkpoint " + path.string() + " not found (run `icnf train-forecaster` first)");
  }
  return from_checkpoint(load_checkpoint(path));
}

void Forecaster::save(const std::filesystem::path& path) const { save_checkpoint(path, params()); }

ForecasterKind Forecaster::kind() const {
  return std::holds_alternative<LstmForecaster>(model_) ? ForecasterKind::kLstm : ForecasterKind::kBrainLm;
}

const ParamStore& Forecaster::params() const {
  return std::visit([](const auto& m) -> const ParamStore& { return m.params(); }, model_);
}

ParamStore& Forecaster::params() {
  return std::visit([](auto& m) -> ParamStore& { return m.params(); }, model_);
}

std::size_t Forecaster::channels() const {
  return std::visit([](const auto& m) { return m.config().channels; }, model_);
}

std::size_t Forecaster::context() const {
  if (const auto* m = lstm()) return m->config().context;
  const auto& c = brainlm()->config();
  return c.window - c.window / c.mask_denominator;
}

std::size_t Forecaster::horizon() const {
  if (const auto* m = lstm()) return m->config().horizon;
  const auto& c = brainlm()->config();
  return c.window / c.mask_denominator;
}

Tensor Forecaster::loss(const Tensor& windows) const {
  if (const auto* m = lstm()) {
    const std::size_t ctx = context(), h = horizon();
    if (windows.rank() != 3 || windows.dim(1) != ctx + h) {
      throw ShapeError("forecaster loss: expected windows of length " + std::to_string(ctx + h) + ", got " +
                       shape_string(windows.shape()));
    }
    return mse(m->forward(slice(windows, 1, 0, ctx)), slice(windows, 1, ctx, h));
  }
  const BrainLm& model = *brainlm();
  return model.loss(windows, model.default_mask());
}

Tensor Forecaster::predict(const Tensor& windows) const {
  if (const auto* m = lstm()) {
    if (windows.rank() != 3 || windows.dim(1) < context()) {
      throw ShapeError("forecaster predict: windows " + shape_string(windows.shape()) + " shorter than context " +
                       std::to_string(context()));
    }
    return m->forward(slice(windows, 1, 0, context()));
  }
  const BrainLm& model = *brainlm();
  const auto mask = model.default_mask();
  return masked_positions(model.forward(windows, mask), mask);
}

// ---------------------------------------------------------------------------
// Training and evaluation

Tensor windows_tensor(const windows::WindowBatch& batch, std::span<const std::size_t> indices) {
  const std::size_t stride = batch.window * batch.channels;
  std::vector<double> values;
  values.reserve(indices.size() * stride);
  for (std::size_t i : indices) {
    auto w = batch.window_values(i);
    values.insert(values.end(), w.begin(), w.end());
  }
  return Tensor({indices.size(), batch.window, batch.channels}, std::move(values));
}

double forecast_mse(const Forecaster& model, const windows::WindowBatch& batch, std::size_t eval_batch) {
  if (batch.size() == 0) throw DataError("forecast_mse: empty window batch");
  NoGradGuard no_grad;
  const std::size_t ctx = model.context(), h = model.horizon();
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < batch.size(); start += eval_batch) {
    idx.resize(std::min(eval_batch, batch.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor x = windows_tensor(batch, idx);
    const Tensor pred = model.predict(x);
    const Tensor target = slice(x, 1, ctx, h);
    auto p = pred.values();
    auto t = target.values();
    for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  }
  return total / static_cast<double>(batch.size() * h * batch.channels);
}

double hold_baseline_mse(const windows::WindowBatch& batch) {
  if (batch.size() == 0) throw DataError("hold_baseline_mse: empty window batch");
  const std::size_t ctx = batch.context_len;
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    for (std::size_t c = 0; c < batch.channels; ++c) {
      const double last = batch.at(n, c, ctx - 1);
      for (std::size_t k = ctx; k < batch.window; ++k) {
        const double e = batch.at(n, c, k) - last;
        total += e * e;
      }
    }
  }
  return total / static_cast<double>(batch.size() * (batch.window - ctx) * batch.channels);
}

ForecastTrainResult train_forecaster(Forecaster model, const windows::WindowBatch& batch,
                                     const ForecastTrainConfig& config) {
  if (config.batch_size == 0) throw ConfigError("forecaster batch_size must be positive");
  if (batch.size() < 2) throw DataError("train_forecaster: need at least 2 windows, got " + std::to_string(batch.size()));
  if (batch.channels != model.channels() || batch.window != model.context() + model.horizon()) {
    throw DataError("train_forecaster: windows of " + std::to_string(batch.window) + "x" +
                    std::to_string(batch.channels) + " do not match the model's " +
                    std::to_string(model.context() + model.horizon()) + "x" + std::to_string(model.channels()));
  }
  auto [train, val] = windows::split_windows(batch, config.train_fraction, config.seed, config.split_by_subject);

  ForecastTrainResult result{model.clone(), {}, {}, hold_baseline_mse(val), train.size(), val.size()};
  Forecaster& trained = result.model;
  AdamState state = make_adam_state(trained.params(), config.adam);
  Rng shuffle(derive_seed(config.seed, "forecast/train/shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      trained.params().zero_grad();
      const Tensor loss = trained.loss(windows_tensor(train, idx));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("forecaster loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      backward(loss);
      adam_step(trained.params(), state);
      total += value * static_cast<double>(idx.size());
    }
    result.train_loss.push_back(total / static_cast<double>(order.size()));
    result.val_mse.push_back(forecast_mse(trained, val, config.eval_batch_size));
  }
  trained.params().zero_grad();
  return result;
}

data::IcnRecord extend_series(const data::IcnRecord& record, const Forecaster& model, std::size_t steps,
                              std::uint64_t seed) {
  if (steps != model.horizon()) {
    throw Error("extend_series: model forecasts " + std::to_string(model.horizon()) + " steps, requested " +
                std::to_string(steps));
  }
  const std::size_t t = record.length(), c = record.series.channels();
  const std::size_t ctx = model.context();
  if (c != model.channels()) {
    throw DataError("extend_series: subject " + record.subject_id + " has " + std::to_string(c) +
                    " channels, model expects " + std::to_string(model.channels()));
  }
  if (t < ctx) {
    throw DataError("extend_series: subject " + record.subject_id + " has T=" + std::to_string(t) + " < context " +
                    std::to_string(ctx));
  }
  const std::size_t w = ctx + steps;
  std::vector<double> window(w * c, 0.0);
  for (std::size_t k = 0; k < ctx; ++k) {
    for (std::size_t ch = 0; ch < c; ++ch) window[k * c + ch] = record.series.at(ch, t - ctx + k);
  }
  if (model.kind() == ForecasterKind::kBrainLm) {
    Rng rng(derive_seed(seed, "extend/" + record.subject_id));
    for (std::size_t k = ctx; k < w; ++k) {
      for (std::size_t ch = 0; ch < c; ++ch) window[k * c + ch] = rng.normal();
    }
  }
  Tensor forecast;
  {
    NoGradGuard no_grad;
    forecast = model.predict(Tensor({1, w, c}, std::move(window)));
  }
  data::Series out(c, t + steps);
  auto f = forecast.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    auto src = record.series.channel(ch);
    auto dst = out.channel(ch);
    std::copy(src.begin(), src.end(), dst.begin());
    for (std::size_t k = 0; k < steps; ++k) dst[t + k] = f[k * c + ch];
  }
  return {record.subject_id, record.label, std::move(out)};
}

data::Cohort extend_series(const data::Cohort& cohort, const Forecaster& model, std::size_t steps,
                           std::uint64_t seed) {
  std::vector<data::IcnRecord> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort.records()) out.push_back(extend_series(r, model, steps, seed));
  return data::Cohort(std::move(out), cohort.channels());
}

}  // namespace icnf::forecast
