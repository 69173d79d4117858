#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "icnf/error.hpp"
#include "icnf/forecast.hpp"
#include "icnf/ops.hpp"

using namespace icnf;
using namespace icnf::forecast;
using icnf::testing::gradcheck;
using icnf::testing::random_leaf;

namespace {

LstmForecasterConfig tiny_lstm() {
  LstmForecasterConfig c;
  c.channels = 3;
  c.hidden = 4;
  c.context = 5;
  c.horizon = 1;
  return c;
}

BrainLmConfig tiny_brainlm() {
  BrainLmConfig c;
  c.channels = 3;
  c.window = 6;
  c.d_model = 4;
  c.heads = 2;
  c.ff = 8;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.mask_denominator = 3;
  return c;
}

double max_rel_error(const Forecaster& f, const Tensor& windows, std::uint64_t seed) {
  std::vector<Tensor> inputs;
  for (auto& [name, t] : f.params()) {
    if (t.requires_grad()) inputs.push_back(t);
  }
  Rng rng(seed);
  return gradcheck([&] { return f.loss(windows); }, inputs, rng, 3).max_rel_error;
}

data::Cohort sine_cohort(std::size_t n, std::size_t channels, std::size_t length) {
  std::vector<data::IcnRecord> records;
  for (std::size_t s = 0; s < n; ++s) {
    data::IcnRecord r{"s" + std::to_string(s), s % 2 ? data::Label::kAD : data::Label::kCN,
                      data::Series(channels, length)};
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < length; ++t) r.series.at(c, t) = std::sin(0.4 * t + 0.3 * c + 0.1 * s);
    }
    records.push_back(std::move(r));
  }
  return data::Cohort(std::move(records), channels);
}

}  // namespace

TEST(Forecast, KindNames) {
  EXPECT_EQ(parse_kind("lstm"), ForecasterKind::kLstm);
  EXPECT_EQ(kind_name(ForecasterKind::kBrainLm), "brainlm");
  EXPECT_THROW(parse_kind("gru"), Error);
}

TEST(Forecast, LstmShapes) {
  const LstmForecaster m(LstmForecasterConfig{}, 1);
  const auto y = m.forward(Tensor::zeros({2, 20, 53}));
  EXPECT_EQ(y.shape(), (Shape{2, 4, 53}));
}

TEST(Forecast, BrainLmShapesAndMask) {
  const BrainLm m(tiny_brainlm(), 1);
  EXPECT_EQ(m.default_mask(), (std::vector<bool>{false, false, false, false, true, true}));
  const auto y = m.forward(Tensor::zeros({2, 6, 3}), m.default_mask());
  EXPECT_EQ(y.shape(), (Shape{2, 6, 3}));
  const Forecaster f(m);
  EXPECT_EQ(f.context(), 4u);
  EXPECT_EQ(f.horizon(), 2u);
}

TEST(Forecast, BrainLmIgnoresMaskedValues) {
  const BrainLm m(tiny_brainlm(), 2);
  Rng rng(3);
  const auto x = random_leaf({2, 6, 3}, rng);
  auto y = x.detach();
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 4; t < 6; ++t) {
      for (std::size_t c = 0; c < 3; ++c) y.mutable_values()[(b * 6 + t) * 3 + c] = 1e6;
    }
  }
  const auto a = m.forward(x, m.default_mask()), b = m.forward(y, m.default_mask());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(ForecastGrad, LstmLoss) {
  const Forecaster f(LstmForecaster(tiny_lstm(), 4));
  Rng rng(5);
  EXPECT_LT(max_rel_error(f, random_leaf({2, 6, 3}, rng), 6), 1e-4);
}

TEST(ForecastGrad, BrainLmMaskedLoss) {
  const Forecaster f(BrainLm(tiny_brainlm(), 7));
  Rng rng(8);
  EXPECT_LT(max_rel_error(f, random_leaf({2, 6, 3}, rng), 9), 1e-4);
}

TEST(ForecastGrad, BrainLmFullLoss) {
  auto cfg = tiny_brainlm();
  cfg.masked_loss = false;
  const Forecaster f(BrainLm(cfg, 10));
  Rng rng(11);
  EXPECT_LT(max_rel_error(f, random_leaf({2, 6, 3}, rng), 12), 1e-4);
}

TEST(Forecast, CheckpointRoundTripBothKinds) {
  const auto dir = std::filesystem::temp_directory_path();
  for (const Forecaster& f : {Forecaster(LstmForecaster(tiny_lstm(), 1)), Forecaster(BrainLm(tiny_brainlm(), 1))}) {
    const auto path = dir / "icnf_forecast_roundtrip.ckpt";
    f.save(path);
    const auto g = Forecaster::load(path);
    EXPECT_EQ(g.kind(), f.kind());
    EXPECT_TRUE(bitwise_equal(g.params(), f.params()));
    std::filesystem::remove(path);
  }
  EXPECT_THROW(Forecaster::load(dir / "icnf_missing.ckpt"), FormatError);
}

TEST(Forecast, HoldBaselineByHand) {
  windows::WindowBatch b;
  b.window = 3;
  b.channels = 1;
  b.context_len = 2;
  b.target_len = 1;
  b.values = {0, 1, 3, 5, 5, 4};
  b.sources.resize(2);
  EXPECT_DOUBLE_EQ(hold_baseline_mse(b), (4.0 + 1.0) / 2.0);
}

TEST(Forecast, TrainingReducesErrorAndIsDeterministic) {
  const auto cohort = sine_cohort(6, 3, 30);
  const auto batch = windows::slide(cohort, 6, 2, 5);
  ForecastTrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.adam.lr = 0.02;
  cfg.seed = 3;
  const auto a = train_forecaster(LstmForecaster(tiny_lstm(), 1), batch, cfg);
  EXPECT_EQ(a.train_loss.size(), 30u);
  EXPECT_LT(a.val_mse.back(), a.val_mse.front());
  EXPECT_LT(a.val_mse.back(), a.hold_baseline_mse);
  const auto b = train_forecaster(LstmForecaster(tiny_lstm(), 1), batch, cfg);
  EXPECT_TRUE(bitwise_equal(a.model.params(), b.model.params()));
  EXPECT_EQ(a.val_mse, b.val_mse);
}

TEST(Forecast, TrainingRejectsMismatchedWindows) {
  const auto batch = windows::slide(sine_cohort(2, 3, 30), 8, 2, 7);
  EXPECT_THROW(train_forecaster(LstmForecaster(tiny_lstm(), 1), batch, ForecastTrainConfig{}), DataError);
}

TEST(Forecast, NonFiniteLossNamesEpochAndBatch) {
  auto batch = windows::slide(sine_cohort(4, 3, 30), 6, 2, 5);
  ForecastTrainConfig cfg;
  cfg.epochs = 1;
  cfg.adam.lr = 1e300;  // blows the weights up after one step
  cfg.batch_size = 4;
  try {
    train_forecaster(LstmForecaster(tiny_lstm(), 1), batch, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0, batch"), std::string::npos);
  }
}

TEST(Forecast, ExtendKeepsPrefixAndAppendsHorizon) {
  const auto cohort = sine_cohort(2, 3, 9);
  for (const Forecaster& f : {Forecaster(LstmForecaster(tiny_lstm(), 1)), Forecaster(BrainLm(tiny_brainlm(), 1))}) {
    const auto ext = extend_series(cohort, f, f.horizon(), 5);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      ASSERT_EQ(ext[i].length(), 9 + f.horizon());
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < 9; ++t) EXPECT_EQ(ext[i].series.at(c, t), cohort[i].series.at(c, t));
      }
    }
    EXPECT_EQ(ext, extend_series(cohort, f, f.horizon(), 5));
    EXPECT_THROW(extend_series(cohort, f, f.horizon() + 1, 5), Error);
  }
}

TEST(Forecast, LstmExtensionMatchesDirectForecast) {
  const auto cohort = sine_cohort(1, 3, 9);
  const LstmForecaster m(tiny_lstm(), 2);
  const auto ext = extend_series(cohort[0], Forecaster(m), 1, 0);
  std::vector<double> ctx;
  for (std::size_t t = 4; t < 9; ++t) {
    for (std::size_t c = 0; c < 3; ++c) ctx.push_back(cohort[0].series.at(c, t));
  }
  const auto y = m.forward(Tensor({1, 5, 3}, ctx));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(ext.series.at(c, 9), y.values()[c]);
}
