#include <gtest/gtest.h>

#include <filesystem>

#include "icnf/config.hpp"
#include "icnf/error.hpp"

using namespace icnf;
using namespace icnf::config;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(ICNF_SOURCE_DIR) / "configs";

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsAreProtocolConstants) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.window, 24u);
  EXPECT_EQ(c.step, 4u);
  EXPECT_EQ(c.context(), 20u);
  EXPECT_EQ(c.horizon(), 4u);
  EXPECT_EQ(c.forecast_train.epochs, 500u);
  EXPECT_EQ(c.classify_train.epochs, 800u);
  EXPECT_EQ(c.forecast_train.batch_size, 32u);
  EXPECT_EQ(c.lstm.hidden, 50u);
  EXPECT_EQ(c.matrix.seeds.size(), 5u);
  EXPECT_EQ(c.matrix.folds, 5u);
  EXPECT_EQ(c.matrix.reference, 'd');
  EXPECT_EQ(c.synth.n_cn, 411u);
  EXPECT_EQ(c.synth.n_ad, 95u);
}

TEST(Config, ShippedProfilesParse) {
  const RunConfig paper = load_config(kConfigs / "paper.ini");
  EXPECT_EQ(config_hash(paper), config_hash(parse_config("")));
  const RunConfig desk = load_config(kConfigs / "desk.ini");
  EXPECT_EQ(desk.synth.n_cn + desk.synth.n_ad, 200u);
  EXPECT_EQ(desk.matrix.variants, "abcdef");
  EXPECT_NE(config_hash(desk), config_hash(paper));
}

TEST(Config, ValuesPropagate) {
  const RunConfig c = parse_config(
      "[run]\nseed = 7\nthreads = 3\n[classify]\nhidden = 16\nattention = literal\n[experiment]\nseeds = 3, 9\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.synth.seed, 7u);
  EXPECT_EQ(c.matrix.threads, 3u);
  EXPECT_EQ(c.matrix.model.hidden, 16u);
  EXPECT_EQ(c.matrix.model.attention, classify::AttentionMode::kLiteral);
  EXPECT_EQ(c.matrix.seeds, (std::vector<std::uint64_t>{3, 9}));
}

TEST(Config, UnknownKeyNamed) {
  EXPECT_NE(error_of("[classify]\nepochz = 3\n").find("classify.epochz"), std::string::npos);
  EXPECT_NE(error_of("[bogus]\nx = 1\n").find("bogus"), std::string::npos);
}

TEST(Config, NegativeEpochsRejected) {
  const auto e = error_of("[classify]\nepochs = -1\n");
  EXPECT_NE(e.find("classify.epochs"), std::string::npos);
  EXPECT_NE(e.find("-1"), std::string::npos);
  EXPECT_FALSE(error_of("[forecast]\nepochs = 0\n").empty());
  EXPECT_FALSE(error_of("[forecast]\nepochs = 2.5\n").empty());
}

TEST(Config, MalformedValuesRejected) {
  EXPECT_FALSE(error_of("[forecast]\nlearning_rate = fast\n").empty());
  EXPECT_FALSE(error_of("[brainlm]\nmasked_loss = maybe\n").empty());
  EXPECT_FALSE(error_of("[experiment]\nreference = dd\n").empty());
  EXPECT_FALSE(error_of("[experiment]\nvariants = abca\n").empty());
  EXPECT_FALSE(error_of("[experiment]\nseeds = 1,1\n").empty());
  EXPECT_FALSE(error_of("[experiment]\ntest = anova\n").empty());
  EXPECT_FALSE(error_of("[windows]\nwindow = 30\n").empty());  // horizon would be 5
  EXPECT_FALSE(error_of("[brainlm]\nd_model = 30\nheads = 4\n").empty());
  EXPECT_FALSE(error_of("[synth]\nar_coefficient = 1.0\n").empty());
  EXPECT_FALSE(error_of("stray = 1\n").empty());
}

TEST(Config, HashIgnoresPathsAndThreads) {
  const auto a = parse_config("[run]\nthreads = 1\n[paths]\nout = /a\n");
  const auto b = parse_config("[run]\nthreads = 8\n[paths]\nout = /b\n");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_NE(config_hash(a), config_hash(parse_config("[run]\nseed = 1\n")));
}

TEST(Config, CanonicalTextRoundTrips) {
  const RunConfig c = load_config(kConfigs / "desk.ini");
  std::string ini, section;
  for (std::size_t pos = 0; pos < canonical_text(c).size();) {
    const std::string text = canonical_text(c);
    const auto end = text.find('\n', pos);
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    const auto dot = line.find('.'), eq = line.find('=');
    const std::string s = line.substr(0, dot);
    if (s != section) ini += "[" + (section = s) + "]\n";
    ini += line.substr(dot + 1, eq - dot - 1) + " = " + line.substr(eq + 1) + "\n";
  }
  EXPECT_EQ(canonical_text(parse_config(ini)), canonical_text(c));
}

TEST(Config, MissingFileIsConfigError) { EXPECT_THROW(load_config("/nonexistent/x.ini"), ConfigError); }
