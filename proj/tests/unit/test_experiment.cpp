#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "icnf/error.hpp"
#include "icnf/experiment.hpp"
#include "icnf/rng.hpp"

using namespace icnf;
using namespace icnf::experiment;
namespace fs = std::filesystem;

namespace {

std::vector<data::Label> labels(std::size_t cn, std::size_t ad) {
  std::vector<data::Label> out(cn, data::Label::kCN);
  out.insert(out.end(), ad, data::Label::kAD);
  return out;
}

std::size_t count(std::span<const data::Label> l, std::span<const std::size_t> idx, data::Label which) {
  return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return l[i] == which; }));
}

ForecasterSet tiny_forecasters() {
  forecast::LstmForecasterConfig lc;
  lc.hidden = 2;
  forecast::BrainLmConfig bc;
  bc.d_model = 4;
  bc.heads = 1;
  bc.ff = 4;
  bc.encoder_layers = 1;
  bc.decoder_layers = 1;
  ForecasterSet set;
  set.lstm_baseline = forecast::LstmForecaster(lc, 1);
  set.brainlm_baseline = forecast::BrainLm(bc, 2);
  set.lstm_replicated = forecast::LstmForecaster(lc, 3);
  set.brainlm_replicated = forecast::BrainLm(bc, 4);
  return set;
}

// Three-channel cohort of one fixed length; AD subjects are shifted on channel 0.
data::Cohort fixed_length_cohort(std::size_t n_cn, std::size_t n_ad, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::IcnRecord> records;
  for (std::size_t s = 0; s < n_cn + n_ad; ++s) {
    const bool ad = s >= n_cn;
    char id[16];
    std::snprintf(id, sizeof(id), "s%03zu", s);
    data::IcnRecord r{id, ad ? data::Label::kAD : data::Label::kCN, data::Series(3, length)};
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < length; ++t) r.series.at(c, t) = rng.normal() + (ad && c == 0 ? 1.0 : 0.0);
    }
    records.push_back(std::move(r));
  }
  return data::Cohort(std::move(records), 3);
}

MatrixConfig tiny_matrix() {
  MatrixConfig m;
  m.seeds = {0, 1};
  m.variants = "ad";
  m.folds = 2;
  m.test_fraction = 0.25;
  m.model.hidden = 2;
  m.model.layers = 1;
  m.train.epochs = 1;
  m.train.batch_size = 8;
  m.config_hash = "0123456789abcdef";
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Variants, SpecTable) {
  const std::size_t lengths[] = {137, 141, 141, 194, 198, 198};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(variant_specs()[i].length, lengths[i]);
  EXPECT_FALSE(variant_spec('a').forecaster.has_value());
  EXPECT_EQ(variant_spec('c').forecaster, forecast::ForecasterKind::kBrainLm);
  EXPECT_TRUE(variant_spec('e').replicated);
  EXPECT_THROW(variant_spec('g'), ConfigError);
  EXPECT_EQ(forecaster_filename(forecast::ForecasterKind::kBrainLm, true), "brainlm_replicated.ckpt");
}

TEST(Variants, BuildAllSixWithExpectedLengths) {
  const auto cohort = data::synth_cohort(3, 2, 0.5, 5);
  const auto set = tiny_forecasters();
  std::map<char, data::Cohort> built;
  for (const auto& spec : variant_specs()) {
    built.emplace(spec.id, build_variant(cohort, spec.id, set, 7));
    EXPECT_EQ(built.at(spec.id).uniform_length(), spec.length) << spec.id;
    EXPECT_EQ(built.at(spec.id).size(), cohort.size());
  }
  // augmented variants extend their base without touching it
  for (const auto& [id, base] : std::map<char, char>{{'b', 'a'}, {'c', 'a'}, {'e', 'd'}, {'f', 'd'}}) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const auto& x = built.at(id)[i].series;
      const auto& y = built.at(base)[i].series;
      for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t t = 0; t < y.length(); ++t) ASSERT_EQ(x.at(c, t), y.at(c, t)) << id;
      }
    }
  }
  EXPECT_EQ(build_variant(cohort, 'c', set, 7), built.at('c'));
}

TEST(Variants, MissingForecasterNamed) {
  const auto cohort = data::synth_cohort(2, 2, 0.5, 5);
  try {
    build_variant(cohort, 'f', ForecasterSet{}, 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("brainlm_replicated.ckpt"), std::string::npos);
  }
}

TEST(Variants, ForecasterSetSaveLoad) {
  const auto dir = fs::temp_directory_path() / "icnf_fset";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto set = tiny_forecasters();
  set.lstm_replicated.reset();
  set.save(dir);
  const auto back = ForecasterSet::load(dir);
  EXPECT_TRUE(back.lstm_baseline.has_value());
  EXPECT_FALSE(back.lstm_replicated.has_value());
  EXPECT_TRUE(bitwise_equal(back.brainlm_replicated->params(), set.brainlm_replicated->params()));
  fs::remove_all(dir);
}

TEST(Splits, HoldoutRoundsHalfUpPerClass) {
  const auto l = labels(411, 95);
  const auto s = stratified_split(l, 0.1, 3);
  EXPECT_EQ(count(l, s.test, data::Label::kCN), 41u);
  EXPECT_EQ(count(l, s.test, data::Label::kAD), 10u);
  EXPECT_EQ(s.train.size() + s.test.size(), 506u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 506u);
}

TEST(Splits, HoldoutSeeded) {
  const auto l = labels(40, 12);
  EXPECT_EQ(stratified_split(l, 0.1, 1).test, stratified_split(l, 0.1, 1).test);
  EXPECT_NE(stratified_split(l, 0.1, 1).test, stratified_split(l, 0.1, 2).test);
  EXPECT_THROW(stratified_split(l, 0.0, 1), ConfigError);
}

TEST(Splits, KfoldBalancedAndDisjoint) {
  const auto l = labels(370, 85);
  const auto folds = kfold(l, 5, 9);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    EXPECT_EQ(count(l, f.test, data::Label::kAD), 17u);
    EXPECT_EQ(count(l, f.test, data::Label::kCN), 74u);
    EXPECT_EQ(f.train.size() + f.test.size(), l.size());
    for (std::size_t i : f.test) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), l.size());
}

TEST(Splits, KfoldUnevenClassesDifferByAtMostOne) {
  const auto l = labels(23, 7);
  const auto folds = kfold(l, 5, 1);
  std::size_t lo = 99, hi = 0;
  for (const auto& f : folds) {
    const std::size_t total = f.test.size();
    lo = std::min(lo, total);
    hi = std::max(hi, total);
  }
  EXPECT_LE(hi - lo, 1u);
  EXPECT_THROW(kfold(labels(10, 3), 5, 1), DataError);
  EXPECT_THROW(kfold(l, 1, 1), ConfigError);
}

TEST(Summary, MeanSampleStdAndPValue) {
  MatrixConfig cfg;
  cfg.reference = 'd';
  std::vector<CellResult> cells;
  const double a[] = {0.8, 0.8, 0.8, 0.6}, d[] = {0.7, 0.7, 0.7, 0.7};
  for (std::size_t i = 0; i < 4; ++i) {
    cells.push_back({'a', i, 0, a[i], 0});
    cells.push_back({'d', i, 0, d[i], 0});
  }
  const auto rows = summarize(cells, cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].mean_auc, 0.75, 1e-15);
  EXPECT_NEAR(rows[0].std_auc, 0.1, 1e-15);
  ASSERT_TRUE(rows[0].p_vs_ref.has_value());
  EXPECT_NEAR(*rows[0].p_vs_ref, 0.39100221895577053, 1e-12);  // diffs {.1,.1,.1,-.1}
  EXPECT_FALSE(rows[1].p_vs_ref.has_value());
  EXPECT_EQ(rows[1].std_auc, 0.0);
}

TEST(Summary, CsvRoundTrip) {
  const auto path = fs::temp_directory_path() / "icnf_manifest_rt.csv";
  const std::vector<CellResult> cells{{'a', 0, 1, 0.123456789012345678, 3}, {'f', 4, 4, 1.0, 0}};
  write_manifest_csv(path, cells);
  const auto back = read_manifest_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].auc, cells[0].auc);
  EXPECT_EQ(back[1].variant, 'f');
  fs::remove(path);
}

TEST(Matrix, CellsShareInitAcrossVariants) {
  const auto cohort = fixed_length_cohort(20, 8, 137, 1);
  auto cfg = tiny_matrix();
  std::optional<classify::TaLstm> best;
  const auto a = run_cell(cohort, 'a', 0, 1, cfg, &best);
  const auto b = run_cell(cohort, 'a', 0, 1, cfg);
  EXPECT_EQ(a, b);
  ASSERT_TRUE(best.has_value());
  EXPECT_GE(a.auc, 0.0);
  EXPECT_LE(a.auc, 1.0);
}

TEST(Matrix, RunWritesArtifactsAndResumes) {
  const auto dir = fs::temp_directory_path() / "icnf_matrix_run";
  fs::remove_all(dir);
  std::map<char, data::Cohort> variants{{'a', fixed_length_cohort(16, 8, 137, 1)},
                                        {'d', fixed_length_cohort(16, 8, 194, 1)}};
  const auto cfg = tiny_matrix();
  const auto result = run_matrix(variants, cfg, dir);
  ASSERT_EQ(result.cells.size(), 8u);
  EXPECT_EQ(result.cells.front().variant, 'a');
  EXPECT_EQ(result.cells.back().variant, 'd');
  for (const char* f : {"manifest.csv", "summary.csv", "run_manifest.json", "timing.csv",
                        "checkpoints/a_seed1_fold0.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "cells.partial.csv"));
  const std::string manifest = slurp(dir / "manifest.csv");
  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "variant,mean_auc,std,p_vs_ref");
  EXPECT_NE(summary.find("NA"), std::string::npos);

  // a completed run re-opened with the same hash reproduces the same files
  run_matrix(variants, cfg, dir);
  EXPECT_EQ(slurp(dir / "manifest.csv"), manifest);

  // resume: drop the final manifest, keep half the cells as a partial log
  {
    std::ofstream partial(dir / "cells.partial.csv");
    partial << "variant,seed,fold,auc,best_epoch\n";
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& c = result.cells[i];
      char auc[40];
      std::snprintf(auc, sizeof(auc), "%.17g", c.auc);
      partial << c.variant << ',' << c.seed << ',' << c.fold << ',' << auc << ',' << c.best_epoch << '\n';
    }
  }
  fs::remove(dir / "manifest.csv");
  {
    std::string json = slurp(dir / "run_manifest.json");
    json.replace(json.find("\"complete\""), 10, "\"partial\"");
    std::ofstream(dir / "run_manifest.json", std::ios::trunc) << json;
  }
  const auto resumed = run_matrix(variants, cfg, dir);
  EXPECT_EQ(resumed.cells, result.cells);
  EXPECT_EQ(slurp(dir / "manifest.csv"), manifest);

  auto other = cfg;
  other.config_hash = "ffffffffffffffff";
  EXPECT_THROW(run_matrix(variants, other, dir), ConfigError);
  fs::remove_all(dir);
}

TEST(Matrix, RejectsWrongLengthsAndMissingVariants) {
  const auto dir = fs::temp_directory_path() / "icnf_matrix_bad";
  std::map<char, data::Cohort> variants{{'a', fixed_length_cohort(16, 8, 141, 1)}};
  auto cfg = tiny_matrix();
  cfg.variants = "a";
  EXPECT_THROW(run_matrix(variants, cfg, dir), DataError);
  cfg.variants = "b";
  EXPECT_THROW(run_matrix(variants, cfg, dir), DataError);
  fs::remove_all(dir);
}
