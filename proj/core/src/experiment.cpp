#include "icnf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "icnf/error.hpp"
#include "icnf/metrics.hpp"
#include "icnf/rng.hpp"
#include "icnf/windows.hpp"
#include "json.hpp"

namespace icnf::experiment {

namespace fs = std::filesystem;
using forecast::Forecaster;
using forecast::ForecasterKind;

namespace {

constexpr std::array<VariantSpec, 6> kVariants{{
    {'a', "baseline", data::kRegularLength, false, std::nullopt},
    {'b', "baseline+lstm", data::kRegularLength + windows::kTarget, false, ForecasterKind::kLstm},
    {'c', "baseline+brainlm", data::kRegularLength + windows::kTarget, false, ForecasterKind::kBrainLm},
    {'d', "replication", data::kExtendedLength, true, std::nullopt},
    {'e', "replication+lstm", data::kExtendedLength + windows::kTarget, true, ForecasterKind::kLstm},
    {'f', "replication+brainlm", data::kExtendedLength + windows::kTarget, true, ForecasterKind::kBrainLm},
}};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell_key(char v, std::uint64_t seed, std::size_t fold) {
  return std::string(1, v) + "_seed" + std::to_string(seed) + "_fold" + std::to_string(fold);
}

std::vector<std::size_t> gather(std::span<const std::size_t> map, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(map[i]);
  return out;
}

std::vector<std::size_t> class_members(std::span<const data::Label> labels, data::Label label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

}  // namespace

const std::array<VariantSpec, 6>& variant_specs() { return kVariants; }

const VariantSpec& variant_spec(char id) {
  for (const auto& v : kVariants) {
    if (v.id == id) return v;
  }
  throw ConfigError(std::string("unknown dataset variant '") + id + "'; expected one of a..f");
}

std::string forecaster_filename(ForecasterKind kind, bool replicated) {
  return std::string(forecast::kind_name(kind)) + (replicated ? "_replicated" : "_baseline") + ".ckpt";
}

const std::optional<Forecaster>& ForecasterSet::get(ForecasterKind kind, bool replicated) const {
  if (kind == ForecasterKind::kLstm) return replicated ? lstm_replicated : lstm_baseline;
  return replicated ? brainlm_replicated : brainlm_baseline;
}

std::optional<Forecaster>& ForecasterSet::get(ForecasterKind kind, bool replicated) {
  if (kind == ForecasterKind::kLstm) return replicated ? lstm_replicated : lstm_baseline;
  return replicated ? brainlm_replicated : brainlm_baseline;
}

ForecasterSet ForecasterSet::load(const fs::path& dir) {
  ForecasterSet set;
  for (auto kind : {ForecasterKind::kLstm, ForecasterKind::kBrainLm}) {
    for (bool rep : {false, true}) {
      const fs::path path = dir / forecaster_filename(kind, rep);
      if (fs::exists(path)) set.get(kind, rep) = Forecaster::load(path);
    }
  }
  return set;
}

void ForecasterSet::save(const fs::path& dir) const {
  fs::create_directories(dir);
  for (auto kind : {ForecasterKind::kLstm, ForecasterKind::kBrainLm}) {
    for (bool rep : {false, true}) {
      if (const auto& f = get(kind, rep)) f->save(dir / forecaster_filename(kind, rep));
    }
  }
}

data::Cohort base_series(const data::Cohort& cohort, bool replicated) {
  return replicated ? windows::replicate(cohort, data::kExtendedLength) : windows::truncate(cohort, data::kRegularLength);
}

data::Cohort build_variant(const data::Cohort& cohort, char id, const ForecasterSet& forecasters, std::uint64_t seed) {
  const VariantSpec& spec = variant_spec(id);
  const Forecaster* model = nullptr;
  if (spec.forecaster) {
    const auto& slot = forecasters.get(*spec.forecaster, spec.replicated);
    if (!slot) {
      throw DataError(std::string("variant ") + id + " needs the " + forecaster_filename(*spec.forecaster, spec.replicated) +
                      " checkpoint; produce it with `icnf train-forecaster`");
    }
    model = &*slot;
  }
  data::Cohort out = base_series(cohort, spec.replicated);
  if (model) {
    out = forecast::extend_series(out, *model, model->horizon(),
                                  derive_seed(seed, std::string("variant/") + id));
  }
  for (const auto& r : out.records()) {
    if (r.length() != spec.length) {
      throw DataError(std::string("variant ") + id + ": subject " + r.subject_id + " has T=" +
                      std::to_string(r.length()) + ", expected " + std::to_string(spec.length));
    }
  }
  return out;
}

Split stratified_split(std::span<const data::Label> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1), got " + fmt_double(test_fraction));
  }
  const auto min_members = static_cast<std::size_t>(std::ceil(1.0 / test_fraction));
  Split split;
  for (auto label : {data::Label::kCN, data::Label::kAD}) {
    auto members = class_members(labels, label);
    const std::size_t n = members.size();
    if (n < min_members) {
      throw DataError("stratified_split: class " + std::string(data::label_name(label)) + " has " +
                      std::to_string(n) + " subjects; test_fraction " + fmt_double(test_fraction) + " needs >= " +
                      std::to_string(min_members));
    }
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 0.5));
    if (n_test >= n) {
      throw DataError("stratified_split: class " + std::string(data::label_name(label)) +
                      " would have no training subjects");
    }
    Rng rng(derive_seed(seed, "split/" + std::string(data::label_name(label))));
    std::shuffle(members.begin(), members.end(), rng.engine());
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<long>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<long>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<Split> kfold(std::span<const data::Label> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2, got " + std::to_string(k));
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t offset = 0;
  for (auto label : {data::Label::kCN, data::Label::kAD}) {
    auto members = class_members(labels, label);
    if (members.size() < k) {
      throw DataError("kfold: class " + std::string(data::label_name(label)) + " has " +
                      std::to_string(members.size()) + " subjects, fewer than k=" + std::to_string(k));
    }
    Rng rng(derive_seed(seed, "kfold/" + std::string(data::label_name(label))));
    std::shuffle(members.begin(), members.end(), rng.engine());
    for (std::size_t j = 0; j < members.size(); ++j) fold_of[members[j]] = (offset + j) % k;
    offset = (offset + members.size()) % k;
  }
  std::vector<Split> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

std::string_view test_name(SignificanceTest test) {
  return test == SignificanceTest::kWilcoxon ? "wilcoxon" : "ttest";
}

SignificanceTest parse_test(std::string_view text) {
  if (text == "ttest") return SignificanceTest::kPairedT;
  if (text == "wilcoxon") return SignificanceTest::kWilcoxon;
  throw ConfigError("unknown significance test '" + std::string(text) + "'; expected ttest or wilcoxon");
}

CellResult run_cell(const data::Cohort& variant, char id, std::uint64_t seed, std::size_t fold,
                    const MatrixConfig& config, std::optional<classify::TaLstm>* best_out) {
  const auto labels = variant.labels();
  const Split split = stratified_split(labels, config.test_fraction, derive_seed(seed, "holdout"));
  std::vector<data::Label> tv_labels;
  for (std::size_t i : split.train) tv_labels.push_back(labels[i]);
  const auto folds = kfold(tv_labels, config.folds, derive_seed(seed, "folds"));
  if (fold >= folds.size()) throw ConfigError("fold index out of range");

  const auto train_idx = gather(split.train, folds[fold].train);
  const auto val_idx = gather(split.train, folds[fold].test);

  classify::TaLstmConfig model_config = config.model;
  model_config.channels = variant.channels();
  if (model_config.attention == classify::AttentionMode::kLiteral) {
    model_config.literal_length = variant.uniform_length().value_or(0);
  }
  // Initial weights and batch order depend on (seed, fold) only, so the
  // variants compared in one cell start from the same state.
  const std::string stream = "cell/" + std::to_string(fold);
  const classify::TaLstm init(model_config, derive_seed(seed, stream + "/init"));
  classify::ClassifierTrainConfig train_config = config.train;
  train_config.seed = derive_seed(seed, stream + "/train");

  auto trained = classify::train_classifier(init, variant.subset(train_idx), variant.subset(val_idx), train_config);
  const data::Cohort test = variant.subset(split.test);
  std::vector<int> test_labels;
  for (const auto& r : test.records()) test_labels.push_back(r.label == data::Label::kAD ? 1 : 0);
  const auto probs = classify::predict(trained.best, test, config.train.eval_batch_size);

  CellResult cell{id, seed, fold, metrics::auc(probs, test_labels), trained.best_epoch};
  if (best_out) *best_out = std::move(trained.best);
  return cell;
}

std::vector<SummaryRow> summarize(std::span<const CellResult> cells, const MatrixConfig& config) {
  std::map<char, std::vector<CellResult>> by_variant;
  for (const auto& c : cells) by_variant[c.variant].push_back(c);
  auto order = [](const CellResult& a, const CellResult& b) {
    return std::tie(a.seed, a.fold) < std::tie(b.seed, b.fold);
  };
  for (auto& [v, list] : by_variant) std::sort(list.begin(), list.end(), order);

  auto aucs = [](const std::vector<CellResult>& list) {
    std::vector<double> out;
    for (const auto& c : list) out.push_back(c.auc);
    return out;
  };
  const auto ref_it = by_variant.find(config.reference);

  std::vector<SummaryRow> rows;
  for (const auto& [v, list] : by_variant) {
    const auto x = aucs(list);
    SummaryRow row{v, 0.0, 0.0, std::nullopt, x.size()};
    row.mean_auc = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    if (x.size() > 1) {
      double ss = 0.0;
      for (double a : x) ss += (a - row.mean_auc) * (a - row.mean_auc);
      row.std_auc = std::sqrt(ss / static_cast<double>(x.size() - 1));
    }
    if (v != config.reference && ref_it != by_variant.end() && ref_it->second.size() == list.size() &&
        list.size() >= 2) {
      const auto ref = aucs(ref_it->second);
      const auto result = config.test == SignificanceTest::kWilcoxon ? metrics::wilcoxon_signed_rank(x, ref)
                                                                     : metrics::paired_ttest(x, ref);
      if (result.defined) row.p_vs_ref = result.p_value;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_manifest_csv(const fs::path& path, std::span<const CellResult> cells) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "variant,seed,fold,auc\n";
  for (const auto& c : cells) out << c.variant << ',' << c.seed << ',' << c.fold << ',' << fmt_double(c.auc) << '\n';
}

std::vector<CellResult> read_manifest_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<CellResult> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() < 4 || fields[0].size() != 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    CellResult c;
    c.variant = fields[0][0];
    c.seed = std::stoull(fields[1]);
    c.fold = std::stoull(fields[2]);
    c.auc = std::stod(fields[3]);
    if (fields.size() > 4) c.best_epoch = std::stoull(fields[4]);
    cells.push_back(c);
  }
  return cells;
}

void write_summary_csv(const fs::path& path, std::span<const SummaryRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "variant,mean_auc,std,p_vs_ref\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << fmt_double(r.mean_auc) << ',' << fmt_double(r.std_auc) << ','
        << (r.p_vs_ref ? fmt_double(*r.p_vs_ref) : std::string("NA")) << '\n';
  }
}

namespace {

struct Job {
  char variant;
  std::uint64_t seed;
  std::size_t fold;
};

void write_run_manifest(const fs::path& path, const MatrixConfig& config, std::string_view status,
                        std::span<const CellResult> cells) {
  nlohmann::ordered_json j;
  j["config_hash"] = config.config_hash;
  j["status"] = status;
  j["seeds"] = config.seeds;
  j["variants"] = config.variants;
  j["folds"] = config.folds;
  j["reference"] = std::string(1, config.reference);
  j["test"] = test_name(config.test);
  j["completed_cells"] = cells.size();
  auto& ckpts = j["checkpoints"] = nlohmann::ordered_json::array();
  if (config.save_checkpoints) {
    for (const auto& c : cells) ckpts.push_back("checkpoints/" + cell_key(c.variant, c.seed, c.fold) + ".ckpt");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

MatrixResult run_matrix(const std::map<char, data::Cohort>& variants, const MatrixConfig& config,
                        const fs::path& run_dir) {
  if (config.seeds.empty()) throw ConfigError("run_matrix: no seeds configured");
  if (config.variants.empty()) throw ConfigError("run_matrix: no variants selected");
  for (char v : config.variants) {
    const auto& spec = variant_spec(v);
    const auto it = variants.find(v);
    if (it == variants.end()) {
      throw DataError(std::string("run_matrix: variant ") + v + " not built; run `icnf build-variants` first");
    }
    if (it->second.uniform_length() != spec.length) {
      throw DataError(std::string("run_matrix: variant ") + v + " records are not all T=" +
                      std::to_string(spec.length));
    }
  }

  fs::create_directories(run_dir);
  if (config.save_checkpoints) fs::create_directories(run_dir / "checkpoints");
  const fs::path run_manifest = run_dir / "run_manifest.json";
  const fs::path partial = run_dir / "cells.partial.csv";

  std::vector<CellResult> cells;
  if (fs::exists(run_manifest)) {
    nlohmann::json prior;
    std::ifstream(run_manifest) >> prior;
    if (prior.value("config_hash", std::string()) != config.config_hash) {
      throw ConfigError("run directory " + run_dir.string() + " belongs to config " +
                        prior.value("config_hash", std::string("?")) + "; use a fresh --out");
    }
    if (prior.value("status", std::string()) == "complete" && fs::exists(run_dir / "manifest.csv")) {
      cells = read_manifest_csv(run_dir / "manifest.csv");
    } else if (fs::exists(partial)) {
      cells = read_manifest_csv(partial);
    }
  }
  std::set<std::tuple<char, std::uint64_t, std::size_t>> done;
  for (const auto& c : cells) done.emplace(c.variant, c.seed, c.fold);

  std::vector<Job> jobs;
  for (char v : config.variants) {
    for (auto seed : config.seeds) {
      for (std::size_t f = 0; f < config.folds; ++f) {
        if (!done.contains({v, seed, f})) jobs.push_back({v, seed, f});
      }
    }
  }
  write_run_manifest(run_manifest, config, "partial", cells);

  if (!jobs.empty()) {
    const bool fresh_partial = !fs::exists(partial);
    std::ofstream partial_out(partial, std::ios::app);
    std::ofstream timing_out(run_dir / "timing.csv", std::ios::app);
    if (fresh_partial) partial_out << "variant,seed,fold,auc,best_epoch\n";
    if (timing_out.tellp() == 0) timing_out << "variant,seed,fold,seconds\n";

    std::mutex writer;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    auto worker = [&] {
      for (std::size_t j = next++; j < jobs.size() && !failed; j = next++) {
        const Job& job = jobs[j];
        try {
          const auto t0 = std::chrono::steady_clock::now();
          std::optional<classify::TaLstm> best;
          const CellResult cell = run_cell(variants.at(job.variant), job.variant, job.seed, job.fold, config, &best);
          if (config.save_checkpoints) {
            save_checkpoint(run_dir / "checkpoints" / (cell_key(job.variant, job.seed, job.fold) + ".ckpt"),
                            best->params());
          }
          const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          std::lock_guard lock(writer);
          partial_out << cell.variant << ',' << cell.seed << ',' << cell.fold << ',' << fmt_double(cell.auc) << ','
                      << cell.best_epoch << '\n'
                      << std::flush;
          timing_out << cell.variant << ',' << cell.seed << ',' << cell.fold << ',' << seconds << '\n' << std::flush;
          cells.push_back(cell);
        } catch (...) {
          std::lock_guard lock(writer);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.threads, jobs.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) {
      write_run_manifest(run_manifest, config, "partial", cells);
      std::rethrow_exception(error);
    }
  }

  std::sort(cells.begin(), cells.end(), [&](const CellResult& a, const CellResult& b) {
    return std::tie(a.variant, a.seed, a.fold) < std::tie(b.variant, b.seed, b.fold);
  });
  MatrixResult result{cells, summarize(cells, config)};
  write_manifest_csv(run_dir / "manifest.csv", result.cells);
  write_summary_csv(run_dir / "summary.csv", result.summary);
  write_run_manifest(run_manifest, config, "complete", result.cells);
  fs::remove(partial);
  return result;
}

}  // namespace icnf::experiment
