#include "icnf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include "icnf/error.hpp"
#include "icnf/rng.hpp"
#include "json.hpp"

namespace icnf::pipeline {

namespace {

std::string job_name(const ForecasterJob& job) {
  return std::string(forecast::kind_name(job.kind)) + (job.replicated ? "_replicated" : "_baseline");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<fs::path> cohort_files(const fs::path& dir) {
  std::vector<fs::path> files{dir / "manifest.csv"};
  for (const auto& entry : fs::directory_iterator(dir / "series")) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex guard;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(guard);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

void write_stage_manifest(const fs::path& dir, std::string_view stage, const config::RunConfig& config,
                          const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = config::config_hash(config);
  j["seed"] = config.seed;
  auto& files = j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& path : outputs) {
    files.push_back({{"file", fs::relative(path, dir).generic_string()}, {"fnv1a", file_hash(path)}});
  }
  std::ofstream out(dir / (std::string(stage) + ".stage.json"), std::ios::trunc);
  if (!out) throw Error("cannot write stage manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

data::Cohort require_cohort(const fs::path& dir, std::string_view producer, const data::LoadOptions& options) {
  if (!fs::exists(dir / "manifest.csv")) {
    throw DataError("no cohort found at " + dir.string() + " (missing manifest.csv); produce it with `icnf " +
                    std::string(producer) + "`");
  }
  return data::load_cohort(dir, options);
}

data::Cohort synth(const config::RunConfig& config, const fs::path& out) {
  data::Cohort cohort = data::synth_cohort(config.synth);
  data::save_cohort(cohort, out);
  write_stage_manifest(out, "synth", config, cohort_files(out));
  return cohort;
}

data::Cohort prep(const data::Cohort& raw, const config::RunConfig& config, const fs::path& out) {
  data::Cohort cohort = data::zscore(raw);
  data::save_cohort(cohort, out);
  write_stage_manifest(out, "prep", config, cohort_files(out));
  return cohort;
}

std::vector<ForecasterJob> all_forecaster_jobs() {
  return {{forecast::ForecasterKind::kLstm, false},
          {forecast::ForecasterKind::kBrainLm, false},
          {forecast::ForecasterKind::kLstm, true},
          {forecast::ForecasterKind::kBrainLm, true}};
}

forecast::Forecaster make_forecaster(forecast::ForecasterKind kind, const config::RunConfig& config,
                                     std::uint64_t seed) {
  if (kind == forecast::ForecasterKind::kLstm) return forecast::LstmForecaster(config.lstm, seed);
  return forecast::BrainLm(config.brainlm, seed);
}

std::vector<ForecasterReport> train_forecasters(const data::Cohort& prepped, const config::RunConfig& config,
                                                const std::vector<ForecasterJob>& jobs, const fs::path& out) {
  fs::create_directories(out);
  std::vector<ForecasterReport> reports(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const ForecasterJob& job = jobs[i];
    const std::string name = job_name(job);
    const auto batch = windows::slide(experiment::base_series(prepped, job.replicated), config.window, config.step,
                                      config.context());
    auto train_config = config.forecast_train;
    train_config.seed = derive_seed(config.seed, "forecaster/" + name + "/train");
    auto result = forecast::train_forecaster(make_forecaster(job.kind, config, derive_seed(config.seed, "forecaster/" + name)),
                                             batch, train_config);
    result.model.save(out / (name + ".ckpt"));
    std::ofstream metrics(out / (name + ".metrics.csv"), std::ios::trunc);
    metrics << "epoch,train_loss,val_mse\n";
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
      metrics << e << ',' << fmt(result.train_loss[e]) << ',' << fmt(result.val_mse[e]) << '\n';
    }
    reports[i] = {job, result.val_mse.back(), result.hold_baseline_mse, result.train_windows, result.val_windows};
  });

  std::ofstream summary(out / "forecasters.csv", std::ios::trunc);
  summary << "model,family,val_mse,hold_baseline_mse,ratio,train_windows,val_windows\n";
  std::vector<fs::path> files{out / "forecasters.csv"};
  for (const auto& r : reports) {
    summary << forecast::kind_name(r.job.kind) << ',' << (r.job.replicated ? "replicated" : "baseline") << ','
            << fmt(r.val_mse) << ',' << fmt(r.hold_baseline_mse) << ',' << fmt(r.val_mse / r.hold_baseline_mse) << ','
            << r.train_windows << ',' << r.val_windows << '\n';
    files.push_back(out / (job_name(r.job) + ".ckpt"));
    files.push_back(out / (job_name(r.job) + ".metrics.csv"));
  }
  summary.close();
  write_stage_manifest(out, "train-forecaster", config, files);
  return reports;
}

data::Cohort extend(const data::Cohort& cohort, const forecast::Forecaster& model, const config::RunConfig& config,
                    const fs::path& out) {
  data::Cohort extended = forecast::extend_series(cohort, model, model.horizon(), derive_seed(config.seed, "extend"));
  data::save_cohort(extended, out);
  write_stage_manifest(out, "extend", config, cohort_files(out));
  return extended;
}

fs::path variant_dir(const fs::path& root, char id) { return root / (std::string("variant_") + id); }

std::map<char, data::Cohort> build_variants(const data::Cohort& prepped, const experiment::ForecasterSet& forecasters,
                                            const config::RunConfig& config, const fs::path& out) {
  std::map<char, data::Cohort> built;
  std::vector<fs::path> files;
  for (char id : config.matrix.variants) {
    auto cohort = experiment::build_variant(prepped, id, forecasters, config.seed);
    const fs::path dir = variant_dir(out, id);
    data::save_cohort(cohort, dir);
    for (auto& f : cohort_files(dir)) files.push_back(f);
    built.emplace(id, std::move(cohort));
  }
  write_stage_manifest(out, "build-variants", config, files);
  return built;
}

std::map<char, data::Cohort> load_variants(const fs::path& dir, std::string_view ids) {
  std::map<char, data::Cohort> out;
  for (char id : ids) {
    data::LoadOptions options;
    options.allowed_lengths = {experiment::variant_spec(id).length};
    out.emplace(id, require_cohort(variant_dir(dir, id), "build-variants", options));
  }
  return out;
}

classify::ClassifierTrainResult train_classifier(const data::Cohort& variant, const config::RunConfig& config,
                                                 const fs::path& ckpt) {
  const auto length = variant.uniform_length();
  if (!length) throw DataError("train-classifier: records differ in length; pass a variant directory");
  const std::uint64_t seed = config.matrix.seeds.front();
  const auto labels = variant.labels();
  const auto split = experiment::stratified_split(labels, config.matrix.test_fraction, derive_seed(seed, "holdout"));
  std::vector<data::Label> tv_labels;
  for (std::size_t i : split.train) tv_labels.push_back(labels[i]);
  const auto folds = experiment::kfold(tv_labels, config.matrix.folds, derive_seed(seed, "folds"));
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i : folds[0].train) train_idx.push_back(split.train[i]);
  for (std::size_t i : folds[0].test) val_idx.push_back(split.train[i]);

  auto model_config = config.classifier;
  model_config.literal_length = *length;
  auto train_config = config.classify_train;
  train_config.seed = derive_seed(seed, "cell/0/train");
  const classify::TaLstm init(model_config, derive_seed(seed, "cell/0/init"));
  auto result = classify::train_classifier(init, variant.subset(train_idx), variant.subset(val_idx), train_config);

  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, result.best.params());
  fs::path metrics = ckpt;
  metrics.replace_extension(".metrics.csv");
  classify::write_metrics_csv(metrics, result);
  write_stage_manifest(ckpt.has_parent_path() ? ckpt.parent_path() : fs::path("."), "train-classifier", config,
                       {ckpt, metrics});
  return result;
}

experiment::MatrixResult run_matrix(const std::map<char, data::Cohort>& variants, const config::RunConfig& config,
                                    const fs::path& out) {
  auto matrix = config.matrix;
  matrix.config_hash = config::config_hash(config);
  auto result = experiment::run_matrix(variants, matrix, out);
  write_stage_manifest(out, "run-matrix", config, {out / "manifest.csv", out / "summary.csv"});
  return result;
}

interpret::SensitivityTable interpret(const forecast::BrainLm& model, const data::Cohort& cohort,
                                      const config::RunConfig& config, const fs::path& csv) {
  auto table = interpret::sensitivity_table(model, cohort, config.threads, config.interpret_eval_batch);
  const fs::path dir = csv.has_parent_path() ? csv.parent_path() : fs::path(".");
  fs::create_directories(dir);
  interpret::write_sensitivity_csv(csv, table);
  write_stage_manifest(dir, "interpret", config, {csv});
  return table;
}

}  // namespace icnf::pipeline
