#include "icnf/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "icnf/error.hpp"
#include "icnf/rng.hpp"

namespace icnf::config {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string& name, std::string_view text)> set;
  std::function<std::string()> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t parse_u64(const std::string& name, std::string_view text, std::uint64_t min) {
  const std::string t = trim(text);
  long long signed_value = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), signed_value);
  if (ec == std::errc() && p == t.data() + t.size() && signed_value < 0) {
    throw ConfigError(name + " must be an integer >= " + std::to_string(min) + ", got '" + t + "'");
  }
  std::uint64_t value = 0;
  auto [q, ec2] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec2 != std::errc() || q != t.data() + t.size() || t.empty()) {
    throw ConfigError(name + " must be an integer, got '" + t + "'");
  }
  if (value < min) throw ConfigError(name + " must be an integer >= " + std::to_string(min) + ", got '" + t + "'");
  return value;
}

double parse_double(const std::string& name, std::string_view text) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty() || !std::isfinite(value)) {
    throw ConfigError(name + " must be a finite number, got '" + t + "'");
  }
  return value;
}

bool parse_bool(const std::string& name, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(name + " must be true or false, got '" + t + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& name, std::string_view text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_u64(name, item, 0));
  return out;
}

template <class T>
Field count_field(std::string section, std::string key, T& target, std::uint64_t min) {
  return {section, key,
          [&target, min](const std::string& name, std::string_view v) { target = static_cast<T>(parse_u64(name, v, min)); },
          [&target] { return std::to_string(target); }};
}

Field real_field(std::string section, std::string key, double& target) {
  return {section, key, [&target](const std::string& name, std::string_view v) { target = parse_double(name, v); },
          [&target] { return fmt(target); }};
}

Field bool_field(std::string section, std::string key, bool& target) {
  return {section, key, [&target](const std::string& name, std::string_view v) { target = parse_bool(name, v); },
          [&target] { return std::string(target ? "true" : "false"); }};
}

Field text_field(std::string section, std::string key, std::string& target) {
  return {section, key, [&target](const std::string&, std::string_view v) { target = trim(v); },
          [&target] { return target; }};
}

std::vector<Field> fields(RunConfig& c) {
  using classify::AttentionMode;
  std::vector<Field> f;
  f.push_back(count_field("run", "seed", c.seed, 0));
  f.push_back(count_field("run", "threads", c.threads, 1));
  f.push_back(text_field("paths", "data", c.data_dir));
  f.push_back(text_field("paths", "out", c.out_dir));

  f.push_back(count_field("synth", "n_cn", c.synth.n_cn, 0));
  f.push_back(count_field("synth", "n_ad", c.synth.n_ad, 0));
  f.push_back(real_field("synth", "t_regular_fraction", c.synth.t_regular_fraction));
  f.push_back(real_field("synth", "ad_amplitude", c.synth.ad_amplitude));
  f.push_back(real_field("synth", "ad_noise_variance", c.synth.ad_noise_variance));
  f.push_back(real_field("synth", "ar_coefficient", c.synth.ar_coefficient));
  f.push_back(real_field("synth", "noise_std", c.synth.noise_std));
  f.push_back(real_field("synth", "phase_jitter", c.synth.phase_jitter));

  f.push_back(count_field("windows", "window", c.window, 2));
  f.push_back(count_field("windows", "step", c.step, 1));
  f.push_back(count_field("windows", "mask_denominator", c.mask_denominator, 2));

  f.push_back(count_field("forecast", "epochs", c.forecast_train.epochs, 1));
  f.push_back(count_field("forecast", "batch_size", c.forecast_train.batch_size, 1));
  f.push_back(real_field("forecast", "learning_rate", c.forecast_train.adam.lr));
  f.push_back(real_field("forecast", "train_fraction", c.forecast_train.train_fraction));
  f.push_back(bool_field("forecast", "split_by_subject", c.forecast_train.split_by_subject));
  f.push_back(count_field("forecast", "eval_batch_size", c.forecast_train.eval_batch_size, 1));

  f.push_back(count_field("lstm", "hidden", c.lstm.hidden, 1));
  f.push_back(real_field("lstm", "forget_bias", c.lstm.forget_bias));

  f.push_back(count_field("brainlm", "d_model", c.brainlm.d_model, 1));
  f.push_back(count_field("brainlm", "heads", c.brainlm.heads, 1));
  f.push_back(count_field("brainlm", "ff", c.brainlm.ff, 1));
  f.push_back(count_field("brainlm", "encoder_layers", c.brainlm.encoder_layers, 1));
  f.push_back(count_field("brainlm", "decoder_layers", c.brainlm.decoder_layers, 1));
  f.push_back(bool_field("brainlm", "masked_loss", c.brainlm.masked_loss));

  f.push_back(count_field("classify", "epochs", c.classify_train.epochs, 1));
  f.push_back(count_field("classify", "batch_size", c.classify_train.batch_size, 1));
  f.push_back(real_field("classify", "learning_rate", c.classify_train.adam.lr));
  f.push_back(count_field("classify", "eval_batch_size", c.classify_train.eval_batch_size, 1));
  f.push_back(count_field("classify", "hidden", c.classifier.hidden, 1));
  f.push_back(count_field("classify", "layers", c.classifier.layers, 1));
  f.push_back(real_field("classify", "forget_bias", c.classifier.forget_bias));
  f.push_back({"classify", "attention",
               [&c](const std::string&, std::string_view v) {
                 c.classifier.attention = classify::parse_attention_mode(trim(v));
               },
               [&c] { return std::string(classify::attention_mode_name(c.classifier.attention)); }});

  f.push_back({"experiment", "seeds",
               [&c](const std::string& name, std::string_view v) { c.matrix.seeds = parse_seeds(name, v); },
               [&c] {
                 std::string s;
                 for (auto seed : c.matrix.seeds) s += (s.empty() ? "" : ",") + std::to_string(seed);
                 return s;
               }});
  f.push_back(text_field("experiment", "variants", c.matrix.variants));
  f.push_back(real_field("experiment", "test_fraction", c.matrix.test_fraction));
  f.push_back(count_field("experiment", "folds", c.matrix.folds, 2));
  f.push_back({"experiment", "reference",
               [&c](const std::string& name, std::string_view v) {
                 const std::string t = trim(v);
                 if (t.size() != 1) throw ConfigError(name + " must be a single variant id a..f, got '" + t + "'");
                 c.matrix.reference = t[0];
               },
               [&c] { return std::string(1, c.matrix.reference); }});
  f.push_back({"experiment", "test",
               [&c](const std::string&, std::string_view v) { c.matrix.test = experiment::parse_test(trim(v)); },
               [&c] { return std::string(experiment::test_name(c.matrix.test)); }});
  f.push_back(bool_field("experiment", "save_checkpoints", c.matrix.save_checkpoints));

  f.push_back(count_field("interpret", "eval_batch_size", c.interpret_eval_batch, 1));
  return f;
}

}  // namespace

void finalize(RunConfig& c) {
  c.synth.seed = c.seed;
  c.synth.channels = data::kChannels;
  c.forecast_train.seed = c.seed;
  c.lstm.channels = data::kChannels;
  c.brainlm.channels = data::kChannels;
  c.brainlm.window = c.window;
  c.brainlm.mask_denominator = c.mask_denominator;
  if (c.mask_denominator != 0 && c.window >= c.mask_denominator) {
    c.lstm.context = c.context();
    c.lstm.horizon = c.horizon();
  }
  c.classifier.channels = data::kChannels;
  c.matrix.model = c.classifier;
  c.matrix.train = c.classify_train;
  c.matrix.threads = c.threads;
  validate(c);
}

void validate(const RunConfig& c) {
  auto fraction = [](const char* name, double v) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1), got " + fmt(v));
  };
  if (c.window % c.mask_denominator != 0) {
    throw ConfigError("windows.window (" + std::to_string(c.window) + ") must be divisible by windows.mask_denominator (" +
                      std::to_string(c.mask_denominator) + ")");
  }
  if (c.horizon() != windows::kTarget) {
    throw ConfigError("windows: forecast horizon window/mask_denominator = " + std::to_string(c.horizon()) +
                      "; the dataset variants (T=141/198) need exactly " + std::to_string(windows::kTarget));
  }
  if (c.window > data::kRegularLength) throw ConfigError("windows.window exceeds the shortest series length");
  if (c.synth.n_cn + c.synth.n_ad == 0) throw ConfigError("synth: cohort is empty");
  if (c.synth.t_regular_fraction < 0.0 || c.synth.t_regular_fraction > 1.0) {
    throw ConfigError("synth.t_regular_fraction must lie in [0, 1], got " + fmt(c.synth.t_regular_fraction));
  }
  if (c.synth.noise_std < 0.0 || c.synth.phase_jitter < 0.0 || c.synth.ad_noise_variance < 0.0 || c.synth.ad_amplitude < 0.0) {
    throw ConfigError("synth: amplitudes and noise levels must be non-negative");
  }
  if (std::abs(c.synth.ar_coefficient) >= 1.0) throw ConfigError("synth.ar_coefficient must satisfy |phi| < 1");
  fraction("forecast.train_fraction", c.forecast_train.train_fraction);
  fraction("experiment.test_fraction", c.matrix.test_fraction);
  if (!(c.forecast_train.adam.lr > 0.0)) throw ConfigError("forecast.learning_rate must be positive");
  if (!(c.classify_train.adam.lr > 0.0)) throw ConfigError("classify.learning_rate must be positive");
  if (c.brainlm.d_model % c.brainlm.heads != 0) {
    throw ConfigError("brainlm.d_model (" + std::to_string(c.brainlm.d_model) + ") must be divisible by brainlm.heads (" +
                      std::to_string(c.brainlm.heads) + ")");
  }
  if (c.matrix.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  if (std::set<std::uint64_t>(c.matrix.seeds.begin(), c.matrix.seeds.end()).size() != c.matrix.seeds.size()) {
    throw ConfigError("experiment.seeds contains duplicates");
  }
  if (c.matrix.variants.empty()) throw ConfigError("experiment.variants must select at least one variant");
  std::set<char> seen;
  for (char v : c.matrix.variants) {
    experiment::variant_spec(v);
    if (!seen.insert(v).second) throw ConfigError(std::string("experiment.variants lists '") + v + "' twice");
  }
  experiment::variant_spec(c.matrix.reference);
}

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  RunConfig config;
  auto table = fields(config);
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside any [section]");
    if (std::none_of(table.begin(), table.end(), [&](const Field& f) { return f.section == section; })) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError("config: unknown key '" + name + "'");
      it->set(name, value.data());
    }
  }
  finalize(config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string canonical_text(const RunConfig& config) {
  RunConfig copy = config;
  std::string out;
  for (const auto& f : fields(copy)) {
    if (f.section == "paths" || (f.section == "run" && f.key == "threads")) continue;  // do not affect results
    out += f.section + "." + f.key + "=" + f.get() + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(config))));
  return buf;
}

}  // namespace icnf::config
