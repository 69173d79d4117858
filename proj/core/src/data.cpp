#include "icnf/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "icnf/error.hpp"
#include "icnf/rng.hpp"

namespace icnf::data {

namespace {

constexpr char kSeriesMagic[4] = {'I', 'C', 'N', 'S'};
constexpr std::array<std::size_t, 10> kAffected = {1, 6, 10, 18, 27, 33, 40, 44, 46, 51};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::string_view label_name(Label label) { return label == Label::kAD ? "AD" : "CN"; }

Label parse_label(std::string_view text) {
  if (text == "CN") return Label::kCN;
  if (text == "AD") return Label::kAD;
  throw DataError("unknown label '" + std::string(text) + "'; allowed labels are {CN, AD}");
}

std::string_view domain_name(Domain domain) {
  switch (domain) {
    case Domain::kSubcortical: return "subcortical";
    case Domain::kAuditory: return "auditory";
    case Domain::kSensorimotor: return "sensorimotor";
    case Domain::kVisual: return "visual";
    case Domain::kCognitiveControl: return "cognitive-control";
    case Domain::kDefaultMode: return "default-mode";
    case Domain::kCerebellar: return "cerebellar";
  }
  return "unknown";
}

const std::array<std::pair<Domain, std::size_t>, 7>& domain_sizes() {
  static const std::array<std::pair<Domain, std::size_t>, 7> sizes = {{
      {Domain::kSubcortical, 5},
      {Domain::kAuditory, 2},
      {Domain::kSensorimotor, 9},
      {Domain::kVisual, 9},
      {Domain::kCognitiveControl, 17},
      {Domain::kDefaultMode, 7},
      {Domain::kCerebellar, 4},
  }};
  return sizes;
}

ChannelMeta channel_meta(std::size_t index) {
  std::size_t start = 0;
  for (const auto& [domain, count] : domain_sizes()) {
    if (index < start + count) return {index, domain};
    start += count;
  }
  throw DataError("channel index " + std::to_string(index) + " out of range [0, " +
                  std::to_string(kChannels) + ")");
}

Series::Series(std::size_t channels, std::size_t length)
    : channels_(channels), length_(length), values_(channels * length, 0.0) {}

Series::Series(std::size_t channels, std::size_t length, std::vector<double> values)
    : channels_(channels), length_(length), values_(std::move(values)) {
  if (values_.size() != channels * length) {
    throw DataError("series: " + std::to_string(channels) + "x" + std::to_string(length) + " needs " +
                    std::to_string(channels * length) + " values, got " + std::to_string(values_.size()));
  }
}

void validate_record(const IcnRecord& record, std::size_t expected_channels) {
  if (record.series.channels() != expected_channels) {
    throw DataError("subject " + record.subject_id + ": series has " +
                    std::to_string(record.series.channels()) + " channels, expected " +
                    std::to_string(expected_channels));
  }
  const auto values = record.series.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("subject " + record.subject_id + ": non-finite value at channel " +
                      std::to_string(i / record.series.length()) + ", t=" +
                      std::to_string(i % record.series.length()));
    }
  }
}

Cohort::Cohort(std::vector<IcnRecord> records, std::size_t expected_channels)
    : records_(std::move(records)), channels_(expected_channels) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    validate_record(r, expected_channels);
    if (!seen.insert(r.subject_id).second) throw DataError("duplicate subject_id '" + r.subject_id + "'");
  }
  std::sort(records_.begin(), records_.end(),
            [](const IcnRecord& a, const IcnRecord& b) { return a.subject_id < b.subject_id; });
}

std::size_t Cohort::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const IcnRecord& r) { return r.label == label; }));
}

std::vector<Label> Cohort::labels() const {
  std::vector<Label> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label);
  return out;
}

Cohort Cohort::subset(Label label) const {
  std::vector<IcnRecord> out;
  for (const auto& r : records_) {
    if (r.label == label) out.push_back(r);
  }
  return Cohort(std::move(out), channels_);
}

Cohort Cohort::subset(std::span<const std::size_t> indices) const {
  std::vector<IcnRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records_.at(i));
  return Cohort(std::move(out), channels_);
}

std::optional<std::size_t> Cohort::uniform_length() const {
  if (records_.empty()) return std::nullopt;
  const std::size_t t = records_.front().length();
  for (const auto& r : records_) {
    if (r.length() != t) return std::nullopt;
  }
  return t;
}

std::vector<std::uint8_t> encode_series(const Series& series) {
  std::vector<std::uint8_t> out(std::begin(kSeriesMagic), std::end(kSeriesMagic));
  for (std::uint32_t v : {static_cast<std::uint32_t>(series.channels()), static_cast<std::uint32_t>(series.length())}) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  out.reserve(out.size() + series.values().size() * 8);
  for (double x : series.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

Series decode_series(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kSeriesMagic), std::end(kSeriesMagic), bytes.begin())) {
    throw DataError("not a series file: bad magic (expected \"ICNS\")");
  }
  const std::size_t channels = read_u32(bytes, 4);
  const std::size_t length = read_u32(bytes, 8);
  if (bytes.size() != 12 + channels * length * 8) {
    throw DataError("series file size does not match its " + std::to_string(channels) + "x" +
                    std::to_string(length) + " header");
  }
  std::vector<double> values(channels * length);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[12 + i * 8 + b]) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return Series(channels, length, std::move(values));
}

Cohort load_cohort(const std::filesystem::path& dir, const LoadOptions& options) {
  const auto manifest_path = dir / "manifest.csv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw DataError("cannot open " + manifest_path.string());
  std::string line;
  if (!std::getline(manifest, line) || trim(line) != "subject_id,label,T,file") {
    throw DataError(manifest_path.string() + ": expected header 'subject_id,label,T,file'");
  }
  std::vector<IcnRecord> records;
  std::size_t line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw DataError(manifest_path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    IcnRecord record;
    record.subject_id = trim(fields[0]);
    record.label = parse_label(trim(fields[1]));
    std::size_t declared = 0;
    try {
      declared = std::stoul(trim(fields[2]));
    } catch (const std::exception&) {
      throw DataError("subject " + record.subject_id + ": T '" + fields[2] + "' is not an integer");
    }
    if (!options.allowed_lengths.empty() && !options.allowed_lengths.contains(declared)) {
      std::string allowed;
      for (std::size_t t : options.allowed_lengths) allowed += (allowed.empty() ? "" : ", ") + std::to_string(t);
      throw DataError("subject " + record.subject_id + ": T=" + std::to_string(declared) +
                      " not in declared set {" + allowed + "}");
    }
    record.series = decode_series(read_bytes(dir / trim(fields[3])));
    if (record.series.length() != declared) {
      throw DataError("subject " + record.subject_id + ": manifest T=" + std::to_string(declared) +
                      " but series file holds " + std::to_string(record.series.length()));
    }
    validate_record(record, options.channels);
    records.push_back(std::move(record));
  }
  return Cohort(std::move(records), options.channels);
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "series");
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw DataError("cannot write " + (dir / "manifest.csv").string());
  manifest << "subject_id,label,T,file\n";
  for (const auto& r : cohort.records()) {
    const std::string file = "series/" + r.subject_id + ".icns";
    manifest << r.subject_id << ',' << label_name(r.label) << ',' << r.length() << ',' << file << '\n';
    const auto bytes = encode_series(r.series);
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + (dir / file).string());
  }
}

IcnRecord zscore(const IcnRecord& record) {
  IcnRecord out = record;
  const std::size_t length = record.length();
  for (std::size_t c = 0; c < record.series.channels(); ++c) {
    auto x = out.series.channel(c);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(length);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(length));
    if (!(sd > 1e-12)) {
      throw DataError("subject " + record.subject_id + ": channel " + std::to_string(c) +
                      " is constant (std <= 1e-12), cannot z-score");
    }
    for (double& v : x) v = (v - mean) / sd;
  }
  return out;
}

Cohort zscore(const Cohort& cohort) {
  std::vector<IcnRecord> out;
  out.reserve(cohort.size());
  for (const auto& r : cohort.records()) out.push_back(zscore(r));
  return Cohort(std::move(out), cohort.channels());
}

std::span<const std::size_t> affected_channels() { return kAffected; }

std::array<double, 3> synth_periods(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "synth/periods"));
  std::array<double, 3> periods{};
  for (double& p : periods) p = rng.uniform(8.0, 32.0);
  return periods;
}

Cohort synth_cohort(const SynthOptions& options) {
  if (options.n_cn == 0 || options.n_ad == 0) throw DataError("synth_cohort: class counts must be > 0");
  if (!(options.t_regular_fraction >= 0.0 && options.t_regular_fraction <= 1.0)) {
    throw DataError("synth_cohort: t_regular_fraction must lie in [0, 1]");
  }
  const std::size_t n = options.n_cn + options.n_ad;
  std::vector<Label> labels(options.n_cn, Label::kCN);
  labels.insert(labels.end(), options.n_ad, Label::kAD);
  Rng assign(derive_seed(options.seed, "synth/assign"));
  std::shuffle(labels.begin(), labels.end(), assign.engine());
  std::vector<std::size_t> lengths(n, kExtendedLength);
  const auto n_regular = static_cast<std::size_t>(std::floor(options.t_regular_fraction * static_cast<double>(n) + 0.5));
  std::fill_n(lengths.begin(), std::min(n_regular, n), kRegularLength);
  std::shuffle(lengths.begin(), lengths.end(), assign.engine());

  const auto periods = synth_periods(options.seed);
  Rng phase_rng(derive_seed(options.seed, "synth/phases"));
  std::vector<std::array<double, 3>> base_phases(options.channels);
  for (auto& channel : base_phases) {
    for (double& p : channel) p = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<bool> affected(options.channels, false);
  for (std::size_t c : kAffected) {
    if (c < options.channels) affected[c] = true;
  }
  const double phi = options.ar_coefficient;
  const double stationary = 1.0 / std::sqrt(1.0 - phi * phi);

  std::vector<IcnRecord> records;
  records.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    char id[32];
    std::snprintf(id, sizeof(id), "sub-%04zu", s + 1);
    IcnRecord record{id, labels[s], Series(options.channels, lengths[s])};
    Rng rng(derive_seed(options.seed, id));
    const bool ad = labels[s] == Label::kAD;
    for (std::size_t c = 0; c < options.channels; ++c) {
      const bool shifted = ad && affected[c];
      const double amplitude = shifted ? options.ad_amplitude : 1.0;
      const double sigma = options.noise_std * (shifted ? std::sqrt(options.ad_noise_variance) : 1.0);
      std::array<double, 3> phases = base_phases[c];
      for (double& p : phases) p += options.phase_jitter * rng.normal();
      double noise = sigma * stationary * rng.normal();
      auto x = record.series.channel(c);
      for (std::size_t t = 0; t < x.size(); ++t) {
        if (t > 0) noise = phi * noise + sigma * rng.normal();
        double signal = 0.0;
        for (std::size_t k = 0; k < periods.size(); ++k) {
          signal += std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / periods[k] + phases[k]);
        }
        x[t] = amplitude * signal + noise;
      }
    }
    records.push_back(std::move(record));
  }
  return Cohort(std::move(records), options.channels);
}

Cohort synth_cohort(std::size_t n_cn, std::size_t n_ad, double t_regular_fraction, std::uint64_t seed) {
  SynthOptions options;
  options.n_cn = n_cn;
  options.n_ad = n_ad;
  options.t_regular_fraction = t_regular_fraction;
  options.seed = seed;
  return synth_cohort(options);
}

}  // namespace icnf::data
