#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icnf::data {

inline constexpr std::size_t kChannels = 53;
inline constexpr std::size_t kRegularLength = 137;
inline constexpr std::size_t kExtendedLength = 194;

enum class Label { kCN, kAD };

std::string_view label_name(Label label);
/// Parses "CN"/"AD"; anything else throws DataError listing the allowed labels.
Label parse_label(std::string_view text);
inline double label_value(Label label) { return label == Label::kAD ? 1.0 : 0.0; }

enum class Domain {
  kSubcortical,
  kAuditory,
  kSensorimotor,
  kVisual,
  kCognitiveControl,
  kDefaultMode,
  kCerebellar,
};

struct ChannelMeta {
  std::size_t index;
  Domain domain;
};

std::string_view domain_name(Domain domain);
/// Component counts per domain, in channel order.
const std::array<std::pair<Domain, std::size_t>, 7>& domain_sizes();
ChannelMeta channel_meta(std::size_t index);

/// Channel-major [channels][length] matrix of IC activations.
class Series {
 public:
  Series() = default;
  Series(std::size_t channels, std::size_t length);
  Series(std::size_t channels, std::size_t length, std::vector<double> values);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  double at(std::size_t channel, std::size_t t) const { return values_[channel * length_ + t]; }
  double& at(std::size_t channel, std::size_t t) { return values_[channel * length_ + t]; }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(values_).subspan(c * length_, length_);
  }
  std::span<double> channel(std::size_t c) { return std::span<double>(values_).subspan(c * length_, length_); }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Series&, const Series&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> values_;
};

struct IcnRecord {
  std::string subject_id;
  Label label = Label::kCN;
  Series series;

  std::size_t length() const { return series.length(); }
  friend bool operator==(const IcnRecord&, const IcnRecord&) = default;
};

/// Checks channel count and finiteness; throws DataError naming the subject.
void validate_record(const IcnRecord& record, std::size_t expected_channels = kChannels);

/// Immutable, subject-id ordered set of records.
class Cohort {
 public:
  Cohort() = default;
  /// Validates every record, rejects duplicate ids, and sorts by subject id.
  explicit Cohort(std::vector<IcnRecord> records, std::size_t expected_channels = kChannels);

  const std::vector<IcnRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const IcnRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t count(Label label) const;
  std::size_t channels() const { return channels_; }
  std::vector<Label> labels() const;
  /// Records with the given label, in cohort order.
  Cohort subset(Label label) const;
  Cohort subset(std::span<const std::size_t> indices) const;
  /// Common length of all records, or nullopt if lengths differ.
  std::optional<std::size_t> uniform_length() const;

  friend bool operator==(const Cohort&, const Cohort&) = default;

 private:
  std::vector<IcnRecord> records_;
  std::size_t channels_ = kChannels;
};

struct LoadOptions {
  /// Admissible series lengths; empty accepts any length.
  std::set<std::size_t> allowed_lengths{kRegularLength, kExtendedLength};
  std::size_t channels = kChannels;
};

// On-disk layout: DIR/manifest.csv with header "subject_id,label,T,file" and one
// series file per subject. Series files: "ICNS" | channels u32 | length u32 |
// f64 little-endian values, channel-major.
Cohort load_cohort(const std::filesystem::path& dir, const LoadOptions& options = {});
void save_cohort(const Cohort& cohort, const std::filesystem::path& dir);

std::vector<std::uint8_t> encode_series(const Series& series);
Series decode_series(std::span<const std::uint8_t> bytes);

/// Per-channel z-score with population standard deviation.
/// Throws DataError naming the channel when its std is <= 1e-12.
IcnRecord zscore(const IcnRecord& record);
Cohort zscore(const Cohort& cohort);

struct SynthOptions {
  std::size_t n_cn = 411;
  std::size_t n_ad = 95;
  double t_regular_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t channels = kChannels;
  double ad_amplitude = 0.6;
  double ad_noise_variance = 1.5;
  double ar_coefficient = 0.5;
  double noise_std = 0.5;
  /// Std (radians) of each subject's deviation from the cohort's per-channel phases.
  double phase_jitter = 0.3;
};

/// Channels whose amplitude/noise differ between classes in synthetic cohorts.
std::span<const std::size_t> affected_channels();

/// Sinusoid periods (in timestamps) shared by every subject of a cohort.
std::array<double, 3> synth_periods(std::uint64_t seed);

/// Seeded stand-in for ICN time courses: three sinusoids whose per-channel
/// phases are shared by the cohort up to a per-subject jitter, plus AR(1)
/// noise. AD subjects have attenuated sinusoid amplitude and inflated noise
/// variance on `affected_channels()`.
Cohort synth_cohort(const SynthOptions& options);
Cohort synth_cohort(std::size_t n_cn, std::size_t n_ad, double t_regular_fraction, std::uint64_t seed);

}  // namespace icnf::data
