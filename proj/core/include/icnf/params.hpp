#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icnf/rng.hpp"
#include "icnf/tensor.hpp"

namespace icnf {

/// Ordered collection of named tensors making up one model.
///
/// Trainable entries are leaves with `requires_grad`. Entries named `meta.*`
/// hold architecture metadata (head counts, channel counts); they ride along
/// in checkpoints but are never trainable.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor tensor);
  /// Adds a trainable tensor initialised uniform(-a, a) with a = 1/sqrt(fan_in).
  Tensor& add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor& add_constant(std::string name, Shape shape, double value);
  void set_meta(std::string_view key, double value);
  double meta(std::string_view key) const;

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  void zero_grad();
  std::size_t trainable_count() const;
  /// Deep copy; the clone shares no storage with this store.
  ParamStore clone() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

bool bitwise_equal(const ParamStore& a, const ParamStore& b);

// Checkpoint layout, all integers little-endian:
//   "ICNF" | version u32 | count u32 |
//   per entry: name_len u32, name bytes (UTF-8), rank u32, dims u32 x rank,
//              values f64 x prod(dims)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace icnf
