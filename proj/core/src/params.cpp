#include "icnf/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "icnf/error.hpp"

namespace icnf {

namespace {

constexpr std::string_view kMetaPrefix = "meta.";
constexpr char kMagic[4] = {'I', 'C', 'N', 'F'};

bool is_meta(std::string_view name) { return name.starts_with(kMetaPrefix); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  double f64() {
    auto s = take(8, "values");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor& ParamStore::add(std::string name, Tensor tensor) {
  if (contains(name)) throw Error("duplicate parameter name '" + name + "'");
  if (!tensor.defined()) throw Error("parameter '" + name + "' is undefined");
  entries_.emplace_back(std::move(name), std::move(tensor));
  return entries_.back().second;
}

Tensor& ParamStore::add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(std::move(name), Tensor(std::move(shape), std::move(values), true));
}

Tensor& ParamStore::add_constant(std::string name, Shape shape, double value) {
  return add(std::move(name), Tensor::full(std::move(shape), value, true));
}

void ParamStore::set_meta(std::string_view key, double value) {
  const std::string name = std::string(kMetaPrefix) + std::string(key);
  if (contains(name)) {
    at(name).mutable_values()[0] = value;
  } else {
    add(name, Tensor({1}, {value}));
  }
}

double ParamStore::meta(std::string_view key) const {
  const std::string name = std::string(kMetaPrefix) + std::string(key);
  if (!contains(name)) throw FormatError("checkpoint lacks metadata '" + name + "'");
  return at(name).values()[0];
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& ParamStore::at(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamStore::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

std::size_t ParamStore::trainable_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return e.second.requires_grad(); }));
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : entries_) out.add(name, t.detach(t.requires_grad()));
  return out;
}

bool bitwise_equal(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
    auto va = ia->second.values();
    auto vb = ib->second.values();
    if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

ParamStore decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("not a checkpoint: bad magic (expected \"ICNF\")");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("count");
  ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.u32("name length");
    auto name_bytes = in.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = in.u32("rank");
    Shape shape(rank);
    for (auto& d : shape) d = in.u32("dims");
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = in.f64();
    const bool trainable = !is_meta(name);
    params.add(std::move(name), Tensor(std::move(shape), std::move(values), trainable));
  }
  if (!in.done()) throw FormatError("checkpoint has trailing bytes");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  const auto bytes = encode_checkpoint(params);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace icnf
