#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "icnf/error.hpp"
#include "icnf/params.hpp"

using namespace icnf;

namespace {

ParamStore sample_store() {
  Rng rng(3);
  ParamStore p;
  p.add_uniform("w", {3, 2}, 3, rng);
  p.add_constant("b", {2}, 0.5);
  p.set_meta("channels", 53);
  return p;
}

}  // namespace

TEST(Params, MetaIsNotTrainable) {
  const ParamStore p = sample_store();
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.trainable_count(), 2u);
  EXPECT_DOUBLE_EQ(p.meta("channels"), 53.0);
  EXPECT_FALSE(p.at("meta.channels").requires_grad());
  EXPECT_THROW(p.meta("heads"), Error);
  EXPECT_THROW(p.at("nope"), Error);
}

TEST(Params, UniformInitWithinFanInBound) {
  const ParamStore p = sample_store();
  for (double v : p.at("w").values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(3.0));
}

TEST(Params, DuplicateNameRejected) {
  ParamStore p = sample_store();
  EXPECT_THROW(p.add_constant("b", {1}, 0.0), Error);
}

TEST(Params, CloneSharesNoStorage) {
  ParamStore p = sample_store();
  ParamStore c = p.clone();
  EXPECT_TRUE(bitwise_equal(p, c));
  c.at("w").mutable_values()[0] += 1.0;
  EXPECT_FALSE(bitwise_equal(p, c));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ParamStore p = sample_store();
  const auto bytes = encode_checkpoint(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ICNF");
  const ParamStore q = decode_checkpoint(bytes);
  EXPECT_TRUE(bitwise_equal(p, q));
  EXPECT_EQ(encode_checkpoint(q), bytes);
  EXPECT_TRUE(q.at("w").requires_grad());
  EXPECT_FALSE(q.at("meta.channels").requires_grad());
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "icnf_params_roundtrip.ckpt";
  save_checkpoint(path, sample_store());
  EXPECT_TRUE(bitwise_equal(load_checkpoint(path), sample_store()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, CorruptInputsRejected) {
  auto bytes = encode_checkpoint(sample_store());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
}
