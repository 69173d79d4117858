#include <gtest/gtest.h>

#include <set>

#include "icnf/error.hpp"
#include "icnf/windows.hpp"

using namespace icnf;
using namespace icnf::data;
using namespace icnf::windows;

namespace {

IcnRecord ramp(const std::string& id, std::size_t length, std::size_t channels = kChannels) {
  IcnRecord r{id, Label::kAD, Series(channels, length)};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < length; ++t) r.series.at(c, t) = static_cast<double>(c * 1000 + t) + 0.125;
  }
  return r;
}

}  // namespace

TEST(Windows, CountsForBothLengths) {
  EXPECT_EQ(window_count(137), 29u);
  EXPECT_EQ(window_count(141), 30u);
  EXPECT_EQ(window_count(194), 43u);
  EXPECT_EQ(window_count(24), 1u);
  EXPECT_EQ(window_count(23), 0u);
  EXPECT_EQ(slide(ramp("s", 137)).size(), 29u);
  EXPECT_EQ(slide(ramp("s", 194)).size(), 43u);
}

TEST(Windows, SlideLayoutAndProvenance) {
  const auto b = slide(ramp("s", 137));
  EXPECT_EQ(b.sources[2].start, 8u);
  EXPECT_EQ(b.sources[2].subject_id, "s");
  EXPECT_EQ(b.sources[2].label, Label::kAD);
  EXPECT_DOUBLE_EQ(b.at(2, 5, 3), 5.0 * 1000 + 11 + 0.125);
  EXPECT_DOUBLE_EQ(b.at(28, 52, 23), 52.0 * 1000 + 112 + 23 + 0.125);
}

TEST(Windows, MaskMarksFinalSixth) {
  const auto mask = mask_tail(24, 6);
  ASSERT_EQ(mask.size(), 24u);
  for (std::size_t t = 0; t < 24; ++t) EXPECT_EQ(mask[t], t >= 20) << t;
  EXPECT_THROW(mask_tail(25, 6), DataError);
}

TEST(Windows, TruncateKeepsPrefix) {
  const auto r = ramp("s", 194);
  const auto t = truncate(r);
  EXPECT_EQ(t.length(), 137u);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t i = 0; i < 137; ++i) EXPECT_EQ(t.series.at(c, i), r.series.at(c, i));
  }
  EXPECT_THROW(truncate(ramp("short", 100)), DataError);
}

TEST(Windows, ReplicateIsBitExactPrefixCopy) {
  const auto r = ramp("s", 137);
  const auto x = replicate(r);
  ASSERT_EQ(x.length(), 194u);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t i = 0; i < 137; ++i) EXPECT_EQ(x.series.at(c, i), r.series.at(c, i));
    for (std::size_t i = 0; i < 57; ++i) EXPECT_EQ(x.series.at(c, 137 + i), r.series.at(c, i));
  }
  // already long enough: identity
  EXPECT_EQ(replicate(ramp("l", 194)), ramp("l", 194));
  EXPECT_THROW(replicate(ramp("tiny", 90)), DataError);
}

TEST(Windows, SplitIsSeededAndPartitions) {
  const Cohort c({ramp("a", 137), ramp("b", 137), ramp("c", 137), ramp("d", 137)});
  const auto batch = slide(c);
  const auto [tr, va] = split_windows(batch, 0.8, 5);
  EXPECT_EQ(tr.size() + va.size(), batch.size());
  const auto [tr2, va2] = split_windows(batch, 0.8, 5);
  EXPECT_EQ(tr.sources, tr2.sources);
  EXPECT_EQ(va.values, va2.values);
  EXPECT_THROW(split_windows(batch, 1.0, 5), ConfigError);
}

TEST(Windows, SubjectSplitKeepsSubjectsTogether) {
  const Cohort c({ramp("a", 137), ramp("b", 137), ramp("c", 137), ramp("d", 137), ramp("e", 137)});
  const auto [tr, va] = split_windows(slide(c), 0.6, 9, true);
  std::set<std::string> train_ids, val_ids;
  for (const auto& s : tr.sources) train_ids.insert(s.subject_id);
  for (const auto& s : va.sources) val_ids.insert(s.subject_id);
  for (const auto& id : val_ids) EXPECT_FALSE(train_ids.count(id)) << id;
  EXPECT_EQ(train_ids.size() + val_ids.size(), 5u);
}

TEST(Windows, SelectAndAppend) {
  auto b = slide(ramp("s", 137));
  const std::vector<std::size_t> idx{3, 1};
  auto sel = b.select(idx);
  EXPECT_EQ(sel.sources[0].start, 12u);
  sel.append(b.select(idx));
  EXPECT_EQ(sel.size(), 4u);
  auto other = slide(ramp("t", 137, 3), 24, 4);
  EXPECT_THROW(sel.append(other), DataError);
}
