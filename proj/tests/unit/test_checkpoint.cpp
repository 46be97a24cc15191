#include <gtest/gtest.h>

#include "fddb/checkpoint.hpp"
#include "fddb/errors.hpp"
#include "fddb/metrics.hpp"
#include "test_util.hpp"

using namespace fddb;

namespace {

Checkpoint sample() {
  Checkpoint c;
  c.meta = {{"iteration", 42}, {"name", "x"}, {"nested", {{"a", 1.5}}}};
  c.arrays.push_back({"w/f32", torch::randn({3, 4})});
  c.arrays.push_back({"w/f64", torch::randn({2, 2, 2}, torch::kFloat64)});
  c.arrays.push_back({"steps", torch::tensor({1, 2, 3}, torch::kLong)});
  c.arrays.push_back({"mask", torch::tensor({0, 255, 7}, torch::kUInt8)});
  c.arrays.push_back({"scalar", torch::tensor(3.5f)});
  c.arrays.push_back({"empty", torch::zeros({0, 3})});
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTripExact) {
  const auto c = sample();
  const auto bytes = serialize_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 8), "FDDBCKPT");
  const auto back = parse_checkpoint(bytes);
  EXPECT_EQ(back.meta, c.meta);
  ASSERT_EQ(back.arrays.size(), c.arrays.size());
  for (const auto& a : c.arrays) {
    ASSERT_TRUE(back.has_array(a.name));
    const auto& t = back.array(a.name);
    EXPECT_EQ(t.dtype(), a.tensor.dtype()) << a.name;
    EXPECT_EQ(t.sizes(), a.tensor.sizes()) << a.name;
    EXPECT_TRUE(torch::equal(t, a.tensor)) << a.name;
  }
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_FALSE(back.has_array("nope"));
  EXPECT_THROW(back.array("nope"), std::exception);
}

TEST(Checkpoint, NonContiguousInputSerializesByValue) {
  Checkpoint c;
  const auto base = torch::arange(12, torch::kFloat32).reshape({3, 4});
  c.arrays.push_back({"t", base.t()});
  const auto back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(torch::equal(back.array("t"), base.t().contiguous()));
}

TEST(Checkpoint, EveryTruncationIsDetected) {
  const auto bytes = serialize_checkpoint(sample());
  for (std::size_t n = 0; n < bytes.size(); n += std::max<std::size_t>(1, bytes.size() / 97)) {
    EXPECT_THROW(parse_checkpoint(std::string_view(bytes).substr(0, n)), IntegrityError) << n;
  }
  EXPECT_THROW(parse_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 1)), IntegrityError);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = serialize_checkpoint(sample());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad_magic), IntegrityError);
  auto bad_data = bytes;
  bad_data[bytes.size() - 2] ^= 0x10;
  EXPECT_THROW(parse_checkpoint(bad_data), IntegrityError);
  auto bad_header = bytes;
  bad_header[30] ^= 0x01;
  EXPECT_THROW(parse_checkpoint(bad_header), IntegrityError);
  EXPECT_THROW(parse_checkpoint(bytes + "extra"), IntegrityError);
}

TEST(Checkpoint, FileSaveLoadByteIdentical) {
  testutil::TempDir d("ckpt");
  save_checkpoint(d / "a.fddb", sample());
  const auto loaded = load_checkpoint(d / "a.fddb");
  save_checkpoint(d / "b.fddb", loaded);
  EXPECT_EQ(testutil::read_all(d / "a.fddb"), testutil::read_all(d / "b.fddb"));
  EXPECT_FALSE(std::filesystem::exists(d / "a.fddb.tmp"));
  EXPECT_THROW(load_checkpoint(d / "missing.fddb"), std::exception);
}

TEST(Metrics, HeaderAndRowFormat) {
  const auto& cols = metrics_columns();
  ASSERT_GE(cols.size(), 17u);
  EXPECT_EQ(cols[0], "iter");
  EXPECT_EQ(cols[1], "stage");
  EXPECT_EQ(cols[2], "g_res");
  MetricsRow r;
  r.report.iteration = 3;
  r.report.raw = {0.5, 0, 0, 0.25, 0};
  r.report.total = 0.525;
  r.g_res = 0.0;
  r.event = "stage_switch";
  const auto line = format_metrics_row(r);
  EXPECT_EQ(line.rfind("3,edit,0,", 0), 0u) << line;
  EXPECT_NE(line.find("stage_switch"), std::string::npos);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), static_cast<long>(cols.size() - 1));
}

TEST(Metrics, WriterAtomicAndResumeTruncation) {
  testutil::TempDir d("metrics");
  const auto path = d / "m.csv";
  {
    MetricsWriter w(path);
    for (int i = 0; i < 5; ++i) {
      MetricsRow r;
      r.report.iteration = i;
      w.write(r);
    }
    EXPECT_FALSE(std::filesystem::exists(path));
  }
  const auto full = testutil::read_all(path);
  EXPECT_EQ(std::count(full.begin(), full.end(), '\n'), 6);
  {
    MetricsWriter w(path, 2);
    MetricsRow r;
    r.report.iteration = 3;
    w.write(r);
  }
  const auto resumed = testutil::read_all(path);
  EXPECT_EQ(std::count(resumed.begin(), resumed.end(), '\n'), 5);
  const auto cut = full.find("\n4,");
  EXPECT_EQ(resumed, full.substr(0, cut + 1));
}
