#include <gtest/gtest.h>

#include <cmath>

#include "fddb/errors.hpp"
#include "fddb/params.hpp"

using namespace fddb;

namespace {

torch::Tensor raw_filled(std::int64_t b, double v) {
  return torch::full({b, ParamSpecSet::defaults().raw_dim()}, v, torch::kFloat64);
}

}  // namespace

TEST(Params, RawDimCountsWhiteBalanceThrice) { EXPECT_EQ(ParamSpecSet::defaults().raw_dim(), 9); }

TEST(Params, ZeroRawGivesUnitWhiteBalance) {
  const auto p = map_raw_params(raw_filled(2, 0.0), ParamSpecSet::defaults());
  EXPECT_TRUE(torch::equal(p.wb_gain, torch::ones({2, 3}, torch::kFloat64)));
  EXPECT_EQ(p.ev[0].item<double>(), 0.0);
}

TEST(Params, SigmoidAtThree) {
  // contrast spec: sigmoid over [0.5, 1.5]
  auto raw = raw_filled(1, 0.0);
  raw[0][4] = 3.0;
  const auto p = map_raw_params(raw, ParamSpecSet::defaults());
  EXPECT_NEAR(p.contrast[0].item<double>(), 1.4526, 5e-5);
  EXPECT_NEAR(p.contrast[0].item<double>(), 0.5 + 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
}

TEST(Params, TanhMapping) {
  auto raw = raw_filled(1, 0.0);
  raw[0][3] = 0.7;
  const auto p = map_raw_params(raw, ParamSpecSet::defaults());
  EXPECT_NEAR(p.ev[0].item<double>(), 1.5 * std::tanh(0.7), 1e-15);
}

TEST(Params, LogTanhReciprocity) {
  const auto specs = ParamSpecSet::defaults();
  const auto r = torch::linspace(-4.0, 4.0, 9 * 7, torch::kFloat64).view({7, 9});
  const auto a = map_raw_params(r, specs).wb_gain;
  const auto b = map_raw_params(-r, specs).wb_gain;
  EXPECT_LE((a * b - 1.0).abs().max().item<double>(), 1e-10);
  const auto lo = a.min().item<double>(), hi = a.max().item<double>();
  EXPECT_GE(lo, 0.5);
  EXPECT_LE(hi, 2.0);
}

TEST(Params, OutputsStayInRange) {
  const auto specs = ParamSpecSet::defaults();
  const auto p = map_raw_params(torch::randn({64, 9}, torch::kFloat64) * 10.0, specs);
  for (auto op : kAllEditOps) {
    const auto& s = specs[op];
    EXPECT_GE(p.field(op).min().item<double>(), s.range_lo) << to_string(op);
    EXPECT_LE(p.field(op).max().item<double>(), s.range_hi) << to_string(op);
  }
}

TEST(Params, DisabledSpecYieldsIdentityAndShrinksRaw) {
  auto specs = ParamSpecSet::defaults();
  specs[EditOp::kBlur].enabled = false;
  EXPECT_EQ(specs.raw_dim(), 8);
  const auto p = map_raw_params(torch::full({3, 8}, 2.0, torch::kFloat64), specs);
  EXPECT_TRUE(torch::equal(p.blur_sigma, torch::zeros({3}, torch::kFloat64)));
  // grain_amp follows blur in raw order, so it consumes entry 6
  EXPECT_NEAR(p.grain_amp[0].item<double>(), 0.15 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Params, LengthMismatchThrows) {
  EXPECT_THROW(map_raw_params(torch::zeros({2, 8}), ParamSpecSet::defaults()), InvalidArgument);
  EXPECT_THROW(map_raw_params(torch::zeros({9}), ParamSpecSet::defaults()), InvalidArgument);
}

TEST(Params, IdentityOffsetsLandOnOrNearIdentity) {
  const auto specs = ParamSpecSet::defaults();
  const auto off = specs.identity_raw_offsets();
  ASSERT_EQ(off.size(), 9u);
  auto raw = torch::tensor(off, torch::kFloat64).unsqueeze(0);
  const auto p = map_raw_params(raw, specs);
  const auto id = EditParams::identity(1, specs, torch::kFloat64);
  for (auto op : {EditOp::kWhiteBalance, EditOp::kExposure, EditOp::kContrast, EditOp::kSaturation,
                  EditOp::kGrainSigma}) {
    EXPECT_LE((p.field(op) - id.field(op)).abs().max().item<double>(), 1e-12) << to_string(op);
  }
  // identities on a sigmoid bound are approached to 1% of the range
  EXPECT_NEAR(p.blur_sigma[0].item<double>(), 0.03, 1e-12);
  EXPECT_NEAR(p.grain_amp[0].item<double>(), 0.0015, 1e-12);
}

TEST(Params, GradientsFlowToRaw) {
  auto raw = torch::zeros({2, 9}, torch::kFloat64).requires_grad_();
  const auto p = map_raw_params(raw, ParamSpecSet::defaults());
  (p.wb_gain.sum() + p.ev.sum() + p.contrast.sum() + p.saturation.sum() + p.blur_sigma.sum() +
   p.grain_amp.sum() + p.grain_sigma.sum())
      .backward();
  EXPECT_GT(raw.grad().abs().min().item<double>(), 0.0);
}

TEST(Params, SpecValidation) {
  ParamSpec s{EditOp::kContrast, true, Mapping::kSigmoid, 1.5, 0.5, 1.0};
  EXPECT_THROW(s.validate(), InvalidArgument);
  ParamSpec lt{EditOp::kWhiteBalance, true, Mapping::kLogTanh, 0.4, 2.0, 1.0};
  EXPECT_THROW(lt.validate(), InvalidArgument);
  ParamSpec out{EditOp::kExposure, true, Mapping::kTanh, -1.0, 1.0, 2.0};
  EXPECT_THROW(out.validate(), InvalidArgument);
}

TEST(Params, NamesRoundTrip) {
  for (auto op : kAllEditOps) EXPECT_EQ(parse_edit_op(to_string(op)), op);
  for (auto m : {Mapping::kSigmoid, Mapping::kTanh, Mapping::kLogTanh}) {
    EXPECT_EQ(parse_mapping(to_string(m)), m);
  }
  EXPECT_THROW(parse_edit_op("hue"), InvalidArgument);
}

TEST(Params, BatchMeansOrder) {
  auto p = EditParams::identity(2, ParamSpecSet::defaults(), torch::kFloat64);
  p.wb_gain = torch::tensor({{1.0, 2.0, 3.0}, {3.0, 4.0, 5.0}}, torch::kFloat64);
  p.ev = torch::tensor({0.5, 1.5}, torch::kFloat64);
  const auto m = batch_means(p);
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(m[2], 4.0);
  EXPECT_DOUBLE_EQ(m[3], 1.0);
  EXPECT_DOUBLE_EQ(m[8], 1.75);
}
