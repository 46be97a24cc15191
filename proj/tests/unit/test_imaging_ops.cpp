#include <gtest/gtest.h>

#include <cmath>

#include "fddb/errors.hpp"
#include "fddb/imaging_ops.hpp"
#include "oracles.hpp"

using namespace fddb;

namespace {

torch::Tensor rand_unit(std::int64_t b, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::rand({b, 3, h, w}, gen, torch::kFloat64);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

torch::Tensor checkerboard(std::int64_t h, std::int64_t w) {
  auto t = torch::zeros({1, 1, h, w}, torch::kFloat64);
  auto a = t.accessor<double, 4>();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) a[0][0][y][x] = ((y / 2 + x / 2) % 2) ? 1.0 : -1.0;
  return t;
}

}  // namespace

TEST(Kernel, SizeRule) {
  EXPECT_EQ(gaussian_kernel_size(3.0), 19);
  EXPECT_EQ(gaussian_kernel_size(8.0), 49);
  EXPECT_EQ(gaussian_kernel_size(0.5), 5);
}

TEST(Kernel, SingleTapIsOne) {
  EXPECT_EQ(gaussian_kernel_1d(2.0, 1).item<double>(), 1.0);
}

TEST(Kernel, TinySigmaIsDelta) {
  const auto k = oracle::values(gaussian_kernel_1d(0.0, 5));
  EXPECT_EQ(k[2], 1.0);
  EXPECT_EQ(k[0] + k[1] + k[3] + k[4], 0.0);
}

TEST(Kernel, NormalizedSymmetricNonNegative) {
  for (double s : {0.001, 0.3, 1.0, 2.5, 7.3, 16.0, 32.0}) {
    for (int k : {1, 3, 9, oracle::kernel_size(s)}) {
      const auto w = oracle::values(gaussian_kernel_1d(s, k));
      double total = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_GE(w[i], 0.0);
        EXPECT_EQ(w[i], w[w.size() - 1 - i]);
        total += w[i];
      }
      EXPECT_NEAR(total, 1.0, 1e-12) << "sigma " << s << " k " << k;
      const auto ref = oracle::gaussian_weights(s, k);
      EXPECT_LE(max_abs_diff(w, ref), 1e-15);
    }
  }
}

TEST(Kernel, EvenSizeRejected) { EXPECT_THROW(gaussian_kernel_1d(1.0, 4), InvalidArgument); }

TEST(Reflect, MirrorsWithoutRepeatingEdge) {
  EXPECT_EQ(reflect_indices(4, 2), (std::vector<std::int64_t>{2, 1, 0, 1, 2, 3, 2, 1}));
}

TEST(Reflect, FoldsBeyondImage) {
  for (std::int64_t n : {1, 2, 3, 5}) {
    const auto idx = reflect_indices(n, 11);
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(idx.size()); ++j) {
      EXPECT_EQ(idx[j], oracle::mirror(j - 11, n));
    }
  }
}

TEST(LowPass, ConstantIsFixedPoint) {
  for (double s : {0.5, 4.0, 32.0}) {
    const auto x = torch::full({2, 3, 9, 13}, 0.37, torch::kFloat32);
    EXPECT_LE((low_pass(x, s) - 0.37).abs().max().item<double>(), 1e-6);
  }
}

TEST(LowPass, ImpulseMassIsConserved) {
  auto x = torch::zeros({1, 1, 41, 41}, torch::kFloat64);
  x[0][0][20][20] = 1.0;
  const auto y = low_pass(x, 3.0);
  EXPECT_NEAR(y.sum().item<double>(), 1.0, 1e-12);
  const auto w = oracle::gaussian_weights(3.0, 19);
  EXPECT_NEAR(y[0][0][20][23].item<double>(), w[9] * w[12], 1e-15);
}

TEST(LowPass, CheckerboardMatchesDenseOracle) {
  const auto x = checkerboard(24, 20);
  const auto got = oracle::values(low_pass(x, 4.0));
  const auto ref = oracle::dense_blur(oracle::values(x), 24, 20, 4.0, 25);
  EXPECT_LE(max_abs_diff(got, ref), 1e-6);
}

TEST(LowPass, FloatRandomMatchesDenseOracle) {
  for (double s : {0.7, 2.0, 5.0}) {
    const auto x = rand_unit(2, 11, 7, 3).to(torch::kFloat32);
    const auto got = oracle::values(low_pass(x, s));
    std::vector<double> sig(2, s);
    const auto ref = oracle::dense_blur_batch(oracle::values(x), 2, 3, 11, 7, sig, oracle::kernel_size(s));
    EXPECT_LE(max_abs_diff(got, ref), 1e-6);
  }
}

TEST(LowPass, TinyImagesNeverFail) {
  for (std::int64_t n : {1, 2, 3}) {
    const auto x = torch::rand({1, 3, n, n + 1}, torch::kFloat64);
    const auto y = low_pass(x, 16.0);
    EXPECT_EQ(y.sizes(), x.sizes());
    std::vector<double> sig(1, 16.0);
    const auto ref = oracle::dense_blur_batch(oracle::values(x), 1, 3, n, n + 1, sig, 97);
    EXPECT_LE(max_abs_diff(oracle::values(y), ref), 1e-12);
  }
}

TEST(WhiteBalance, Examples) {
  auto x = torch::zeros({1, 3, 1, 1}, torch::kFloat64);
  x[0][0][0][0] = 0.2;
  x[0][1][0][0] = 0.4;
  x[0][2][0][0] = 0.6;
  const auto y = apply_white_balance(x, torch::tensor({{2.0, 1.0, 0.5}}, torch::kFloat64));
  EXPECT_NEAR(y[0][0][0][0].item<double>(), 0.4, 1e-15);
  EXPECT_NEAR(y[0][1][0][0].item<double>(), 0.4, 1e-15);
  EXPECT_NEAR(y[0][2][0][0].item<double>(), 0.3, 1e-15);
  EXPECT_TRUE(torch::equal(apply_white_balance(x, torch::ones({1, 3}, torch::kFloat64)), x));
}

TEST(WhiteBalance, GradientWrtGainIsPixel) {
  auto x = rand_unit(1, 1, 1, 5);
  auto g = torch::ones({1, 3}, torch::kFloat64).requires_grad_();
  apply_white_balance(x, g).sum().backward();
  EXPECT_TRUE(torch::allclose(g.grad().view({3}), x.view({3}), 0, 1e-15));
}

TEST(WhiteBalance, NonPositiveGainRejected) {
  const auto x = rand_unit(1, 2, 2, 1);
  EXPECT_THROW(apply_white_balance(x, torch::tensor({{1.0, 0.0, 1.0}}, torch::kFloat64)), InvalidArgument);
  EXPECT_THROW(apply_white_balance(x, torch::tensor({{1.0, -2.0, 1.0}}, torch::kFloat64)), InvalidArgument);
}

TEST(Exposure, Examples) {
  const auto x = torch::full({1, 3, 2, 2}, 0.25, torch::kFloat64);
  EXPECT_TRUE(torch::allclose(apply_exposure(x, torch::tensor({1.0}, torch::kFloat64)), x * 2.0));
  EXPECT_TRUE(torch::equal(apply_exposure(x, torch::tensor({0.0}, torch::kFloat64)), x));
}

TEST(Exposure, EvGradientMatchesFiniteDifference) {
  const auto x = rand_unit(1, 3, 3, 9);
  auto ev = torch::tensor({0.3}, torch::kFloat64).requires_grad_();
  const auto y = apply_exposure(x, ev);
  y.sum().backward();
  const double h = 1e-5;
  const double fd = (apply_exposure(x, torch::tensor({0.3 + h}, torch::kFloat64)).sum().item<double>() -
                     apply_exposure(x, torch::tensor({0.3 - h}, torch::kFloat64)).sum().item<double>()) /
                    (2 * h);
  EXPECT_NEAR(ev.grad().item<double>(), fd, 1e-4 * std::abs(fd));
  EXPECT_NEAR(ev.grad().item<double>(), y.sum().item<double>() * std::log(2.0), 1e-12);
}

TEST(Contrast, Examples) {
  const auto x = torch::full({1, 3, 1, 1}, 0.75, torch::kFloat64);
  EXPECT_NEAR(apply_contrast(x, torch::tensor({2.0}, torch::kFloat64)).max().item<double>(), 1.0, 1e-15);
  EXPECT_TRUE(torch::equal(apply_contrast(x, torch::tensor({1.0}, torch::kFloat64)), x));
  const auto flat = apply_contrast(rand_unit(2, 3, 3, 2), torch::zeros({2}, torch::kFloat64));
  EXPECT_TRUE(torch::equal(flat, torch::full_like(flat, 0.5)));
}

TEST(Saturation, Examples) {
  auto x = torch::zeros({1, 3, 1, 1}, torch::kFloat64);
  x[0][0][0][0] = 1.0;
  const auto y = oracle::values(apply_saturation(x, torch::tensor({2.0}, torch::kFloat64)));
  EXPECT_NEAR(y[0], 1.701, 1e-12);
  EXPECT_NEAR(y[1], -0.299, 1e-12);
  EXPECT_NEAR(y[2], -0.299, 1e-12);
  const auto r = rand_unit(2, 4, 4, 8);
  EXPECT_LE((apply_saturation(r, torch::ones({2}, torch::kFloat64)) - r).abs().max().item<double>(), 1e-15);
  const auto g = apply_saturation(r, torch::zeros({2}, torch::kFloat64));
  EXPECT_LE((g.select(1, 0) - g.select(1, 2)).abs().max().item<double>(), 1e-15);
}

TEST(Blur, ZeroSigmaIsIdentity) {
  const auto x = rand_unit(2, 6, 6, 4);
  EXPECT_LE((apply_blur(x, torch::zeros({2}, torch::kFloat64), 3.0) - x).abs().max().item<double>(), 1e-15);
}

TEST(Blur, ContractsVariance) {
  const auto x = rand_unit(3, 16, 16, 6);
  const auto y = apply_blur(x, torch::tensor({0.2, 1.0, 2.9}, torch::kFloat64), 3.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(y[i].var().item<double>(), x[i].var().item<double>());
  }
}

TEST(Blur, PerSampleSigmaMatchesOracle) {
  const auto x = rand_unit(2, 10, 12, 7);
  const std::vector<double> sig = {0.6, 2.2};
  const auto y = apply_blur(x, torch::tensor(sig, torch::kFloat64), 3.0);
  const auto ref = oracle::dense_blur_batch(oracle::values(x), 2, 3, 10, 12, sig, 19);
  EXPECT_LE(max_abs_diff(oracle::values(y), ref), 1e-12);
}

TEST(Blur, MeanGradientWrtSigmaMatchesFiniteDifference) {
  const auto x = rand_unit(1, 12, 12, 10);
  auto s = torch::tensor({1.3}, torch::kFloat64).requires_grad_();
  // Mean of a weighted output.
  const auto w = torch::linspace(0.0, 1.0, 12 * 12 * 3, torch::kFloat64).view({1, 3, 12, 12});
  (apply_blur(x, s, 3.0) * w).mean().backward();
  const double h = 1e-5;
  const auto f = [&](double v) {
    return (apply_blur(x, torch::tensor({v}, torch::kFloat64), 3.0) * w).mean().item<double>();
  };
  const double fd = (f(1.3 + h) - f(1.3 - h)) / (2 * h);
  EXPECT_NEAR(s.grad().item<double>(), fd, 1e-4 * std::abs(fd));
}

TEST(Grain, ZeroAmplitudeIsIdentity) {
  const auto x = rand_unit(2, 8, 8, 11);
  const auto n = sample_grain_noise(2, 8, 8, 77, torch::kFloat64);
  const auto y = apply_grain(x, torch::zeros({2}, torch::kFloat64), torch::full({2}, 1.5, torch::kFloat64), 3.0, n);
  EXPECT_TRUE(torch::equal(y, x));
}

TEST(Grain, SameSeedIsBitIdentical) {
  EXPECT_TRUE(torch::equal(sample_grain_noise(2, 5, 7, 123, torch::kFloat32),
                           sample_grain_noise(2, 5, 7, 123, torch::kFloat32)));
  EXPECT_FALSE(torch::equal(sample_grain_noise(2, 5, 7, 123, torch::kFloat32),
                            sample_grain_noise(2, 5, 7, 124, torch::kFloat32)));
}

TEST(Grain, SharedAcrossChannels) {
  const auto x = torch::full({1, 3, 8, 8}, 0.5, torch::kFloat64);
  const auto n = sample_grain_noise(1, 8, 8, 5, torch::kFloat64);
  const auto y = apply_grain(x, torch::tensor({0.1}, torch::kFloat64), torch::tensor({1.0}, torch::kFloat64), 3.0, n);
  EXPECT_TRUE(torch::equal(y.select(1, 0), y.select(1, 2)));
}

TEST(Grain, MonteCarloMeanIsPreserved) {
  // 1000 independent draws; the per-draw image mean must average to the input
  // mean within three standard errors.
  const auto x = rand_unit(1, 16, 16, 12);
  const double base = x.mean().item<double>();
  std::vector<double> means;
  for (int k = 0; k < 1000; ++k) {
    const auto n = sample_grain_noise(1, 16, 16, 1000 + k, torch::kFloat64);
    const auto y = apply_grain(x, torch::tensor({0.1}, torch::kFloat64), torch::tensor({1.0}, torch::kFloat64), 3.0, n);
    means.push_back(y.mean().item<double>());
  }
  double mu = 0.0, var = 0.0;
  for (double m : means) mu += m;
  mu /= means.size();
  for (double m : means) var += (m - mu) * (m - mu);
  const double se = std::sqrt(var / (means.size() - 1) / means.size());
  EXPECT_LE(std::abs(mu - base), 3.0 * se);
}

TEST(Grain, MatchesOracle) {
  const auto x = rand_unit(2, 9, 9, 13);
  const auto n = sample_grain_noise(2, 9, 9, 99, torch::kFloat64);
  const std::vector<double> gs = {0.8, 2.4};
  const auto y = apply_grain(x, torch::tensor({0.05, 0.12}, torch::kFloat64), torch::tensor(gs, torch::kFloat64), 3.0, n);
  const auto smooth = oracle::dense_blur_batch(oracle::values(n), 2, 1, 9, 9, gs, 19);
  const auto xv = oracle::values(x), yv = oracle::values(y);
  const double amp[2] = {0.05, 0.12};
  double err = 0.0;
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c)
      for (int q = 0; q < 81; ++q) {
        const auto i = (b * 3 + c) * 81 + q;
        err = std::max(err, std::abs(yv[i] - (xv[i] + amp[b] * smooth[b * 81 + q])));
      }
  EXPECT_LE(err, 1e-12);
}

TEST(EditChain, IdentityParamsKeepInteriorPixels) {
  const auto specs = ParamSpecSet::defaults();
  auto x = torch::rand({2, 3, 8, 8}, torch::kFloat64) * 1.8 - 0.9;
  const auto y = edit_chain(ImageBatch{x, IntensityDomain::kSigned},
                            EditParams::identity(2, specs, torch::kFloat64), specs, 1);
  EXPECT_LE((y.data - x).abs().max().item<double>(), 1e-12);
  EXPECT_EQ(y.domain, IntensityDomain::kSigned);
}

TEST(EditChain, KnownShiftMatchesScalarPipeline) {
  const auto specs = ParamSpecSet::defaults();
  const std::int64_t b = 2, h = 10, w = 9;
  const auto x = torch::rand({b, 3, h, w}, torch::kFloat64) * 2.0 - 1.0;
  auto p = EditParams::identity(b, specs, torch::kFloat64);
  p.wb_gain = torch::tensor({{1.2, 1.0, 0.85}, {1.2, 1.0, 0.85}}, torch::kFloat64);
  p.ev = torch::tensor({0.5, 0.5}, torch::kFloat64);
  p.contrast = torch::tensor({1.1, 0.9}, torch::kFloat64);
  p.saturation = torch::tensor({1.3, 0.7}, torch::kFloat64);
  p.blur_sigma = torch::tensor({0.5, 1.7}, torch::kFloat64);
  p.grain_amp = torch::tensor({0.03, 0.08}, torch::kFloat64);
  p.grain_sigma = torch::tensor({1.0, 2.5}, torch::kFloat64);
  const std::uint64_t seed = 4242;
  const auto y = edit_chain(ImageBatch{x, IntensityDomain::kSigned}, p, specs, seed).data;

  oracle::Params op;
  op.wb = {{1.2, 1.0, 0.85}, {1.2, 1.0, 0.85}};
  op.ev = {0.5, 0.5};
  op.contrast = {1.1, 0.9};
  op.saturation = {1.3, 0.7};
  op.blur = {0.5, 1.7};
  op.amp = {0.03, 0.08};
  op.grain_sigma = {1.0, 2.5};
  const auto noise = oracle::values(sample_grain_noise(b, h, w, seed, torch::kFloat64));
  const auto ref = oracle::edit_chain(oracle::values(x), b, h, w, op, noise, 3.0, 3.0);
  EXPECT_LE(max_abs_diff(oracle::values(y), ref), 1e-6);
}

TEST(EditChain, OutputAlwaysSigned) {
  const auto specs = ParamSpecSet::defaults();
  const auto x = torch::rand({2, 3, 8, 8}) * 2 - 1;
  auto p = EditParams::identity(2, specs);
  p.ev = torch::full({2}, 1.5);
  p.grain_amp = torch::full({2}, 0.15);
  EXPECT_TRUE((edit_chain(ImageBatch{x}, p, specs, 3)).in_range());
}

TEST(EditChain, RejectsUnitDomainInput) {
  const auto specs = ParamSpecSet::defaults();
  EXPECT_THROW(edit_chain(ImageBatch{torch::rand({1, 3, 4, 4}), IntensityDomain::kUnit},
                          EditParams::identity(1, specs), specs, 0),
               InvalidArgument);
}

TEST(Split, ExactReconstructionBitwiseOnGeneratorGrid) {
  for (auto dtype : {torch::kFloat32, torch::kFloat64}) {
    const auto y = snap_to_split_grid(torch::tanh(torch::randn({2, 3, 32, 24}, dtype) * 2));
    for (double s : {1.0, 8.0, 32.0}) {
      const auto split = decompose_high_frequency(y, s);
      EXPECT_TRUE(torch::equal(split.low + split.high, y)) << "sigma " << s;
    }
  }
}

TEST(Split, ConstantHasNoResidual) {
  const auto y = snap_to_split_grid(torch::full({1, 3, 16, 16}, -0.3));
  EXPECT_EQ(decompose_high_frequency(y, 8.0).high.abs().max().item<double>(), 0.0);
}

TEST(Split, ResidualEnergyMonotoneInSigma) {
  const auto y = snap_to_split_grid(torch::rand({1, 3, 40, 48}, torch::kFloat64) * 2 - 1);
  double prev = 0.0;
  for (double s : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double e = decompose_high_frequency(y, s).high.norm().item<double>();
    EXPECT_GE(e, prev) << "sigma " << s;
    prev = e;
  }
}

TEST(Recompose, ClosedGateReturnsEditOutput) {
  const auto e = torch::rand({2, 3, 8, 8}) * 2 - 1;
  const auto h = torch::randn({2, 3, 8, 8});
  EXPECT_TRUE(torch::equal(recompose(e, h, 0.0), e));
}

TEST(Recompose, ClipAndLinearity) {
  EXPECT_EQ(recompose(torch::full({1, 3, 1, 1}, 0.9), torch::full({1, 3, 1, 1}, 0.5), 1.0).max().item<float>(), 1.0f);
  const auto e = torch::full({1, 3, 4, 4}, 0.1, torch::kFloat64);
  const auto h = torch::rand({1, 3, 4, 4}, torch::kFloat64) * 0.4 - 0.2;
  EXPECT_LE((recompose(e, h, 0.5) - e - 0.5 * h).abs().max().item<double>(), 1e-15);
}

TEST(Recompose, Errors) {
  EXPECT_THROW(recompose(torch::zeros({1, 3, 4, 4}), torch::zeros({1, 3, 4, 5}), 0.5), InvalidArgument);
  EXPECT_THROW(recompose(torch::zeros({1, 3, 4, 4}), torch::zeros({1, 3, 4, 4}), 1.5), InvalidArgument);
}

TEST(ImageBatch, DomainConversions) {
  const ImageBatch s{torch::tensor({-1.0, 0.0, 1.0}, torch::kFloat64)};
  const auto u = s.to_unit();
  EXPECT_EQ(u.domain, IntensityDomain::kUnit);
  EXPECT_TRUE(torch::equal(u.data, torch::tensor({0.0, 0.5, 1.0}, torch::kFloat64)));
  EXPECT_TRUE(torch::equal(u.to_signed().data, s.data));
  EXPECT_FALSE((ImageBatch{torch::tensor({1.5})}).in_range());
}

TEST(Determinism, OpsAreBitReproducible) {
  const auto specs = ParamSpecSet::defaults();
  const auto x = torch::rand({2, 3, 12, 12}) * 2 - 1;
  auto p = EditParams::identity(2, specs);
  p.blur_sigma = torch::full({2}, 1.1f);
  p.grain_amp = torch::full({2}, 0.05f);
  const auto a = edit_chain(ImageBatch{x}, p, specs, 17).data;
  const auto b = edit_chain(ImageBatch{x}, p, specs, 17).data;
  EXPECT_TRUE(torch::equal(a, b));
}
