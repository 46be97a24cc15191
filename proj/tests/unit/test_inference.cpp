#include <gtest/gtest.h>

#include "fddb/errors.hpp"
#include "fddb/image_io.hpp"
#include "fddb/inference.hpp"
#include "fddb/rng.hpp"
#include "fddb/trainer.hpp"
#include "test_util.hpp"

using namespace fddb;

namespace {

// A tiny trained model shared by the tests in this file.
class InferenceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir("infer");
    for (int i = 0; i < 2; ++i) {
      testutil::write_rgb(*dir_ / ("syn/" + std::to_string(i) + ".png"), testutil::noise_rgb(16, 16, i));
      testutil::write_rgb(*dir_ / ("real/" + std::to_string(i) + ".png"), testutil::noise_rgb(16, 16, 9 + i));
    }
    TrainConfig cfg;
    cfg.data.synthetic_dir = (*dir_ / "syn").string();
    cfg.data.real_dir = (*dir_ / "real").string();
    cfg.data.height = cfg.data.width = 16;
    cfg.data.batch_size = 2;
    cfg.net.gen_width = 4;
    cfg.net.res_blocks = 5;
    cfg.net.disc_width = 4;
    cfg.net.proj_dim = 8;
    cfg.net.nce_patches = 8;
    cfg.freq.hp_sigma = 2.0;
    cfg.sched.window = 2;
    cfg.sched.min_iterations = 1;
    cfg.sched.eps_loss = cfg.sched.eps_param = 1e9;
    cfg.sched.ramp_len = 1;
    cfg.iterations = 3;
    cfg.checkpoint_dir = (*dir_ / "ckpt").string();
    cfg.metrics_path = (*dir_ / "m.csv").string();
    ckpt_ = new std::filesystem::path(fit(cfg).final_checkpoint);
  }
  static void TearDownTestSuite() {
    delete ckpt_;
    delete dir_;
  }

  static testutil::TempDir* dir_;
  static std::filesystem::path* ckpt_;
};

testutil::TempDir* InferenceTest::dir_ = nullptr;
std::filesystem::path* InferenceTest::ckpt_ = nullptr;

}  // namespace

TEST(Padding, PlanProperties) {
  for (std::int64_t h = 1; h < 40; ++h) {
    for (std::int64_t w : {1, 5, 8, 13, 480}) {
      const auto p = divisibility_padding(h, w);
      const auto hh = h + p.top + p.bottom, ww = w + p.left + p.right;
      EXPECT_EQ(hh % 4, 0);
      EXPECT_EQ(ww % 4, 0);
      EXPECT_GE(hh, 8);
      EXPECT_GE(ww, 8);
      EXPECT_LT(hh - std::max<std::int64_t>(h, 8), 4);
      EXPECT_TRUE(p.bottom == p.top || p.bottom == p.top + 1);
      EXPECT_TRUE(p.right == p.left || p.right == p.left + 1);
    }
  }
  const auto none = divisibility_padding(480, 640);
  EXPECT_EQ(none.max_side(), 0);
}

TEST(Padding, ReflectThenCropIsIdentity) {
  const auto x = torch::rand({1, 3, 5, 3});
  const auto p = divisibility_padding(5, 3);
  const auto padded = reflect_pad(x, p);
  EXPECT_EQ(padded.size(2), 8);
  EXPECT_EQ(padded.size(3), 8);
  EXPECT_TRUE(torch::equal(crop(padded, p), x));
  // mirror without repeating the border: the row above row 0 is row 1
  const auto q = PadPlan{1, 0, 0, 0};
  EXPECT_TRUE(torch::equal(reflect_pad(x, q).select(2, 0), x.select(2, 1)));
}

TEST_F(InferenceTest, PreservesResolutionAndGateZeroIsEditOutput) {
  auto model = load_model(*ckpt_);
  EXPECT_EQ(model.g_res, 1.0);
  const auto img = torch::rand({3, 30, 22}) * 2 - 1;
  const auto out = translate_image(model, img, 0.0);
  EXPECT_EQ(out.sizes(), img.sizes());
  EXPECT_LE(out.abs().max().item<float>(), 1.0f);
  const auto p = divisibility_padding(30, 22);
  const auto tr = translate_batch(model.nets, model.cfg, reflect_pad(img.unsqueeze(0), p), 0.0,
                                  derive_seed(model.cfg.seed, RngStream::kGrain, 0));
  EXPECT_TRUE(torch::allclose(out, crop(tr.y_edit, p)[0], 1e-6, 1e-6));
  const auto open = translate_image(model, img, 1.0);
  EXPECT_FALSE(torch::equal(open, out));
}

TEST_F(InferenceTest, LargeImageShapeKept) {
  auto model = load_model(*ckpt_);
  EXPECT_EQ(translate_image(model, torch::zeros({3, 480, 640}), 1.0).sizes(),
            (std::vector<std::int64_t>{3, 480, 640}));
}

TEST_F(InferenceTest, DirectoryTranslationIsDeterministic) {
  testutil::TempDir d("tdir");
  testutil::write_rgb(d / "in/a.png", testutil::noise_rgb(20, 12, 1));
  testutil::write_rgb(d / "in/sub/b.jpg", testutil::noise_rgb(9, 9, 2));
  std::ofstream(d / "in/c.png") << "garbage";
  auto model = load_model(*ckpt_);
  std::vector<std::string> warnings;
  const auto s1 = translate_dir(model, d / "in", d / "o1", std::nullopt,
                                [&](const std::string& w) { warnings.push_back(w); });
  const auto s2 = translate_dir(model, d / "in", d / "o2", std::nullopt);
  EXPECT_EQ(s1.written, 2u);
  ASSERT_EQ(s1.errors.size(), 1u);
  EXPECT_EQ(s1.errors[0].file.filename(), "c.png");
  ASSERT_TRUE(std::filesystem::exists(d / "o1/sub/b.png"));
  EXPECT_EQ(read_rgb8(d / "o1/a.png").size(), cv::Size(12, 20));
  EXPECT_EQ(testutil::read_all(d / "o1/a.png"), testutil::read_all(d / "o2/a.png"));
  EXPECT_EQ(testutil::read_all(d / "o1/sub/b.png"), testutil::read_all(d / "o2/sub/b.png"));
}

TEST_F(InferenceTest, HpSweepWritesRowsAndImages) {
  testutil::TempDir d("sweep");
  testutil::write_rgb(d / "in/a.png", testutil::noise_rgb(16, 16, 3));
  testutil::write_rgb(d / "in/b.png", testutil::noise_rgb(16, 16, 4));
  auto model = load_model(*ckpt_);
  const auto s = hp_sweep_dir(&model, d / "in", kDefaultSweepSigmas, d / "out");
  EXPECT_EQ(s.errors.size(), 0u);
  const auto csv = testutil::read_all(d / "out/hp_sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 6);
  EXPECT_TRUE(std::filesystem::exists(d / "out/a_sigma1.png"));
  EXPECT_TRUE(std::filesystem::exists(d / "out/b_sigma32.png"));
}

TEST(HpSweep, ConstantImageHasZeroResidual) {
  const auto img = torch::full({3, 12, 10}, 0.3f);
  for (const auto& r : residuals_for_sigmas(nullptr, img, kDefaultSweepSigmas)) {
    const auto st = residual_stats(r);
    EXPECT_EQ(st.mean_abs, 0.0);
    EXPECT_EQ(st.l2, 0.0);
  }
}

TEST(HpSweep, ResidualEnergyGrowsWithSigma) {
  const auto img = torch::rand({3, 32, 32}, torch::kFloat64) * 2 - 1;
  const auto res = residuals_for_sigmas(nullptr, img, kDefaultSweepSigmas);
  for (std::size_t i = 1; i < res.size(); ++i) {
    EXPECT_GE(residual_stats(res[i]).l2, residual_stats(res[i - 1]).l2 - 1e-9);
  }
  EXPECT_THROW(hp_sweep_dir(nullptr, ".", {}, "."), InvalidArgument);
}
