#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>

#include "terrasense/vision.hpp"

using terra::BinSpec;
using terra::DensePrediction;
using terra::Image;
using terra::kBins;
using terra::kPatch;
using terra::LabeledImage;
using terra::Pcg32;
using terra::PixelLabel;
using terra::Rgb;
using terra::VisionCurves;
using terra::VisionModel;
using terra::VisionTrainConfig;

namespace {

// Frames whose appearance encodes the label: dark half -> low friction,
// bright half -> high friction. Jittered per frame so features vary.
std::vector<LabeledImage> separable_frames(int count, std::uint64_t seed,
                                           double mu_lo = 0.5,
                                           double mu_hi = 2.5) {
  Pcg32 rng(seed, 77);
  std::vector<LabeledImage> out;
  for (int f = 0; f < count; ++f) {
    LabeledImage li;
    li.rgb = Image(64, 64);
    int base_lo = 50 + static_cast<int>(rng.below(24));
    int base_hi = 180 + static_cast<int>(rng.below(24));
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        int base = c < 32 ? base_lo : base_hi;
        int n = static_cast<int>(rng.below(17)) - 8;
        auto ch = static_cast<std::uint8_t>(terra::clamp(base + n, 0, 255));
        li.rgb.at(r, c) = {ch, ch, ch};
      }
    for (int k = 0; k < 16; ++k) {
      double u = 2.0 + rng.uniform(0.0, 28.0);
      double v = 2.0 + rng.uniform(0.0, 60.0);
      li.labels.push_back({u, v, mu_lo, 0.1, 0});
      li.labels.push_back({u + 32.0, v, mu_hi, 0.9, 0});
    }
    li.episode = f;
    out.push_back(std::move(li));
  }
  return out;
}

}  // namespace

TEST_CASE("bin discretization", "[vision]") {
  BinSpec mu = BinSpec::mu_bins();
  CHECK(mu.width() == Catch::Approx(0.1375));

  CHECK(mu.discretize(0.25) == 0);
  CHECK(mu.discretize(3.0) == 19);       // upper edge is closed
  CHECK(mu.discretize(0.38) == 0);
  CHECK(mu.discretize(0.39) == 1);
  CHECK(mu.discretize(1.625) == 10);
  CHECK(mu.discretize(0.0) == 0);        // clamped below
  CHECK(mu.discretize(99.0) == 19);      // clamped above
  CHECK_THROWS_AS(mu.discretize(std::nan("")), terra::ConfigError);

  BinSpec ro = BinSpec::rough_bins();
  CHECK(ro.width() == Catch::Approx(0.05));
  CHECK(ro.discretize(0.02) == 0);
  CHECK(ro.discretize(1.0) == 19);

  SECTION("bin centers invert discretization") {
    for (int k = 0; k < kBins; ++k) CHECK(mu.discretize(mu.center(k)) == k);
  }
}

TEST_CASE("expectation readout", "[vision]") {
  BinSpec mu = BinSpec::mu_bins();

  terra::VecX<float> uniform =
      terra::VecX<float>::Constant(kBins, 1.0f / kBins);
  CHECK(mu.expectation(uniform) == Catch::Approx(1.625));

  for (int k : {0, 7, 19}) {
    terra::VecX<float> onehot = terra::VecX<float>::Zero(kBins);
    onehot[k] = 1.0f;
    CHECK(mu.expectation(onehot) == Catch::Approx(mu.center(k)));
  }
}

TEST_CASE("sample extraction maps labels to their patch", "[vision]") {
  LabeledImage li;
  li.rgb = Image(20, 17);  // 2x2 full patches, 4 px right / 1 px bottom rim
  for (int r = 0; r < 17; ++r)
    for (int c = 0; c < 20; ++c)
      li.rgb.at(r, c) = {static_cast<std::uint8_t>(10 * (r / 8) + (c / 8)), 0, 0};
  li.labels.push_back({3.0, 3.0, 0.5, 0.1, 0});    // patch (0, 0)
  li.labels.push_back({12.0, 10.0, 1.0, 0.2, 1});  // patch (1, 1)
  li.labels.push_back({19.5, 16.5, 2.0, 0.3, 2});  // rim -> nearest (1, 1)
  auto samples = terra::extract_samples({li});
  REQUIRE(samples.size() == 3);
  CHECK(samples[1].feat == samples[2].feat);
  CHECK(samples[0].feat != samples[1].feat);
  CHECK(samples[0].bin_mu == BinSpec::mu_bins().discretize(0.5));
  // duplicate labels each contribute a sample
  li.labels.push_back({3.0, 3.0, 0.5, 0.1, 0});
  CHECK(terra::extract_samples({li}).size() == 4);
}

TEST_CASE("training separates a two-class appearance world", "[vision]") {
  auto frames = separable_frames(150, 11);
  VisionTrainConfig cfg;
  cfg.seed = 3;
  VisionCurves curves;
  VisionModel m = train_vision(frames, cfg, &curves);

  SECTION("validation split is frame-level, about 10%") {
    CHECK(curves.val_frames.size() == 15);
    CHECK(curves.mu.val_samples == 15 * 32);
    CHECK(curves.mu.train_samples == 135 * 32);
  }

  SECTION("cross-entropy decreases and held-out accuracy is high") {
    REQUIRE(curves.mu.epoch_loss.size() == 20);
    CHECK(curves.mu.epoch_loss.back() < curves.mu.epoch_loss.front());
    CHECK(curves.mu.val_accuracy >= 0.99);
    CHECK(curves.rough.val_accuracy >= 0.99);
  }

  SECTION("dense prediction recovers the halves on a fresh image") {
    auto fresh = separable_frames(1, 999);
    DensePrediction d = predict_dense(fresh[0].rgb, m);
    CHECK(d.prows == 8);
    CHECK(d.pcols == 8);
    double left = 0, right = 0;
    for (int pr = 0; pr < 8; ++pr)
      for (int pc = 0; pc < 8; ++pc)
        (pc < 4 ? left : right) += d.patch_mu[pr * 8 + pc] / 32.0;
    CHECK(left < 1.0);
    CHECK(right > 2.0);
    // expectation readout lands near the labeled values (soft bins pull
    // a little toward the range midpoint)
    CHECK(left == Catch::Approx(0.5).margin(0.25));
    CHECK(right == Catch::Approx(2.5).margin(0.25));
  }

  SECTION("per-patch probabilities are normalized") {
    DensePrediction d = predict_dense(frames[0].rgb, m);
    for (int i = 0; i < d.prows * d.pcols; ++i) {
      CHECK(d.probs_mu.col(i).sum() == Catch::Approx(1.0).margin(1e-5));
      CHECK(d.probs_rough.col(i).sum() == Catch::Approx(1.0).margin(1e-5));
      CHECK(d.probs_mu.col(i).minCoeff() >= 0.0f);
    }
  }

  SECTION("model round-trips through disk bit-exactly") {
    auto dir = std::filesystem::temp_directory_path() / "tsq_vision_rt";
    std::filesystem::remove_all(dir);
    m.save(dir);
    VisionModel m2 = VisionModel::load(dir);
    CHECK(m2.feat_mean == m.feat_mean);
    CHECK(m2.feat_std == m.feat_std);
    DensePrediction a = predict_dense(frames[0].rgb, m);
    DensePrediction b = predict_dense(frames[0].rgb, m2);
    CHECK(a.patch_mu == b.patch_mu);
    CHECK(a.patch_rough == b.patch_rough);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("single-bin datasets are refused", "[vision]") {
  auto frames = separable_frames(10, 5, 1.0, 1.0);  // every label mu = 1.0
  VisionTrainConfig cfg;
  CHECK_THROWS_AS(train_vision(frames, cfg), terra::ConfigError);
}

TEST_CASE("dense prediction conventions", "[vision]") {
  Pcg32 rng(8, 8);
  VisionModel m;
  m.feat_mean.fill(0.0f);
  m.feat_std.fill(1.0f);
  m.head_mu = terra::Mlp<float>({terra::kFeatureDim, kBins},
                                {terra::Act::Identity});
  m.head_rough = m.head_mu;
  m.head_mu.init(rng);
  m.head_rough.init(rng);

  SECTION("constant image gives a constant map") {
    Image img(48, 40, {120, 130, 140});
    DensePrediction d = predict_dense(img, m);
    // identical features; equal up to batched-GEMM rounding
    for (float v : d.patch_mu)
      CHECK(v == Catch::Approx(d.patch_mu[0]).margin(1e-5));
  }

  SECTION("remainder pixels borrow the nearest full patch") {
    Image img(70, 50);  // 8x6 patch grid + 6 px right, 2 px bottom rim
    for (int r = 0; r < 50; ++r)
      for (int c = 0; c < 70; ++c)
        img.at(r, c) = {static_cast<std::uint8_t>(3 * (r / 8) + 5 * (c / 8)),
                        40, 60};
    DensePrediction d = predict_dense(img, m);
    CHECK(d.prows == 6);
    CHECK(d.pcols == 8);
    CHECK(d.mu_at(49, 69) == d.patch_mu[5 * 8 + 7]);
    CHECK(d.mu_at(49, 0) == d.patch_mu[5 * 8 + 0]);
    CHECK(d.mu_at(0, 69) == d.patch_mu[0 * 8 + 7]);
  }

  SECTION("a full camera frame predicts densely in under 500 ms") {
    Image img(640, 480);
    Pcg32 nrng(4, 4);
    for (int r = 0; r < 480; ++r)
      for (int c = 0; c < 640; ++c) {
        auto v = static_cast<std::uint8_t>(nrng.below(256));
        img.at(r, c) = {v, v, v};
      }
    auto t0 = std::chrono::steady_clock::now();
    DensePrediction d = predict_dense(img, m);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    CHECK(d.prows * d.pcols == 60 * 80);
    CHECK(ms < 500.0);
  }
}
