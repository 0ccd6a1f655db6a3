#include "tcs/imaging.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/synth.hpp"

using tcs::GrayImage;
using tcs::SeededRng;

TEST(ToGrayscale, EqualChannelsFixedPoint) {
  const std::vector<double> c(4, 42.0);
  const auto img = tcs::to_grayscale(c, c, c, 2, 2);
  for (double v : img.pixels) EXPECT_NEAR(v, 42.0, 1e-12);
}

TEST(ToGrayscale, WhiteStaysWhite) {
  const std::vector<double> c(1, 255.0);
  EXPECT_NEAR(tcs::to_grayscale(c, c, c, 1, 1).pixels[0], 255.0, 1e-12);
}

TEST(ToGrayscale, PureRed) {
  const std::vector<double> r{255.0}, g{0.0}, b{0.0};
  EXPECT_DOUBLE_EQ(tcs::to_grayscale(r, g, b, 1, 1).pixels[0], 76.245);
}

TEST(ToGrayscale, SizeMismatchThrows) {
  const std::vector<double> r(4, 0.0), g(3, 0.0), b(4, 0.0);
  EXPECT_THROW(tcs::to_grayscale(r, g, b, 2, 2), std::invalid_argument);
}

TEST(ExtractPatches, Stride2Count) {
  const auto img = tcs::make_image(256, 256, 0.0);
  const auto set = tcs::extract_patches(img, 32, 2);
  EXPECT_EQ(set.count(), 12769u);  // ((256-32)/2+1)^2
}

TEST(ExtractPatches, NonOverlappingTiling) {
  const auto img = tcs::make_image(256, 256, 0.0);
  EXPECT_EQ(tcs::extract_patches(img, 32, 32).count(), 64u);
}

TEST(ExtractPatches, SingleWindow) {
  const auto img = tcs::make_image(48, 48, 1.0);
  const auto set = tcs::extract_patches(img, 48, 7);
  EXPECT_EQ(set.count(), 1u);
  EXPECT_EQ(set.origins[0].row, 0u);
  EXPECT_EQ(set.origins[0].col, 0u);
}

TEST(ExtractPatches, CountFormulaProperty) {
  SeededRng rng(64);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t w = 8 + static_cast<std::uint32_t>(rng.uniform_int(57));
    const std::uint32_t h = 8 + static_cast<std::uint32_t>(rng.uniform_int(57));
    const std::uint32_t s = 1 + static_cast<std::uint32_t>(rng.uniform_int(std::min(w, h)));
    const std::uint32_t stride = 1 + static_cast<std::uint32_t>(rng.uniform_int(9));
    const auto img = tcs::make_image(w, h, 0.0);
    const auto set = tcs::extract_patches(img, s, stride);
    const std::size_t expect =
        static_cast<std::size_t>((w - s) / stride + 1) * ((h - s) / stride + 1);
    ASSERT_EQ(set.count(), expect) << "w=" << w << " h=" << h << " s=" << s << " stride=" << stride;
  }
}

TEST(ExtractPatches, VectorsAreRasterScans) {
  auto img = tcs::make_image(4, 4, 0.0);
  for (std::uint32_t y = 0; y < 4; ++y)
    for (std::uint32_t x = 0; x < 4; ++x) img.at(y, x) = y * 10.0 + x;
  const auto set = tcs::extract_patches(img, 2, 2);
  ASSERT_EQ(set.count(), 4u);
  const double* second = set.vectors.row_ptr(1);  // origin (0,2)
  EXPECT_EQ(second[0], 2.0);
  EXPECT_EQ(second[1], 3.0);
  EXPECT_EQ(second[2], 12.0);
  EXPECT_EQ(second[3], 13.0);
}

TEST(ExtractPatches, BadArgsThrow) {
  const auto img = tcs::make_image(16, 16, 0.0);
  EXPECT_THROW(tcs::extract_patches(img, 17, 1), std::invalid_argument);
  EXPECT_THROW(tcs::extract_patches(img, 8, 0), std::invalid_argument);
}

TEST(SampleRandomPatches, SinglePatchImageIsForced) {
  SeededRng rng(1);
  std::vector<GrayImage> images{tcs::make_image(8, 8, 3.0)};
  const auto set = tcs::sample_random_patches(images, 8, 1, rng);
  ASSERT_EQ(set.count(), 1u);
  for (std::size_t i = 0; i < set.vectors.cols(); ++i) EXPECT_EQ(set.vectors(0, i), 3.0);
}

TEST(SampleRandomPatches, SeedDeterminism) {
  const auto images = tcs::test::synth_corpus(3, 32, 32, 7);
  SeededRng a(9), b(9);
  const auto sa = tcs::sample_random_patches(images, 8, 64, a);
  const auto sb = tcs::sample_random_patches(images, 8, 64, b);
  EXPECT_EQ(sa.vectors, sb.vectors);
  for (std::size_t i = 0; i < sa.origins.size(); ++i) {
    EXPECT_EQ(sa.origins[i].row, sb.origins[i].row);
    EXPECT_EQ(sa.origins[i].col, sb.origins[i].col);
  }
}

TEST(SampleRandomPatches, NoValidWindowsThrows) {
  SeededRng rng(2);
  std::vector<GrayImage> images{tcs::make_image(4, 4, 0.0)};
  EXPECT_THROW(tcs::sample_random_patches(images, 8, 1, rng), std::invalid_argument);
}

TEST(SampleRandomPatches, OriginDistributionUniform) {
  // One 12x12 image with S=8: 5x5 = 25 equally likely origins. Chi-square
  // with 24 degrees of freedom; critical value at p = 0.001 is 51.179.
  SeededRng rng(2718);
  std::vector<GrayImage> images{tcs::make_image(12, 12, 0.0)};
  const std::size_t draws = 100000;
  const auto set = tcs::sample_random_patches(images, 8, draws, rng);
  std::vector<std::size_t> counts(25, 0);
  for (const auto& origin : set.origins) counts[origin.row * 5 + origin.col] += 1;
  const double expected = static_cast<double>(draws) / 25.0;
  double chi2 = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  EXPECT_LT(chi2, 51.179);
}

TEST(Normalization, RoundTrip) {
  SeededRng rng(5);
  tcs::DenseMatrix patches(10, 16);
  for (double& v : patches.values()) v = rng.uniform_real(0, 255);
  const auto stats = tcs::compute_normalization_stats(patches);
  const auto normalized = tcs::normalize(patches, stats);
  const auto back = tcs::denormalize(normalized, stats);
  for (std::size_t i = 0; i < patches.size(); ++i)
    ASSERT_NEAR(back.values()[i], patches.values()[i], 1e-12 * 255);
}

TEST(Normalization, ConstantCorpusCenters) {
  tcs::DenseMatrix patches(4, 4, 7.0);
  const auto stats = tcs::compute_normalization_stats(patches);
  EXPECT_DOUBLE_EQ(stats.mean, 7.0);
  EXPECT_EQ(stats.std, 0.0);  // degenerate: callers must reject std == 0
  std::vector<double> v{7.0};
  EXPECT_THROW(tcs::normalize_in_place(v, stats), std::invalid_argument);
}

TEST(Normalization, HandCase) {
  tcs::NormalizationStats stats{100.0, 50.0};
  std::vector<double> v{200.0};
  tcs::normalize_in_place(v, stats);
  EXPECT_DOUBLE_EQ(v[0], 2.0);
}

TEST(OverlapAverage, GroundTruthPatchesReproduceImage) {
  SeededRng rng(11);
  const auto img = tcs::test::synth_image(64, 48, rng);
  for (std::uint32_t stride : {1u, 2u, 3u, 8u}) {
    const auto patches = tcs::extract_patches(img, 8, stride);
    // stride 3 leaves a border uncovered on 64x48; pad coverage check
    if ((64 - 8) % stride != 0 || (48 - 8) % stride != 0) continue;
    const auto rec = tcs::overlap_average(patches, img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      ASSERT_EQ(rec.pixels[i], img.pixels[i]) << "stride " << stride;
  }
}

TEST(OverlapAverage, DisagreeingPatchesAverage) {
  tcs::PatchSet set;
  set.patch_side = 2;
  set.origins = {{0, 0}, {0, 1}};
  set.vectors = tcs::DenseMatrix(2, 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    set.vectors(0, i) = 10.0;
    set.vectors(1, i) = 12.0;
  }
  const auto img = tcs::overlap_average(set, 3, 2);
  EXPECT_EQ(img.at(0, 0), 10.0);   // covered only by patch 0
  EXPECT_EQ(img.at(0, 1), 11.0);   // midpoint of 10 and 12
  EXPECT_EQ(img.at(0, 2), 12.0);   // covered only by patch 1
}

TEST(OverlapAverage, NonOverlappingMosaic) {
  SeededRng rng(12);
  const auto img = tcs::test::synth_image(32, 32, rng);
  const auto patches = tcs::extract_patches(img, 8, 8);
  const auto rec = tcs::overlap_average(patches, 32, 32);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) ASSERT_EQ(rec.pixels[i], img.pixels[i]);
}

TEST(OverlapAverage, UncoveredPixelThrows) {
  tcs::PatchSet set;
  set.patch_side = 2;
  set.origins = {{0, 0}};
  set.vectors = tcs::DenseMatrix(1, 4, 1.0);
  EXPECT_THROW(tcs::overlap_average(set, 3, 3), std::invalid_argument);
}

TEST(Psnr, IdenticalImagesGiveInfinity) {
  const auto img = tcs::make_image(8, 8, 100.0);
  EXPECT_TRUE(std::isinf(tcs::psnr(img, img)));
}

TEST(Psnr, UniformErrorSixteen) {
  const auto a = tcs::make_image(16, 16, 100.0);
  const auto b = tcs::make_image(16, 16, 116.0);
  const double expect = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  EXPECT_NEAR(tcs::psnr(a, b), expect, 1e-12);
  EXPECT_NEAR(expect, 24.0484, 5e-4);
}

TEST(Psnr, Symmetric) {
  SeededRng rng(3);
  const auto a = tcs::test::synth_image(16, 16, rng);
  const auto b = tcs::test::synth_image(16, 16, rng);
  EXPECT_DOUBLE_EQ(tcs::psnr(a, b), tcs::psnr(b, a));
}

TEST(Psnr, DimensionMismatchThrows) {
  EXPECT_THROW(tcs::psnr(tcs::make_image(4, 4), tcs::make_image(4, 5)), std::invalid_argument);
}

TEST(Pgm, RoundTrip) {
  SeededRng rng(17);
  const auto img = tcs::test::synth_image(33, 21, rng);  // already integer-valued
  const auto dir = tcs::test::scratch_dir("pgm");
  const auto path = dir / "img.pgm";
  tcs::save_pgm(img, path);
  const auto back = tcs::load_pgm(path);
  ASSERT_EQ(back.width, img.width);
  ASSERT_EQ(back.height, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) ASSERT_EQ(back.pixels[i], img.pixels[i]);
  std::filesystem::remove_all(dir);
}

TEST(Pgm, PpmConvertsThroughLuma) {
  const auto dir = tcs::test::scratch_dir("ppm");
  const auto path = dir / "img.ppm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n1 1\n255\n";
    const unsigned char px[3] = {255, 0, 0};
    out.write(reinterpret_cast<const char*>(px), 3);
  }
  const auto img = tcs::load_image(path);
  EXPECT_DOUBLE_EQ(img.pixels[0], 76.245);
  std::filesystem::remove_all(dir);
}

TEST(Pgm, BadMagicThrows) {
  const auto dir = tcs::test::scratch_dir("badpgm");
  const auto path = dir / "img.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P3\n1 1\n255\n0\n";
  }
  EXPECT_THROW(tcs::load_image(path), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Pgm, TruncatedRasterThrows) {
  const auto dir = tcs::test::scratch_dir("truncpgm");
  const auto path = dir / "img.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n4 4\n255\n";
    const unsigned char px[3] = {1, 2, 3};  // 13 bytes short
    out.write(reinterpret_cast<const char*>(px), 3);
  }
  EXPECT_THROW(tcs::load_pgm(path), std::runtime_error);
  std::filesystem::remove_all(dir);
}
