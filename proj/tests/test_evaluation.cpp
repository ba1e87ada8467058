#include <gtest/gtest.h>

#include "bcdnet/evaluation.hpp"

using namespace bcdnet;

TEST(Phantom, EmptySpecIsZero) {
  PhantomSpec spec;
  spec.width = 16;
  spec.height = 16;
  spec.pixel_size = 1.0;
  const Image img = generate_phantom(spec);
  for (double v : img.values) EXPECT_EQ(v, 0.0);
}

TEST(Phantom, DiscAreaMatchesAnalyticValue) {
  PhantomSpec spec;
  spec.width = 128;
  spec.height = 128;
  spec.pixel_size = 1.0;
  spec.ellipses.push_back({0.0, 0.0, 40.0, 40.0, 0.0, 0.02});
  const Image img = generate_phantom(spec);
  long inside = 0;
  for (double v : img.values) {
    EXPECT_TRUE(v == 0.0 || v == 0.02);
    if (v > 0.0) ++inside;
  }
  const double analytic = std::numbers::pi * 40.0 * 40.0;
  EXPECT_NEAR(inside, analytic, 0.02 * analytic);
}

TEST(Phantom, DisjointEllipsesAddTheirOwnDeltas) {
  PhantomSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.pixel_size = 1.0;
  spec.ellipses.push_back({-16.0, 0.0, 6.0, 4.0, 0.0, 0.02});
  spec.ellipses.push_back({16.0, 0.0, 4.0, 6.0, 30.0, -0.01});
  const Image img = generate_phantom(spec);
  // Centers land inside their own ellipse only.
  EXPECT_DOUBLE_EQ(img.at(32, 16), 0.02);
  EXPECT_DOUBLE_EQ(img.at(32, 48), -0.01);
  EXPECT_DOUBLE_EQ(img.at(32, 32), 0.0);
}

TEST(Phantom, OverlapsAccumulate) {
  PhantomSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.pixel_size = 1.0;
  spec.ellipses.push_back({0.0, 0.0, 10.0, 10.0, 0.0, 0.02});
  spec.ellipses.push_back({0.0, 0.0, 3.0, 3.0, 0.0, 0.005});
  const Image img = generate_phantom(spec);
  EXPECT_DOUBLE_EQ(img.at(16, 16), 0.025);
}

TEST(Phantom, RotationMovesMass) {
  PhantomSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.pixel_size = 1.0;
  // Long thin ellipse along x; rotated 90 degrees it covers (0, +20) instead
  // of (+20, 0).
  spec.ellipses.push_back({0.0, 0.0, 24.0, 2.0, 0.0, 1.0});
  const Image flat = generate_phantom(spec);
  spec.ellipses[0].rotation_deg = 90.0;
  const Image upright = generate_phantom(spec);
  EXPECT_GT(flat.at(32, 52), 0.0);
  EXPECT_EQ(flat.at(52, 32), 0.0);
  EXPECT_EQ(upright.at(32, 52), 0.0);
  EXPECT_GT(upright.at(52, 32), 0.0);
}

TEST(Phantom, RandomSpecIsDeterministicAndNonNegative) {
  const PhantomSpec a = random_phantom_spec(64, 64, 1.0, 6, 42);
  const PhantomSpec b = random_phantom_spec(64, 64, 1.0, 6, 42);
  ASSERT_EQ(a.ellipses.size(), b.ellipses.size());
  for (std::size_t i = 0; i < a.ellipses.size(); ++i) {
    EXPECT_EQ(a.ellipses[i].cx_mm, b.ellipses[i].cx_mm);
    EXPECT_EQ(a.ellipses[i].delta_mu, b.ellipses[i].delta_mu);
  }
  const PhantomSpec c = random_phantom_spec(64, 64, 1.0, 6, 43);
  EXPECT_NE(a.ellipses[1].cx_mm, c.ellipses[1].cx_mm);

  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Image img = generate_phantom(random_phantom_spec(64, 64, 1.0, 6, seed));
    for (double v : img.values) EXPECT_GE(v, 0.0);
  }
}

TEST(Phantom, RejectsBadSpecs) {
  PhantomSpec spec;
  spec.width = 0;
  spec.height = 8;
  EXPECT_THROW(generate_phantom(spec), validation_error);
  spec.width = 8;
  spec.pixel_size = -1.0;
  EXPECT_THROW(generate_phantom(spec), validation_error);
  spec.pixel_size = 1.0;
  spec.ellipses.push_back({0.0, 0.0, 0.0, 1.0, 0.0, 0.1});
  EXPECT_THROW(generate_phantom(spec), validation_error);
}

TEST(Hounsfield, ReferencePoints) {
  Image mu(3, 1, 1.0);
  mu.values = {0.0, 0.02, 0.04};
  const Image hu = mu_to_hu(mu, 0.02);
  EXPECT_DOUBLE_EQ(hu.values[0], -1000.0);
  EXPECT_DOUBLE_EQ(hu.values[1], 0.0);
  EXPECT_DOUBLE_EQ(hu.values[2], 1000.0);
  EXPECT_THROW(mu_to_hu(mu, 0.0), validation_error);
}

TEST(Rmse, ZeroOnIdenticalImages) {
  Image a(8, 8, 1.0, 0.02);
  EXPECT_EQ(rmse_hu(a, a, full_roi(8, 8), 0.02), 0.0);
}

TEST(Rmse, UniformOffsetMapsToExactHu) {
  // A constant mu offset of mu_water / 1000 is exactly one Hounsfield unit.
  Image truth(8, 8, 1.0, 0.02);
  Image recon = truth;
  for (double& v : recon.values) v += 0.02 / 1000.0;
  EXPECT_NEAR(rmse_hu(recon, truth, full_roi(8, 8), 0.02), 1.0, 1e-12);
}

TEST(Rmse, SinglePixelRoiIsTheAbsoluteError) {
  Image truth(4, 4, 1.0, 0.02);
  Image recon = truth;
  recon.at(2, 1) += 0.001;  // +50 HU at mu_water 0.02
  recon.at(0, 0) += 0.5;    // huge error outside the mask
  Roi roi{4, 4, std::vector<std::uint8_t>(16, 0)};
  roi.mask[2 * 4 + 1] = 1;
  EXPECT_NEAR(rmse_hu(recon, truth, roi, 0.02), 50.0, 1e-9);
}

TEST(Rmse, RejectsEmptyOrMismatchedMasks) {
  Image a(4, 4, 1.0), b(4, 4, 1.0);
  Roi empty{4, 4, std::vector<std::uint8_t>(16, 0)};
  EXPECT_THROW(rmse_hu(a, b, empty, 0.02), validation_error);
  EXPECT_THROW(rmse_hu(a, b, full_roi(5, 4), 0.02), validation_error);
  EXPECT_THROW(rmse_hu(a, Image(5, 4, 1.0), full_roi(4, 4), 0.02), validation_error);
}

TEST(Roi, DiscSelectsTheCenterNotTheCorners) {
  const Roi roi = disc_roi(16, 16, 0.8);
  EXPECT_TRUE(roi.mask[8 * 16 + 8]);
  EXPECT_FALSE(roi.mask[0]);
  EXPECT_FALSE(roi.mask[15 * 16 + 15]);
  long count = 0;
  for (auto m : roi.mask) count += m;
  EXPECT_GT(count, 0);
  EXPECT_LT(count, 256);
}
