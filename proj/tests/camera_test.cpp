#include "trilost/camera.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace trilost {
namespace {

using testing_util::random_rotation;
using testing_util::random_unit;

CameraIntrinsics random_intrinsics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CameraIntrinsics k;
  k.dx = 200.0 + 2000.0 * u(rng);
  k.dy = k.dx * (0.8 + 0.4 * u(rng));
  k.alpha = 5.0 * (u(rng) - 0.5);
  k.up = 1000.0 * u(rng);
  k.vp = 1000.0 * u(rng);
  return k;
}

TEST(Camera, UnitFixtureImagePlane) {
  CameraIntrinsics k;  // identity calibration
  const ImagePlanePoint x = pixel_to_image_plane(PixelPoint{Vec2(1.0, 0.0)}, k);
  EXPECT_EQ(x.homogeneous(), Vec3(1.0, 0.0, 1.0));
  const Vec3 a = image_plane_to_unit_vector(x.homogeneous());
  EXPECT_NEAR(a.x(), 1.0 / std::sqrt(2.0), 1e-16);
  EXPECT_NEAR(a.z(), 1.0 / std::sqrt(2.0), 1e-16);
}

TEST(Camera, AnalyticInverseMatchesNumericInverse) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const CameraIntrinsics k = random_intrinsics(rng);
    EXPECT_LE((k.K_inv() - k.K().inverse()).cwiseAbs().maxCoeff(), 1e-14);
    const PixelPoint u{Vec2(123.4 * i, -55.5 + i)};
    const PixelPoint back = image_plane_to_pixel(pixel_to_image_plane(u, k), k);
    EXPECT_LE((back.uv - u.uv).norm(), 1e-9);
  }
}

TEST(Camera, FovConversion) {
  const CameraIntrinsics k = CameraIntrinsics::from_fov(90.0, 1024.0);
  EXPECT_NEAR(k.dx, 512.0, 1e-12);
  EXPECT_NEAR(k.up, 512.0, 0.0);
  EXPECT_TRUE(k.square_pixels());
}

TEST(Camera, QmmCovarianceRequiresUnitVector) {
  EXPECT_THROW(qmm_covariance(Vec3(1.0, 0.0, 1e-4), 1e-3), Error);
  EXPECT_NO_THROW(qmm_covariance(Vec3(1.0, 0.0, 1e-6), 1e-3));
  const Vec3 a = Vec3(1.0, 2.0, 3.0).normalized();
  const Mat3 r = qmm_covariance(a, 2e-3);
  EXPECT_LE((r * a).norm(), 1e-18);
  EXPECT_NEAR(r.trace(), 2.0 * 4e-6, 1e-18);
}

TEST(Camera, ImagePlaneCovarianceMatchesSampling) {
  std::mt19937_64 rng(12);
  const CameraIntrinsics k = random_intrinsics(rng);
  Mat2 ru;
  ru << 0.4, 0.1, 0.1, 0.2;
  const Mat3 analytic = image_plane_covariance(k, ru);
  // Oracle: sample covariance of K^-1 u under pixel noise.
  const Eigen::LLT<Mat2> llt(ru);
  std::normal_distribution<double> n(0.0, 1.0);
  const int draws = 200000;
  Mat3 acc = Mat3::Zero();
  const Vec3 x0 = k.K_inv() * Vec3(300.0, 200.0, 1.0);
  for (int i = 0; i < draws; ++i) {
    const Vec2 du = llt.matrixL() * Vec2(n(rng), n(rng));
    const Vec3 x = k.K_inv() * Vec3(300.0 + du(0), 200.0 + du(1), 1.0);
    acc += (x - x0) * (x - x0).transpose();
  }
  acc /= draws;
  EXPECT_LE((acc - analytic).norm(), 0.02 * analytic.norm());
  EXPECT_EQ(analytic.row(2).norm(), 0.0);
}

TEST(Camera, UnitVectorCovarianceMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 x(n(rng), n(rng), 1.0);
    Mat2 r2;
    r2 << 1.0 + trial % 3, 0.2, 0.2, 0.5;
    r2 *= 1e-6;
    const Mat3 rx = selector().transpose() * r2 * selector();
    // Central differences of x / |x| in the image-plane coordinates.
    Eigen::Matrix<double, 3, 2> j;
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c) {
      Vec3 xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      j.col(c) = (xp.normalized() - xm.normalized()) / (2.0 * h);
    }
    const Mat3 fd = j * r2 * j.transpose();
    const Mat3 an = unit_vector_covariance(x, rx);
    EXPECT_LE((fd - an).norm(), 1e-7 * an.norm());
  }
}

TEST(Camera, TangentModelBoundsPropagatedModel) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x(n(rng), n(rng), 1.0);
    EXPECT_TRUE(qmm_dominates(x, 1e-4 * (1 + i % 7)));
  }
  // At boresight the two models coincide.
  const double s = 3e-4;
  const Mat3 rx = s * s * selector().transpose() * selector();
  EXPECT_LE((unit_vector_covariance(Vec3::UnitZ().eval(), rx) -
             qmm_covariance(Vec3::UnitZ(), s)).norm(),
            1e-20);
}

TEST(Camera, ProjectionJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const CameraIntrinsics k = random_intrinsics(rng);
    const Rotation t = random_rotation(rng);
    const Vec3 cam = random_unit(rng);
    const Vec3 p = cam + 10.0 * (t.matrix().transpose() * Vec3(0.1, -0.2, 1.0));
    const Eigen::Matrix<double, 2, 3> a = projection_jacobian(k, t, p, cam);
    Eigen::Matrix<double, 2, 3> fd;
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
      Vec3 rp = cam, rm = cam;
      rp(c) += h;
      rm(c) -= h;
      fd.col(c) = (project(k, t, p, rp).uv - project(k, t, p, rm).uv) / (2.0 * h);
    }
    EXPECT_LE((fd - a).norm(), 1e-6 * a.norm());
  }
}

TEST(Camera, IsotropicSigmaChecksPreconditions) {
  LosObservation ob;
  ob.intrinsics = testing_util::square_camera(500.0);
  ob.pixel_cov = PixelCovariance::isotropic(0.5);
  EXPECT_NEAR(isotropic_image_sigma(ob), 1e-3, 1e-18);
  ob.intrinsics.dy = 501.0;
  try {
    isotropic_image_sigma(ob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSquarePixels);
  }
  ob.intrinsics.dy = 500.0;
  ob.pixel_cov.R(0, 1) = ob.pixel_cov.R(1, 0) = 0.01;
  try {
    isotropic_image_sigma(ob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonIsotropicNoise);
  }
}

}  // namespace
}  // namespace trilost
