#include "trilost/optimal.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "trilost/poly.hpp"

namespace trilost {
namespace {

using testing_util::perturb;
using testing_util::random_scene;
using testing_util::random_unit;

std::vector<LosObservation> unit_fixture() {
  LosObservation a, b;
  a.anchor = Vec3(1.0, 0.0, 1.0);
  a.pixel.uv = Vec2(1.0, 0.0);
  b.anchor = Vec3(-1.0, 0.0, 1.0);
  b.pixel.uv = Vec2(-1.0, 0.0);
  return {a, b};
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidInput;
}

TEST(Poly, RootsOfKnownSextic) {
  // (t-1)(t+2)(t-3)(t^2+1)(t-0.5)
  VecX c = (VecX(2) << -1.0, 1.0).finished();
  c = poly_mul(c, (VecX(2) << 2.0, 1.0).finished());
  c = poly_mul(c, (VecX(2) << -3.0, 1.0).finished());
  c = poly_mul(c, (VecX(3) << 1.0, 0.0, 1.0).finished());
  c = poly_mul(c, (VecX(2) << -0.5, 1.0).finished());
  std::vector<double> r = real_roots(c);
  std::sort(r.begin(), r.end());
  ASSERT_EQ(r.size(), 4u);
  EXPECT_NEAR(r[0], -2.0, 1e-12);
  EXPECT_NEAR(r[1], 0.5, 1e-12);
  EXPECT_NEAR(r[2], 1.0, 1e-12);
  EXPECT_NEAR(r[3], 3.0, 1e-12);
  EXPECT_EQ(polynomial_roots(c).size(), 6u);
}

TEST(Poly, DropsVanishingLeadingCoefficients) {
  const VecX c = (VecX(4) << -2.0, 1.0, 0.0, 0.0).finished();
  const auto r = real_roots(c);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0], 2.0);
}

TEST(Lost, GammaOnUnitFixture) {
  const auto obs = unit_fixture();
  EXPECT_NEAR(lost_gamma(obs, 0, 1), 1.0, 1e-15);
  EXPECT_NEAR(lost_gamma(obs, 1, 0), 1.0, 1e-15);
}

TEST(Lost, GammaRejectsParallelRays) {
  auto obs = unit_fixture();
  obs[1].pixel.uv = Vec2(1.0, 0.0);
  EXPECT_EQ(code_of([&] { lost_gamma(obs, 0, 1); }), ErrorCode::ParallelRays);
}

TEST(Optimal, UnitFixtureAllSolvers) {
  const auto obs = unit_fixture();
  EXPECT_LE(lost_triangulate(obs).position.norm(), 1e-15);
  EXPECT_LE(hs_triangulate(obs[0], obs[1]).position.norm(), 1e-15);
  EXPECT_LE(quat_triangulate(obs[0], obs[1]).position.norm(), 1e-15);
}

TEST(Optimal, NoiseFreeExactness) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_scene(rng, 2 + trial % 6);
    const double tol = 1e-9 * s.scale;
    for (auto backend : {LeastSquaresBackend::NormalEquations, LeastSquaresBackend::QR,
                         LeastSquaresBackend::TotalLeastSquares}) {
      EXPECT_LE((lost_triangulate(s.obs, backend).position - s.truth).norm(), tol);
    }
    const auto two = random_scene(rng, 2);
    EXPECT_LE((hs_triangulate(two.obs[0], two.obs[1]).position - two.truth).norm(), 1e-9 * two.scale);
    const auto shared = random_scene(rng, 2, 0.5, 5.0, 50.0, 0.5, true);
    EXPECT_LE((quat_triangulate(shared.obs[0], shared.obs[1]).position - shared.truth).norm(),
              1e-9 * shared.scale);
  }
}

TEST(Hs, StationarityPolynomialMatchesCostDerivative) {
  // dJ/dt = 2 g(t) / ((1 + f1^2 t^2)^2 Q(t)^2), Q = (at + b)^2 + f2^2 (ct + d)^2.
  std::mt19937_64 rng(32);
  std::normal_distribution<double> tn(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_scene(rng, 2, 1.0);
    const auto noisy = perturb(s.obs, rng);
    const EpipolarSetup e = hs_setup(noisy[0], noisy[1]);
    const TwoViewWeights w{1.0 + trial % 3, 2.0};
    const PolySix g = hs_polynomial(e, w);
    for (int k = 0; k < 5; ++k) {
      const double t = tn(rng);
      const double h = 1e-5;
      const double fd = (hs_cost(e, w, t + h) - hs_cost(e, w, t - h)) / (2.0 * h);
      const double at = e.a * t + e.b, ct = e.c * t + e.d;
      const double q = at * at + e.f2 * e.f2 * ct * ct;
      const double one = 1.0 + e.f1 * e.f1 * t * t;
      const double an = 2.0 * poly_eval(g, t) / (one * one * q * q);
      EXPECT_NEAR(fd, an, 1e-6 * (1.0 + std::abs(an)));
    }
  }
}

TEST(Hs, SelectedRootIsGlobalMinimum) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_scene(rng, 2, 2.0);
    const auto noisy = perturb(s.obs, rng);
    const TwoViewWeights w = default_weights(noisy[0], noisy[1]);
    const EpipolarSetup e = hs_setup(noisy[0], noisy[1]);
    const TwoViewCorrection c = hs_correct(noisy[0], noisy[1], w);
    for (double t : real_roots(hs_polynomial(e, w))) EXPECT_LE(c.cost, hs_cost(e, w, t) * (1 + 1e-12));
    EXPECT_LE(c.cost, hs_cost_at_infinity(e, w) * (1 + 1e-12));
    // Oracle: dense scan of the cost over t = tan(theta).
    double scan = INFINITY;
    for (int k = -20000; k < 20000; ++k) {
      scan = std::min(scan, hs_cost(e, w, std::tan(k * M_PI / 40001.0)));
    }
    EXPECT_LE(c.cost, scan * (1 + 1e-9));
    // Corrected points are consistent with the epipolar geometry.
    EXPECT_LE(std::abs(c.x2.dot(e.E * c.x1)), 1e-12 * e.E.norm() * c.x1.norm() * c.x2.norm());
    // The cost equals the weighted squared corrections.
    const double direct = w.w1 * (c.x1 - noisy[0].image_plane()).squaredNorm() +
                          w.w2 * (c.x2 - noisy[1].image_plane()).squaredNorm();
    EXPECT_NEAR(direct, c.cost, 1e-8 * (1.0 + c.cost));
  }
}

TEST(Hs, MatchesReprojectionMle) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_scene(rng, 2, 1.0);
    const auto noisy = perturb(s.obs, rng);
    const Vec3 hs = hs_triangulate(noisy[0], noisy[1]).position;
    const Vec3 mle = testing_util::reprojection_mle(noisy, dlt_triangulate(noisy).position, 0.0, 1);
    const double sigma = std::sqrt(hs_covariance(noisy[0], noisy[1]).trace());
    EXPECT_LE((hs - mle).norm(), 1e-6 * sigma);
  }
}

TEST(Hs, Errors) {
  auto obs = unit_fixture();
  auto same = obs;
  same[1].anchor = same[0].anchor;
  EXPECT_EQ(code_of([&] { hs_triangulate(same[0], same[1]); }), ErrorCode::CoincidentCameras);
  auto nonsquare = obs;
  nonsquare[0].intrinsics.dy = 2.0;
  EXPECT_EQ(code_of([&] { hs_triangulate(nonsquare[0], nonsquare[1]); }),
            ErrorCode::NonSquarePixels);
}

TEST(Quat, CoefficientsAgreeWithLagrangeConditions) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_scene(rng, 2, 1.0, 5.0, 50.0, 0.6, true);
    const auto noisy = perturb(s.obs, rng);
    const TwoViewWeights w{1.0 + trial % 4, 0.5 + trial % 3};
    const TwoViewCorrection c = quat_correct(noisy[0], noisy[1], w);
    const Vec3 b = noisy[0].attitude.matrix() * (noisy[1].anchor - noisy[0].anchor);
    // Constraint x1 . (x2 x b) = 0 at the corrected points.
    EXPECT_LE(std::abs(c.x1.dot(c.x2.cross(b))), 1e-10 * b.norm() * c.x1.norm() * c.x2.norm());
    // Gradient of the Lagrangian: 2 w_i (xhat_i - x_i) + lambda dC/dxhat_i = 0.
    const double l = c.parameter;
    const Vec3 x1 = noisy[0].image_plane(), x2 = noisy[1].image_plane();
    const Vec3 g1 = 2.0 * w.w1 * (c.x1 - x1) - l * (c.x2.cross(b));
    const Vec3 g2 = 2.0 * w.w2 * (c.x2 - x2) - l * (b.cross(c.x1));
    const double scale = w.w1 * (c.x1 - x1).norm() + w.w2 * (c.x2 - x2).norm() + 1e-12;
    EXPECT_LE(g1.head<2>().norm(), 1e-6 * scale);
    EXPECT_LE(g2.head<2>().norm(), 1e-6 * scale);
  }
}

TEST(Quat, MatchesTwoViewPolynomialMethod) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_scene(rng, 2, 1.0, 5.0, 50.0, 0.6, true);
    const auto noisy = perturb(s.obs, rng);
    const Vec3 q = quat_triangulate(noisy[0], noisy[1]).position;
    const Vec3 h = hs_triangulate(noisy[0], noisy[1]).position;
    EXPECT_LE((q - h).norm(), 1e-8 * s.scale);
  }
}

TEST(Quat, ZeroDepthBaselineUsesLimitRoot) {
  std::mt19937_64 rng(37);
  // Baseline orthogonal to the shared boresight, so f = 0.
  LosObservation a, b;
  a.intrinsics = b.intrinsics = testing_util::square_camera(800.0);
  a.pixel_cov = PixelCovariance::isotropic(0.3);
  b.pixel_cov = PixelCovariance::isotropic(0.6);
  a.anchor = Vec3(-2.0, 0.5, 10.0);
  b.anchor = Vec3(3.0, 1.0, 10.0);
  const Vec3 truth(0.1, -0.2, 0.0);
  a.pixel = project(a.intrinsics, a.attitude, a.anchor, truth);
  b.pixel = project(b.intrinsics, b.attitude, b.anchor, truth);
  a = perturb(a, rng);
  b = perturb(b, rng);
  const TwoViewWeights w = default_weights(a, b);
  const QuatCoeffs q = quat_coefficients(a, b, w);
  EXPECT_EQ(q.baseline(2), 0.0);
  EXPECT_EQ(q.h2, 0.0);
  const TwoViewCorrection c = quat_correct(a, b, w);
  // Closed-form limit 2 w1 w2 [e(x1 - x2) + d(y2 - y1)] / ((d^2 + e^2)(w1 + w2)).
  const Vec3 x1 = a.image_plane(), x2 = b.image_plane();
  const double d = q.baseline(0), e = q.baseline(1);
  const double lim = 2.0 * w.w1 * w.w2 * (e * (x1(0) - x2(0)) + d * (x2(1) - x1(1))) /
                     ((d * d + e * e) * (w.w1 + w.w2));
  EXPECT_NEAR(c.parameter, lim, 1e-12 * std::abs(lim));
  EXPECT_NEAR(c.parameter, -q.h0 / q.h1, 1e-12 * std::abs(lim));
  EXPECT_LE((quat_triangulate(a, b).position - hs_triangulate(a, b).position).norm(), 1e-9);
}

TEST(Quat, NoiseFreeMultiplierIsZero) {
  std::mt19937_64 rng(38);
  const auto s = random_scene(rng, 2, 1.0, 5.0, 50.0, 0.6, true);
  const TwoViewWeights w = default_weights(s.obs[0], s.obs[1]);
  const TwoViewCorrection c = quat_correct(s.obs[0], s.obs[1], w);
  EXPECT_LE(std::abs(c.parameter), 1e-6);
  EXPECT_LE(c.cost, 1e-12);
}

TEST(Quat, ContinuousAcrossLinearSwitch) {
  // Sweep the boresight component of the baseline through zero; the
  // multiplier must not jump where the solver changes branch.
  std::mt19937_64 rng(39);
  LosObservation a, b;
  a.intrinsics = b.intrinsics = testing_util::square_camera(800.0);
  a.pixel_cov = b.pixel_cov = PixelCovariance::isotropic(0.5);
  const Vec3 truth(0.0, 0.0, 0.0);
  const Vec2 noise1(0.4, -0.3), noise2(-0.2, 0.5);
  double prev = NAN;
  for (int k = -200; k <= 200; ++k) {
    const double dz = k * 1e-9;
    a.anchor = Vec3(-2.0, 0.5, 10.0);
    b.anchor = Vec3(3.0, 1.0, 10.0 + dz);
    a.pixel = project(a.intrinsics, a.attitude, a.anchor, truth);
    b.pixel = project(b.intrinsics, b.attitude, b.anchor, truth);
    a.pixel.uv += noise1;
    b.pixel.uv += noise2;
    const double l = quat_correct(a, b, default_weights(a, b)).parameter;
    if (!std::isnan(prev)) EXPECT_LE(std::abs(l - prev), 1e-6 * (1.0 + std::abs(l)));
    prev = l;
  }
}

TEST(Quat, Errors) {
  auto obs = unit_fixture();
  auto same = obs;
  same[1].anchor = same[0].anchor;
  EXPECT_EQ(code_of([&] { quat_triangulate(same[0], same[1]); }), ErrorCode::DegenerateBaseline);
  auto rotated = obs;
  rotated[1].attitude = Rotation::from_angle_axis(0.1, Vec3::UnitY());
  EXPECT_EQ(code_of([&] { quat_triangulate(rotated[0], rotated[1]); }), ErrorCode::InvalidInput);
}

TEST(Lost, PseudoinverseClosedFormMatchesSvd) {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> n(0.0, 0.6);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 x(n(rng), n(rng), 1.0);
    const double sigma = 1e-4 * (1 + trial % 9);
    const double gamma = 0.5 + trial % 13;
    const Mat3 rx = sigma * sigma * selector().transpose() * selector();
    const Mat3 closed = residual_cov_pseudoinverse_isotropic(x, sigma, gamma);
    // Oracle: generic SVD pseudoinverse of the residual covariance.
    const Mat3 r = -(gamma * gamma) * skew(x) * rx * skew(x);
    const Mat3 pinv = r.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LE((closed - pinv).norm(), 1e-9 * pinv.norm());
    EXPECT_LE((residual_cov_pseudoinverse(x, rx, gamma) - pinv).norm(), 1e-9 * pinv.norm());
  }
}

TEST(Lost, WeightsMatchDefinition) {
  std::mt19937_64 rng(41);
  const auto s = random_scene(rng, 4);
  const LostWeights w = lost_weights(s.obs);
  for (std::size_t i = 0; i < s.obs.size(); ++i) {
    const double range = (s.obs[i].anchor - s.truth).norm();
    EXPECT_NEAR(w.gamma[i], range / s.obs[i].image_plane().norm(), 1e-9 * range);
    EXPECT_NEAR(w.q[i], 1.0 / (w.sigma_x[i] * w.gamma[i]), 1e-12 * w.q[i]);
  }
}

TEST(Lost, HsCovarianceEqualsLostCovariance) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = random_scene(rng, 2, 0.7);
    const auto noisy = perturb(s.obs, rng);
    const Mat3 a = hs_covariance(noisy[0], noisy[1]);
    const Mat3 b = lost_covariance(noisy);
    EXPECT_LE((a - b).norm(), 1e-12 * b.norm());
  }
}

TEST(Lost, NeverWorseThanDltAnalytically) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_scene(rng, 2 + trial % 8);
    const Mat3 diff = dlt_covariance(s.obs) - lost_covariance(s.obs);
    Eigen::SelfAdjointEigenSolver<Mat3> es(diff);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * lost_covariance(s.obs).norm());
  }
}

TEST(Lost, MatchesMultiStartMleToSecondOrder) {
  // LOST and the pixel-reprojection MLE agree to first order in the noise, so
  // the gap measured in estimator sigmas shrinks linearly with the noise.
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = random_scene(rng, 3 + trial % 8, 0.2);
    const auto noisy = perturb(s.obs, rng);
    auto gap = [&](double c) {
      std::vector<LosObservation> obs = s.obs;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i].pixel.uv += c * (noisy[i].pixel.uv - s.obs[i].pixel.uv);
        obs[i].pixel_cov.R *= c * c;
      }
      const TriangulationEstimate lost = lost_triangulate(obs);
      const double sigma = std::sqrt(lost.covariance->trace());
      const Vec3 mle = testing_util::reprojection_mle(obs, lost.position, sigma);
      return (lost.position - mle).norm() / sigma;
    };
    const double coarse = gap(1.0);
    const double fine = gap(0.05);
    EXPECT_LE(coarse, 5e-2);
    EXPECT_LE(fine, 1e-3);
    EXPECT_LE(fine, 0.1 * coarse + 1e-5);
  }
}

TEST(Lost, GeneralNoisePath) {
  std::mt19937_64 rng(45);
  auto s = random_scene(rng, 4, 0.5);
  // Correlated, anisotropic pixel noise.
  for (auto& ob : s.obs) ob.pixel_cov.R << 0.5, 0.15, 0.15, 0.2;
  EXPECT_EQ(code_of([&] { lost_weights(s.obs); }), ErrorCode::NonIsotropicNoise);
  const TriangulationEstimate clean = lost_triangulate(s.obs);
  EXPECT_LE((clean.position - s.truth).norm(), 1e-9 * s.scale);
  // Oracle: sampled covariance and the generic weighted normal equations.
  Mat3 info = Mat3::Zero();
  const auto gamma = lost_gamma_all(s.obs);
  for (std::size_t i = 0; i < s.obs.size(); ++i) {
    const Vec3 x = s.obs[i].image_plane();
    const Mat3 h = skew(x) * s.obs[i].attitude.matrix();
    const Mat3 r = -(gamma[i] * gamma[i]) * skew(x) * image_plane_covariance(s.obs[i]) * skew(x);
    info += h.transpose() * r.completeOrthogonalDecomposition().pseudoInverse() * h;
  }
  EXPECT_LE((info.inverse() - *clean.covariance).norm(), 1e-9 * clean.covariance->norm());
  Mat3 acc = Mat3::Zero();
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const Vec3 e = lost_triangulate(perturb(s.obs, rng)).position - s.truth;
    acc += e * e.transpose();
  }
  acc /= draws;
  EXPECT_NEAR(std::sqrt(acc.trace() / clean.covariance->trace()), 1.0, 0.03);
}

TEST(Lost, IsotropicCovarianceMatchesSampling) {
  std::mt19937_64 rng(46);
  for (int n : {2, 3, 7}) {
    const auto s = random_scene(rng, n, 0.5);
    const Mat3 p = lost_covariance(s.obs);
    Mat3 acc = Mat3::Zero();
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
      const Vec3 e = lost_triangulate(perturb(s.obs, rng)).position - s.truth;
      acc += e * e.transpose();
    }
    acc /= draws;
    EXPECT_NEAR(std::sqrt(acc.trace() / p.trace()), 1.0, 0.03) << n;
  }
}

}  // namespace
}  // namespace trilost
