#include "trilost/optimal.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <limits>

#include "trilost/poly.hpp"

namespace trilost {

namespace {

double scene_scale(const Vec3& p1, const Vec3& p2) {
  return std::max({p1.norm(), p2.norm(), (p2 - p1).norm()});
}

// Copy of `ob` measuring image-plane point x instead.
LosObservation with_image_point(const LosObservation& ob, const Vec3& x) {
  LosObservation out = ob;
  out.pixel.uv = (ob.intrinsics.K() * (x / x(2))).head<2>();
  return out;
}

// Rigid map sending x to the origin and rotating the epipolar line through
// it onto the x axis, with the epipole on the positive side.
Mat3 epipolar_frame(const Vec3& e, const Vec3& x) {
  const double s0 = e(1) - e(2) * x(1);
  const double c0 = e(2) * x(0) - e(0);
  const double len = std::hypot(s0, c0);
  if (len <= 1e-14 * e.norm()) {
    fail(ErrorCode::DegenerateBaseline, "measurement coincides with the epipole");
  }
  const double sn = -s0 / len;
  const double cs = -c0 / len;
  Mat3 m;
  m << cs, -sn, x(1) * sn - x(0) * cs,
       sn, cs, -x(1) * cs - x(0) * sn,
       0.0, 0.0, 1.0;
  return m;
}

Mat3 rigid_inverse(const Mat3& m) {
  Mat3 inv = Mat3::Identity();
  inv.topLeftCorner<2, 2>() = m.topLeftCorner<2, 2>().transpose();
  inv.topRightCorner<2, 1>() = -m.topLeftCorner<2, 2>().transpose() * m.topRightCorner<2, 1>();
  return inv;
}

TriangulationEstimate triangulate_corrected(const LosObservation& ob1, const LosObservation& ob2,
                                            const TwoViewCorrection& corr) {
  const std::array<LosObservation, 2> fixed = {with_image_point(ob1, corr.x1),
                                               with_image_point(ob2, corr.x2)};
  TriangulationEstimate est = dlt_triangulate(fixed);
  est.covariance = hs_covariance(ob1, ob2);
  const std::array<LosObservation, 2> raw = {ob1, ob2};
  fill_range_diagnostics(raw, est);
  return est;
}

}  // namespace

EpipolarSetup hs_setup(const LosObservation& ob1, const LosObservation& ob2) {
  const Vec3 base = ob2.anchor - ob1.anchor;
  if (base.norm() == 0.0 || base.norm() <= 1e-12 * scene_scale(ob1.anchor, ob2.anchor)) {
    fail(ErrorCode::CoincidentCameras, "baseline between the two views vanishes");
  }
  const Mat3& t1 = ob1.attitude.matrix();
  const Mat3& t2 = ob2.attitude.matrix();
  EpipolarSetup s;
  s.e1 = t1 * base;
  s.e2 = -(t2 * base);
  s.E = t2 * t1.transpose() * skew(s.e1);
  const Vec3 x1 = ob1.image_plane();
  const Vec3 x2 = ob2.image_plane();
  s.M1 = epipolar_frame(s.e1, x1);
  s.M2 = epipolar_frame(s.e2, x2);
  const Vec3 m1e = s.M1 * s.e1;
  const Vec3 m2e = s.M2 * s.e2;
  s.f1 = m1e(2) / m1e(0);
  s.f2 = m2e(2) / m2e(0);
  Mat3 ep = rigid_inverse(s.M2).transpose() * s.E * rigid_inverse(s.M1);
  ep /= ep.block<2, 2>(1, 1).cwiseAbs().maxCoeff();
  s.a = ep(1, 1);
  s.b = ep(1, 2);
  s.c = ep(2, 1);
  s.d = ep(2, 2);
  return s;
}

PolySix hs_polynomial(const EpipolarSetup& s, const TwoViewWeights& w) {
  const VecX atb = (VecX(2) << s.b, s.a).finished();
  const VecX ctd = (VecX(2) << s.d, s.c).finished();
  const VecX q = poly_mul(atb, atb) + s.f2 * s.f2 * poly_mul(ctd, ctd);
  const VecX one_ft = (VecX(3) << 1.0, 0.0, s.f1 * s.f1).finished();
  const VecX lhs = w.w1 * poly_mul((VecX(2) << 0.0, 1.0).finished(), poly_mul(q, q));
  const VecX rhs = w.w2 * (s.a * s.d - s.b * s.c) *
                   poly_mul(poly_mul(one_ft, one_ft), poly_mul(atb, ctd));
  PolySix g = PolySix::Zero();
  g.head(lhs.size()) += lhs;
  g.head(rhs.size()) -= rhs;
  return g;
}

double hs_cost(const EpipolarSetup& s, const TwoViewWeights& w, double t) {
  const double ct = s.c * t + s.d;
  const double at = s.a * t + s.b;
  return w.w1 * t * t / (1.0 + s.f1 * s.f1 * t * t) +
         w.w2 * ct * ct / (at * at + s.f2 * s.f2 * ct * ct);
}

double hs_cost_at_infinity(const EpipolarSetup& s, const TwoViewWeights& w) {
  if (s.f1 == 0.0) return std::numeric_limits<double>::infinity();
  const double den = s.a * s.a + s.f2 * s.f2 * s.c * s.c;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return w.w1 / (s.f1 * s.f1) + w.w2 * s.c * s.c / den;
}

TwoViewWeights default_weights(const LosObservation& ob1, const LosObservation& ob2) {
  const double s1 = isotropic_image_sigma(ob1);
  const double s2 = isotropic_image_sigma(ob2);
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    fail(ErrorCode::InvalidInput, "pixel noise must be positive");
  }
  return {1.0 / (s1 * s1), 1.0 / (s2 * s2)};
}

TwoViewCorrection hs_correct(const LosObservation& ob1, const LosObservation& ob2,
                             const TwoViewWeights& w) {
  const EpipolarSetup s = hs_setup(ob1, ob2);
  TwoViewCorrection best;
  best.cost = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double t : real_roots(hs_polynomial(s, w))) {
    const double j = hs_cost(s, w, t);
    if (!std::isfinite(j)) continue;
    if (!found || j < best.cost || (j == best.cost && std::abs(t) < std::abs(best.parameter))) {
      best.cost = j;
      best.parameter = t;
      found = true;
    }
  }
  const double jinf = hs_cost_at_infinity(s, w);
  if (std::isfinite(jinf) && (!found || jinf < best.cost)) {
    best.cost = jinf;
    best.at_infinity = true;
    best.parameter = std::numeric_limits<double>::infinity();
    found = true;
  }
  if (!found) fail(ErrorCode::NoRealRoot, "two-view polynomial has no usable real root");

  Vec3 y1, y2;
  if (best.at_infinity) {
    y1 << s.f1, 0.0, s.f1 * s.f1;
    y2 << s.f2 * s.c * s.c, -s.a * s.c, s.f2 * s.f2 * s.c * s.c + s.a * s.a;
  } else {
    const double t = best.parameter;
    const double ct = s.c * t + s.d;
    const double at = s.a * t + s.b;
    y1 << s.f1 * t * t, t, s.f1 * s.f1 * t * t + 1.0;
    y2 << s.f2 * ct * ct, -at * ct, s.f2 * s.f2 * ct * ct + at * at;
  }
  best.x1 = rigid_inverse(s.M1) * y1;
  best.x2 = rigid_inverse(s.M2) * y2;
  best.x1 /= best.x1(2);
  best.x2 /= best.x2(2);
  return best;
}

TriangulationEstimate hs_triangulate(const LosObservation& ob1, const LosObservation& ob2,
                                     std::optional<TwoViewWeights> w) {
  const TwoViewWeights ww = w ? *w : default_weights(ob1, ob2);
  return triangulate_corrected(ob1, ob2, hs_correct(ob1, ob2, ww));
}

Mat3 hs_covariance(const LosObservation& ob1, const LosObservation& ob2) {
  const std::array<LosObservation, 2> obs = {ob1, ob2};
  const std::vector<double> gamma = lost_gamma_all(obs);
  Mat3 info = Mat3::Zero();
  for (std::size_t i = 0; i < 2; ++i) {
    const LosObservation& ob = obs[i];
    // Linearize where the measured line of sight meets the law-of-sines range.
    const Vec3 r = ob.anchor - gamma[i] * ob.los_world();
    const Eigen::Matrix<double, 2, 3> a =
        projection_jacobian(ob.intrinsics, ob.attitude, ob.anchor, r);
    info += a.transpose() * ob.pixel_cov.R.inverse() * a;
  }
  Eigen::JacobiSVD<Mat3> svd(info);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(2) < kDefaultRankTolerance * sv(0)) {
    fail(ErrorCode::RankDeficient, "two-view information matrix is singular");
  }
  const Mat3 p = info.inverse();
  return 0.5 * (p + p.transpose());
}

QuatCoeffs quat_coefficients(const LosObservation& ob1, const LosObservation& ob2,
                             const TwoViewWeights& w) {
  if ((ob1.attitude.matrix() - ob2.attitude.matrix()).cwiseAbs().maxCoeff() > 1e-12) {
    fail(ErrorCode::InvalidInput, "shared-attitude solver needs identical attitudes");
  }
  QuatCoeffs q;
  const Vec3 base = ob2.anchor - ob1.anchor;
  if (base.norm() == 0.0 || base.norm() <= 1e-12 * scene_scale(ob1.anchor, ob2.anchor)) {
    fail(ErrorCode::DegenerateBaseline, "baseline between the two views vanishes");
  }
  q.baseline = ob1.attitude.matrix() * base;
  const double d = q.baseline(0), e = q.baseline(1), f = q.baseline(2);
  const Vec3 m1 = ob1.image_plane();
  const Vec3 m2 = ob2.image_plane();
  const double x1 = m1(0), y1 = m1(1), x2 = m2(0), y2 = m2(1);
  const double w1 = w.w1, w2 = w.w2;
  const double bracket = f * (x2 * y1 - x1 * y2) + e * (x1 - x2) + d * (y2 - y1);
  q.h2 = f * f * w1 * w2 * bracket;
  q.h1 = -2.0 * w1 * w2 *
         (f * f * (w1 * x1 * x1 + w1 * y1 * y1 + w2 * x2 * x2 + w2 * y2 * y2) -
          2.0 * f * (d * w1 * x1 + d * w2 * x2 + e * w1 * y1 + e * w2 * y2) +
          (d * d + e * e) * (w1 + w2));
  q.h0 = 4.0 * w1 * w1 * w2 * w2 * bracket;
  return q;
}

std::pair<Vec2, Vec2> quat_corrected_points(const LosObservation& ob1, const LosObservation& ob2,
                                            const TwoViewWeights& w, double lambda) {
  const Vec3 b = ob1.attitude.matrix() * (ob2.anchor - ob1.anchor);
  const double d = b(0), e = b(1), f = b(2);
  const Vec3 m1 = ob1.image_plane();
  const Vec3 m2 = ob2.image_plane();
  const double x1 = m1(0), y1 = m1(1), x2 = m2(0), y2 = m2(1);
  const double w1 = w.w1, w2 = w.w2;
  const double l = lambda;
  const double den = f * f * l * l - 4.0 * w1 * w2;
  const double k = 4.0 * w1 * w2;
  Vec2 c1((d * f * l * l + 2.0 * w2 * (e - f * y2) * l - k * x1) / den,
          (e * f * l * l + 2.0 * w2 * (f * x2 - d) * l - k * y1) / den);
  Vec2 c2((d * f * l * l + 2.0 * w1 * (f * y1 - e) * l - k * x2) / den,
          (e * f * l * l + 2.0 * w1 * (d - f * x1) * l - k * y2) / den);
  return {c1, c2};
}

TwoViewCorrection quat_correct(const LosObservation& ob1, const LosObservation& ob2,
                               const TwoViewWeights& w) {
  const QuatCoeffs q = quat_coefficients(ob1, ob2, w);
  std::vector<double> lambdas;
  // Linear branch when the quadratic term is negligible at the small root,
  // i.e. |h2 lambda| << |h1| with lambda ~ -h0 / h1. This covers f -> 0.
  if (std::abs(q.h2 * q.h0) < kQuatLinearSwitch * q.h1 * q.h1) {
    if (q.h1 == 0.0) fail(ErrorCode::DegenerateBaseline, "constraint quadratic is degenerate");
    lambdas.push_back(-q.h0 / q.h1);
  } else {
    const double disc = q.h1 * q.h1 - 4.0 * q.h2 * q.h0;
    if (disc < 0.0) fail(ErrorCode::NoRealRoot, "constraint quadratic has no real root");
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (q.h1 + (q.h1 >= 0.0 ? sq : -sq));
    if (qq != 0.0) {
      lambdas.push_back(q.h0 / qq);
      lambdas.push_back(qq / q.h2);
    } else {
      lambdas.push_back(0.0);
    }
  }
  const Vec2 m1 = ob1.image_plane().head<2>();
  const Vec2 m2 = ob2.image_plane().head<2>();
  TwoViewCorrection best;
  best.cost = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double l : lambdas) {
    if (!std::isfinite(l)) continue;
    const auto [c1, c2] = quat_corrected_points(ob1, ob2, w, l);
    if (!c1.allFinite() || !c2.allFinite()) continue;
    const double j = w.w1 * (c1 - m1).squaredNorm() + w.w2 * (c2 - m2).squaredNorm();
    if (!found || j < best.cost) {
      best.cost = j;
      best.parameter = l;
      best.x1 << c1, 1.0;
      best.x2 << c2, 1.0;
      found = true;
    }
  }
  if (!found) fail(ErrorCode::NoRealRoot, "no finite multiplier");
  return best;
}

TriangulationEstimate quat_triangulate(const LosObservation& ob1, const LosObservation& ob2,
                                       std::optional<TwoViewWeights> w) {
  const TwoViewWeights ww = w ? *w : default_weights(ob1, ob2);
  return triangulate_corrected(ob1, ob2, quat_correct(ob1, ob2, ww));
}

double lost_gamma(Observations obs, std::size_t i, std::size_t j) {
  const Vec3 li = obs[i].los_world();
  const Vec3 lj = obs[j].los_world();
  const double den = li.cross(lj).norm();
  if (!(den > 1e-12 * li.norm() * lj.norm())) {
    fail(ErrorCode::ParallelRays, "lines of sight are parallel");
  }
  return (obs[j].anchor - obs[i].anchor).cross(lj).norm() / den;
}

std::vector<double> lost_gamma_all(Observations obs) {
  const std::size_t n = obs.size();
  if (n < 2) fail(ErrorCode::TooFewObservations, "need at least 2 observations");
  std::vector<double> gamma(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    try {
      gamma[i] = lost_gamma(obs, i, j);
      continue;
    } catch (const Error&) {
      if (n == 2) throw;
    }
    const Vec3 li = obs[i].los_world().normalized();
    std::size_t best = n;
    double best_sin = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double s = li.cross(obs[k].los_world().normalized()).norm();
      if (s > best_sin) {
        best_sin = s;
        best = k;
      }
    }
    if (best == n) fail(ErrorCode::ParallelRays, "all lines of sight are parallel");
    gamma[i] = lost_gamma(obs, i, best);
  }
  return gamma;
}

LostWeights lost_weights(Observations obs) {
  LostWeights w;
  w.gamma = lost_gamma_all(obs);
  w.q.resize(obs.size());
  w.sigma_x.resize(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    w.sigma_x[i] = isotropic_image_sigma(obs[i]);
    w.q[i] = 1.0 / (w.sigma_x[i] * w.gamma[i]);
  }
  return w;
}

namespace {

bool all_isotropic(Observations obs) {
  for (const auto& ob : obs) {
    if (!ob.intrinsics.square_pixels() || !ob.pixel_cov.is_isotropic()) return false;
  }
  return true;
}

// Square root of the weight matrix, B^T B = W.
Mat3 weight_root(const Mat3& w) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (w + w.transpose()));
  const Vec3 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

TriangulationEstimate lost_triangulate(Observations obs, LeastSquaresBackend backend) {
  if (obs.size() < 2) fail(ErrorCode::TooFewObservations, "need at least 2 observations");
  const auto n = static_cast<Eigen::Index>(obs.size());
  MatX a;
  VecX b;
  if (all_isotropic(obs)) {
    const LostWeights w = lost_weights(obs);
    a.resize(2 * n, 3);
    b.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Mat23 h = w.q[i] * selector() * skew(obs[i].image_plane()) * obs[i].attitude.matrix();
      a.middleRows<2>(2 * i) = h;
      b.segment<2>(2 * i) = h * obs[i].anchor;
    }
  } else {
    const std::vector<double> gamma = lost_gamma_all(obs);
    a.resize(3 * n, 3);
    b.resize(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 x = obs[i].image_plane();
      const Mat3 wroot = weight_root(
          residual_cov_pseudoinverse(x, image_plane_covariance(obs[i]), gamma[i]));
      const Mat3 h = wroot * skew(x) * obs[i].attitude.matrix();
      a.middleRows<3>(3 * i) = h;
      b.segment<3>(3 * i) = h * obs[i].anchor;
    }
  }
  const StackedSolution sol = solve_stacked(a, b, backend);
  TriangulationEstimate est;
  est.position = sol.x;
  est.diagnostics.condition_number = sol.condition_number;
  est.diagnostics.residual_norm = sol.residual_norm;
  est.covariance = lost_covariance(obs);
  fill_range_diagnostics(obs, est);
  return est;
}

Mat3 lost_covariance(Observations obs) {
  if (obs.size() < 2) fail(ErrorCode::TooFewObservations, "need at least 2 observations");
  Mat3 info = Mat3::Zero();
  if (all_isotropic(obs)) {
    const LostWeights w = lost_weights(obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Mat23 h = selector() * skew(obs[i].image_plane()) * obs[i].attitude.matrix();
      info += w.q[i] * w.q[i] * h.transpose() * h;
    }
  } else {
    const std::vector<double> gamma = lost_gamma_all(obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Vec3 x = obs[i].image_plane();
      const Mat3 h = skew(x) * obs[i].attitude.matrix();
      info += h.transpose() *
              residual_cov_pseudoinverse(x, image_plane_covariance(obs[i]), gamma[i]) * h;
    }
  }
  Eigen::JacobiSVD<Mat3> svd(info);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(2) < kDefaultRankTolerance * sv(0)) {
    fail(ErrorCode::RankDeficient, "information matrix is singular");
  }
  const Mat3 p = info.inverse();
  return 0.5 * (p + p.transpose());
}

Mat3 residual_cov_pseudoinverse(const Vec3& x, const Mat3& image_cov, double gamma) {
  const Mat3 xs = skew(x);
  const Mat3 r = -(gamma * gamma) * xs * image_cov * xs;
  Eigen::JacobiSVD<Mat3> svd(0.5 * (r + r.transpose()), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  Vec3 inv = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    if (s(k) > 1e-12 * s(0)) inv(k) = 1.0 / s(k);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat3 residual_cov_pseudoinverse_isotropic(const Vec3& x, double sigma_x, double gamma) {
  const Mat3 xs2 = skew(x) * skew(x);
  const double n2 = x.squaredNorm();
  return xs2 * selector().transpose() * selector() * xs2 /
         (sigma_x * sigma_x * gamma * gamma * n2 * n2);
}

}  // namespace trilost
