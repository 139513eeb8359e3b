#include "trilost/linear.hpp"

#include "trilost/optimal.hpp"

namespace trilost {

namespace {

void require_views(Observations obs, std::size_t n) {
  if (obs.size() < n) {
    fail(ErrorCode::TooFewObservations,
         "need at least " + std::to_string(n) + " observations");
  }
}

double norm_scale(const Vec3& x, LosNormalization norm) {
  return norm == LosNormalization::UnitVector ? 1.0 / x.norm() : 1.0;
}

Mat3 inverse_spd(const Mat3& m) {
  return m.ldlt().solve(Mat3::Identity());
}

}  // namespace

void fill_range_diagnostics(Observations obs, TriangulationEstimate& est) {
  auto& d = est.diagnostics;
  d.ranges.resize(obs.size());
  d.negative_range.resize(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    d.ranges[i] = obs[i].unit_los_world().dot(obs[i].anchor - est.position);
    d.negative_range[i] = d.ranges[i] < 0.0;
  }
}

TriangulationEstimate dlt_triangulate(Observations obs, LosNormalization norm,
                                      LeastSquaresBackend backend) {
  require_views(obs, 2);
  const auto n = static_cast<Eigen::Index>(obs.size());
  MatX a(3 * n, 3);
  VecX b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LosObservation& ob = obs[i];
    const Vec3 x = ob.image_plane();
    const Mat3 h = norm_scale(x, norm) * skew(x) * ob.attitude.matrix();
    a.middleRows<3>(3 * i) = h;
    b.segment<3>(3 * i) = h * ob.anchor;
  }
  const StackedSolution sol = solve_stacked(a, b, backend);
  TriangulationEstimate est;
  est.position = sol.x;
  est.diagnostics.condition_number = sol.condition_number;
  est.diagnostics.residual_norm = sol.residual_norm;
  est.covariance = dlt_covariance(obs, norm);
  fill_range_diagnostics(obs, est);
  return est;
}

Mat3 dlt_covariance(Observations obs, LosNormalization norm) {
  require_views(obs, 2);
  const std::vector<double> gamma = lost_gamma_all(obs);
  Mat3 hth = Mat3::Zero();
  Mat3 mid = Mat3::Zero();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const LosObservation& ob = obs[i];
    const Vec3 x = ob.image_plane();
    const double s = norm_scale(x, norm);
    const Mat3 xs = skew(x);
    const Mat3 h = s * xs * ob.attitude.matrix();
    const Mat3 r_eps = -(s * s * gamma[i] * gamma[i]) * xs * image_plane_covariance(ob) * xs;
    hth += h.transpose() * h;
    mid += h.transpose() * r_eps * h;
  }
  const Mat3 hinv = inverse_spd(hth);
  const Mat3 p = hinv * mid * hinv;
  return 0.5 * (p + p.transpose());
}

TriangulationEstimate plucker_triangulate(Observations obs, double gap_tol) {
  require_views(obs, 2);
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::Matrix<double, Eigen::Dynamic, 4> a(4 * n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 l = obs[i].los_world();
    const Vec3& p = obs[i].anchor;
    a.block<3, 3>(4 * i, 0) = skew(l);
    a.block<3, 1>(4 * i, 3) = p.cross(l);
    a.block<1, 3>(4 * i + 3, 0) = l.cross(p).transpose();
    a(4 * i + 3, 3) = 0.0;
  }
  const NullDirection nd = null_direction(a, gap_tol);
  if (nd.v(3) < 1e-12 * nd.v.head<3>().norm()) {
    fail(ErrorCode::RankDeficient, "intersection lies at infinity");
  }
  TriangulationEstimate est;
  est.position = nd.v.head<3>() / nd.v(3);
  est.diagnostics.condition_number =
      nd.singular_values(2) > 0.0 ? nd.singular_values(0) / nd.singular_values(2) : INFINITY;
  est.diagnostics.residual_norm = nd.singular_values(3);

  // First-order covariance. The fourth row of each block is -p^T times the
  // first three, so the residual covariance is G R G^T with G = [I; -p^T].
  const MatX a3 = a.leftCols<3>();
  const Mat3 ata = a3.transpose() * a3;
  Mat3 mid = Mat3::Zero();
  const std::vector<double> gamma = lost_gamma_all(obs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LosObservation& ob = obs[i];
    const Vec3 x = ob.image_plane();
    const Mat3& t = ob.attitude.matrix();
    const Mat3 xs = skew(x);
    const Mat3 r_cam = -(gamma[i] * gamma[i]) * xs * image_plane_covariance(ob) * xs;
    Eigen::Matrix<double, 4, 3> g;
    g.topRows<3>() = Mat3::Identity();
    g.row(3) = -ob.anchor.transpose();
    const Eigen::Matrix<double, 4, 4> r4 = g * t.transpose() * r_cam * t * g.transpose();
    const Eigen::Matrix<double, 4, 3> ai = a3.middleRows<4>(4 * i);
    mid += ai.transpose() * r4 * ai;
  }
  const Mat3 inv = inverse_spd(ata);
  const Mat3 p = inv * mid * inv;
  est.covariance = 0.5 * (p + p.transpose());
  fill_range_diagnostics(obs, est);
  return est;
}

std::pair<Mat23, Vec2> collinearity_rows(const LosObservation& ob) {
  const Mat23 m = selector() * skew(ob.image_plane()) * ob.attitude.matrix();
  return {m, m * ob.anchor};
}

TriangulationEstimate explicit_range_triangulate(Observations obs, LeastSquaresBackend backend) {
  require_views(obs, 2);
  const auto n = static_cast<Eigen::Index>(obs.size());
  std::vector<Vec3> a(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) a[i] = obs[i].unit_los_world();

  const Eigen::Index pairs = n * (n - 1) / 2;
  MatX m = MatX::Zero(2 * pairs, n);
  VecX y(2 * pairs);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 d = obs[j].anchor - obs[i].anchor;
      const double c = a[i].dot(a[j]);
      m(row, i) = -1.0;
      m(row, j) = c;
      y(row) = a[i].dot(d);
      ++row;
      m(row, i) = -c;
      m(row, j) = 1.0;
      y(row) = a[j].dot(d);
      ++row;
    }
  }
  const StackedSolution sol = solve_stacked(m, y, backend);

  TriangulationEstimate est;
  Vec3 sum = Vec3::Zero();
  for (Eigen::Index i = 0; i < n; ++i) sum += obs[i].anchor - sol.x(i) * a[i];
  est.position = sum / static_cast<double>(n);
  est.diagnostics.condition_number = sol.condition_number;
  est.diagnostics.residual_norm = sol.residual_norm;
  est.diagnostics.large_system_warning = obs.size() > kExplicitRangeWarnViews;
  if (n == 2) est.covariance = explicit_range_covariance_n2(obs);
  fill_range_diagnostics(obs, est);
  return est;
}

Mat3 explicit_range_covariance_n2(Observations obs) {
  if (obs.size() != 2) {
    fail(ErrorCode::WrongArity, "explicit-range covariance is defined for two views");
  }
  const Vec3 a1 = obs[0].unit_los_world();
  const Vec3 a2 = obs[1].unit_los_world();
  const Vec3 d = obs[1].anchor - obs[0].anchor;
  const double c = a1.dot(a2);
  if (std::abs(c * c - 1.0) < 1e-14) {
    fail(ErrorCode::ParallelRays, "lines of sight are parallel");
  }
  // Ranges of the noise-free system, used as the linearization point.
  Mat2 mm;
  mm << -1.0, c, -c, 1.0;
  const Vec2 rho = mm.inverse() * Vec2(a1.dot(d), a2.dot(d));

  // d rho = C d a with d a = [d a1; d a2] in the localization frame.
  Eigen::Matrix<double, 2, 6> g;
  g.block<1, 3>(0, 0) = d.transpose() - rho(1) * a2.transpose();
  g.block<1, 3>(0, 3) = -rho(1) * a1.transpose();
  g.block<1, 3>(1, 0) = rho(0) * a2.transpose();
  g.block<1, 3>(1, 3) = d.transpose() + rho(0) * a1.transpose();
  Mat2 minv;
  minv << 1.0, -c, c, -1.0;
  minv /= (c * c - 1.0);
  const Eigen::Matrix<double, 2, 6> cmat = minv * g;

  Eigen::Matrix<double, 3, 2> amat;
  amat << a1, a2;
  Eigen::Matrix<double, 3, 6> bmat;
  bmat << rho(0) * Mat3::Identity(), rho(1) * Mat3::Identity();
  const Eigen::Matrix<double, 3, 6> f = 0.5 * (amat * cmat + bmat);

  // d a_I = -D d x with D_i = T_i^T [a_C x]^2 / |x_i|.
  Eigen::Matrix<double, 6, 6> dr = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 2; ++i) {
    const Vec3 x = obs[i].image_plane();
    const Mat3 ac = skew(Vec3(x.normalized()));
    const Mat3 di = obs[i].attitude.matrix().transpose() * ac * ac / x.norm();
    dr.block<3, 3>(3 * i, 3 * i) = di * image_plane_covariance(obs[i]) * di.transpose();
  }
  const Mat3 p = f * dr * f.transpose();
  return 0.5 * (p + p.transpose());
}

Vec2 law_of_cosines_residual(double rho_i, double rho_j, const LosObservation& ob_i,
                             const LosObservation& ob_j) {
  const Vec3 ai = ob_i.unit_los_world();
  const Vec3 aj = ob_j.unit_los_world();
  const Vec3 d = ob_j.anchor - ob_i.anchor;
  const double c = ai.dot(aj);
  return {c * rho_j - rho_i - ai.dot(d), rho_j - c * rho_i - aj.dot(d)};
}

}  // namespace trilost
