#include "trilost/dynamic.hpp"

namespace trilost {

Mat6 cw_stm(double t, double n) {
  const double c = std::cos(n * t);
  const double s = std::sin(n * t);
  Mat6 m = Mat6::Zero();
  if (n == 0.0) {
    m.setIdentity();
    m.topRightCorner<3, 3>() = t * Mat3::Identity();
    return m;
  }
  // position rows
  m(0, 0) = 4.0 - 3.0 * c;
  m(0, 3) = s / n;
  m(0, 4) = 2.0 * (1.0 - c) / n;
  m(1, 0) = 6.0 * (s - n * t);
  m(1, 1) = 1.0;
  m(1, 3) = -2.0 * (1.0 - c) / n;
  m(1, 4) = (4.0 * s - 3.0 * n * t) / n;
  m(2, 2) = c;
  m(2, 5) = s / n;
  // velocity rows
  m(3, 0) = 3.0 * n * s;
  m(3, 3) = c;
  m(3, 4) = 2.0 * s;
  m(4, 0) = -6.0 * n * (1.0 - c);
  m(4, 3) = -2.0 * s;
  m(4, 4) = 4.0 * c - 3.0;
  m(5, 2) = -n * s;
  m(5, 5) = c;
  return m;
}

Mat6 LinearStm::phi(double t) const {
  Mat6 m = Mat6::Identity();
  m.topRightCorner<3, 3>() = t * Mat3::Identity();
  return m;
}

std::pair<MatX, VecX> dynamic_system(DynamicObservations obs, const StmProvider& stm,
                                     LosNormalization norm) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  MatX a(3 * n, 6);
  VecX b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const DynamicObservation& ob = obs[i];
    const Vec3 x = ob.base.image_plane();
    const double s = norm == LosNormalization::UnitVector ? 1.0 / x.norm() : 1.0;
    const Mat3 h = s * skew(x) * ob.base.attitude.matrix();
    a.middleRows<3>(3 * i) = h * stm.phi_r(ob.time);
    b.segment<3>(3 * i) = h * ob.effective_target();
  }
  return {a, b};
}

namespace {

ObservabilityReport report_from_svd(const Eigen::JacobiSVD<MatX>& svd, DynamicObservations obs,
                                    const DynamicOptions& opts) {
  ObservabilityReport rep;
  const VecX s = svd.singularValues();
  rep.singular_values.head(s.size()) = s;
  const double smax = rep.singular_values(0);
  for (int k = 0; k < 6; ++k) {
    if (rep.singular_values(k) < opts.unobservable_tol * smax) {
      rep.null_directions.push_back(svd.matrixV().col(k).normalized());
    }
  }
  bool homogeneous = true;
  for (const auto& ob : obs) {
    if (ob.effective_target().norm() > opts.anchor_tol) homogeneous = false;
  }
  rep.homothety = homogeneous && rep.null_directions.size() == 1;
  return rep;
}

}  // namespace

ObservabilityReport observability_report(DynamicObservations obs, const StmProvider& stm,
                                         const DynamicOptions& opts) {
  if (obs.size() < 2) fail(ErrorCode::TooFewObservations, "need at least 2 observations");
  const auto [a, b] = dynamic_system(obs, stm, opts.normalization);
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinV);
  return report_from_svd(svd, obs, opts);
}

StateEstimate6 dynamic_dlt(DynamicObservations obs, const StmProvider& stm,
                           const DynamicOptions& opts) {
  if (obs.size() < 2) fail(ErrorCode::TooFewObservations, "need at least 2 observations");
  const auto [a, b] = dynamic_system(obs, stm, opts.normalization);
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  StateEstimate6 est;
  est.observability = report_from_svd(svd, obs, opts);
  const Vec6& sv = est.observability.singular_values;
  est.condition_number = sv(5) > 0.0 ? sv(0) / sv(5) : INFINITY;

  MatX pinv_ata;  // (A^T A)^+
  if (!est.observability.null_directions.empty()) {
    if (!opts.allow_partial) {
      throw UnobservableError("state is unobservable from these sightings", est.observability);
    }
    est.partial = true;
    VecX inv = VecX::Zero(6);
    for (int k = 0; k < 6; ++k) {
      if (sv(k) >= opts.unobservable_tol * sv(0)) inv(k) = 1.0 / sv(k);
    }
    est.state = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * b;
    pinv_ata = svd.matrixV() * inv.cwiseAbs2().asDiagonal() * svd.matrixV().transpose();
  } else {
    const StackedSolution sol = solve_stacked(a, b, opts.backend, opts.unobservable_tol);
    est.state = sol.x;
    const VecX inv = sv.cwiseInverse();
    pinv_ata = svd.matrixV() * inv.cwiseAbs2().asDiagonal() * svd.matrixV().transpose();
  }
  est.residual_norm = (a * est.state - b).norm();

  Mat6 mid = Mat6::Zero();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const DynamicObservation& ob = obs[i];
    const Vec3 x = ob.base.image_plane();
    const double s = opts.normalization == LosNormalization::UnitVector ? 1.0 / x.norm() : 1.0;
    const Mat3& t = ob.base.attitude.matrix();
    const double gamma = (t * (ob.effective_target() - stm.phi_r(ob.time) * est.state))(2);
    const Mat3 xs = skew(x);
    const Mat3 r_eps = -(s * s * gamma * gamma) * xs * image_plane_covariance(ob.base) * xs;
    const Eigen::Matrix<double, 3, 6> ai = a.middleRows<3>(3 * static_cast<Eigen::Index>(i));
    mid += ai.transpose() * r_eps * ai;
  }
  const Mat6 p = pinv_ata * mid * pinv_ata;
  est.covariance = 0.5 * (p + p.transpose());
  return est;
}

}  // namespace trilost
