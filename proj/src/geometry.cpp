#include "trilost/geometry.hpp"

#include <Eigen/QR>

namespace trilost {

Rotation look_at(const Vec3& boresight, const Vec3& up_hint) {
  const Vec3 z = boresight.normalized();
  Vec3 up = up_hint.normalized();
  if (z.cross(up).norm() < 1e-6) {
    up = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  }
  const Vec3 x = up.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 t;
  t.row(0) = x.transpose();
  t.row(1) = y.transpose();
  t.row(2) = z.transpose();
  return Rotation::from_matrix(t, 1e-10);
}

std::string backend_name(LeastSquaresBackend b) {
  switch (b) {
    case LeastSquaresBackend::NormalEquations: return "normal";
    case LeastSquaresBackend::QR: return "qr";
    case LeastSquaresBackend::TotalLeastSquares: return "tls";
  }
  return "qr";
}

LeastSquaresBackend parse_backend(const std::string& name) {
  if (name == "normal") return LeastSquaresBackend::NormalEquations;
  if (name == "qr") return LeastSquaresBackend::QR;
  if (name == "tls") return LeastSquaresBackend::TotalLeastSquares;
  fail(ErrorCode::InvalidInput, "unknown least-squares backend '" + name + "'");
}

VecX stacked_singular_values(const MatX& A) {
  if (A.rows() <= A.cols()) {
    return Eigen::JacobiSVD<MatX>(A).singularValues();
  }
  Eigen::HouseholderQR<MatX> qr(A);
  const MatX r = qr.matrixQR().topRows(A.cols()).triangularView<Eigen::Upper>();
  return Eigen::JacobiSVD<MatX>(r).singularValues();
}

StackedSolution solve_stacked(const MatX& A, const VecX& b,
                              LeastSquaresBackend backend, double rank_tol) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size() || n == 0) {
    fail(ErrorCode::InvalidInput, "stacked system has inconsistent shape");
  }
  if (A.rows() < n) fail(ErrorCode::RankDeficient, "fewer rows than unknowns");
  if (!A.allFinite() || !b.allFinite()) {
    fail(ErrorCode::InvalidInput, "stacked system has non-finite entries");
  }

  StackedSolution out;
  Eigen::HouseholderQR<MatX> qr(A);
  const MatX r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  out.singular_values = Eigen::JacobiSVD<MatX>(r).singularValues();
  const double smax = out.singular_values(0);
  const double smin = out.singular_values(n - 1);
  out.condition_number = smin > 0.0 ? smax / smin : INFINITY;
  if (!(smax > 0.0) || smin < rank_tol * smax) {
    fail(ErrorCode::RankDeficient, "stacked system is rank deficient");
  }

  switch (backend) {
    case LeastSquaresBackend::NormalEquations: {
      const MatX ata = A.transpose() * A;
      out.x = ata.ldlt().solve(A.transpose() * b);
      break;
    }
    case LeastSquaresBackend::QR:
      out.x = qr.solve(b);
      break;
    case LeastSquaresBackend::TotalLeastSquares: {
      MatX ab(A.rows(), n + 1);
      ab << A, b;
      Eigen::JacobiSVD<MatX> svd(ab, Eigen::ComputeThinV);
      const VecX v = svd.matrixV().col(n);
      if (std::abs(v(n)) < 1e-14) {
        fail(ErrorCode::RankDeficient, "total least squares solution at infinity");
      }
      out.x = -v.head(n) / v(n);
      break;
    }
  }
  out.residual_norm = (A * out.x - b).norm();
  return out;
}

NullDirection null_direction(const Eigen::Matrix<double, Eigen::Dynamic, 4>& A,
                             double gap_tol) {
  if (A.rows() < 3) fail(ErrorCode::TooFewObservations, "need at least 3 rows");
  if (!A.allFinite()) fail(ErrorCode::InvalidInput, "non-finite matrix");
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 4>> svd(A, Eigen::ComputeFullV);
  NullDirection out;
  const VecX s = svd.singularValues();
  out.singular_values.setZero();
  out.singular_values.head(s.size()) = s;
  const double smax = out.singular_values(0);
  if (out.singular_values(2) - out.singular_values(3) <= gap_tol * smax) {
    fail(ErrorCode::AmbiguousNullSpace, "null space is not one-dimensional");
  }
  out.v = svd.matrixV().col(3).normalized();
  if (out.v(3) < 0.0) out.v = -out.v;
  return out;
}

}  // namespace trilost
