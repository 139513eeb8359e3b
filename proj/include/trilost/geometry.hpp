#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "trilost/error.hpp"

namespace trilost {

template <typename Scalar> using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat2T = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Vec2T<double>;
using Vec3 = Vec3T<double>;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Mat2T<double>;
using Mat3 = Mat3T<double>;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Cross-product matrix: skew(v) * w == v.cross(w).
template <typename Derived>
Mat3T<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using S = typename Derived::Scalar;
  Mat3T<S> m;
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
       -v(1), v(0), S(0);
  return m;
}

// S = [I2 | 0], picks the first two rows of a 3-vector.
template <typename Scalar = double>
Eigen::Matrix<Scalar, 2, 3> selector() {
  Eigen::Matrix<Scalar, 2, 3> s = Eigen::Matrix<Scalar, 2, 3>::Zero();
  s(0, 0) = Scalar(1);
  s(1, 1) = Scalar(1);
  return s;
}

// Proper rotation matrix. Construction validates orthonormality so the
// solvers can rely on T^-1 == T^T.
template <typename Scalar>
class RotationT {
 public:
  using Matrix = Mat3T<Scalar>;

  RotationT() : m_(Matrix::Identity()) {}

  static RotationT identity() { return RotationT(); }

  static RotationT from_matrix(const Matrix& m, Scalar tol = Scalar(1e-12)) {
    if (!m.allFinite() ||
        ((m.transpose() * m - Matrix::Identity()).cwiseAbs().maxCoeff() > tol) ||
        m.determinant() <= Scalar(0)) {
      fail(ErrorCode::NotOrthonormal, "attitude matrix is not a proper rotation");
    }
    RotationT r;
    r.m_ = m;
    return r;
  }

  // Closest rotation in the Frobenius sense, for matrices stored with few
  // digits. Rejects inputs further than max_dev from orthonormal.
  static RotationT nearest(const Matrix& m, Scalar max_dev = Scalar(1e-3)) {
    if (!m.allFinite()) fail(ErrorCode::NotOrthonormal, "non-finite attitude");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix d = Matrix::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < Scalar(0))
      d(2, 2) = Scalar(-1);
    Matrix r = svd.matrixU() * d * svd.matrixV().transpose();
    if ((r - m).cwiseAbs().maxCoeff() > max_dev)
      fail(ErrorCode::NotOrthonormal, "attitude matrix too far from a rotation");
    RotationT out;
    out.m_ = r;
    return out;
  }

  // Hamilton quaternion given scalar-last (x, y, z, w).
  static RotationT from_quaternion(Scalar x, Scalar y, Scalar z, Scalar w,
                                   Scalar unit_tol = Scalar(1e-9)) {
    Eigen::Quaternion<Scalar> q(w, x, y, z);
    if (!std::isfinite(q.norm()) || std::abs(q.norm() - Scalar(1)) > unit_tol)
      fail(ErrorCode::NotUnit, "attitude quaternion is not unit norm");
    q.normalize();
    RotationT r;
    r.m_ = q.toRotationMatrix();
    return r;
  }

  static RotationT from_angle_axis(Scalar angle, const Vec3T<Scalar>& axis) {
    RotationT r;
    r.m_ = Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
    return r;
  }

  const Matrix& matrix() const { return m_; }
  RotationT transpose() const {
    RotationT r;
    r.m_ = m_.transpose();
    return r;
  }
  RotationT operator*(const RotationT& o) const {
    RotationT r;
    r.m_ = m_ * o.m_;
    return r;
  }
  Vec3T<Scalar> operator*(const Vec3T<Scalar>& v) const { return m_ * v; }

  // Scalar-last Hamilton quaternion (x, y, z, w).
  Eigen::Matrix<Scalar, 4, 1> quaternion_xyzw() const {
    Eigen::Quaternion<Scalar> q(m_);
    q.normalize();
    return {q.x(), q.y(), q.z(), q.w()};
  }

 private:
  Matrix m_;
};

using Rotation = RotationT<double>;

// Rotation whose third row (camera boresight, expressed in the world frame)
// is the unit vector along `boresight`. `up_hint` fixes the roll.
Rotation look_at(const Vec3& boresight, const Vec3& up_hint = Vec3::UnitZ());

enum class LeastSquaresBackend { NormalEquations, QR, TotalLeastSquares };

std::string backend_name(LeastSquaresBackend b);
LeastSquaresBackend parse_backend(const std::string& name);

struct StackedSolution {
  VecX x;
  VecX singular_values;  // of A, descending
  double condition_number = 0.0;
  double residual_norm = 0.0;
};

constexpr double kDefaultRankTolerance = 1e-10;
constexpr double kDefaultNullGapTolerance = 1e-10;

// Least squares A x = b. Fails with RankDeficient when
// sigma_min(A) < rank_tol * sigma_max(A).
StackedSolution solve_stacked(const MatX& A, const VecX& b,
                              LeastSquaresBackend backend = LeastSquaresBackend::QR,
                              double rank_tol = kDefaultRankTolerance);

struct NullDirection {
  Vec4 v;               // unit norm, v(3) >= 0
  Vec4 singular_values; // descending
};

// Right singular vector of the smallest singular value of an m x 4 matrix.
// Fails with AmbiguousNullSpace when the two smallest singular values are
// within gap_tol * sigma_max of each other.
NullDirection null_direction(const Eigen::Matrix<double, Eigen::Dynamic, 4>& A,
                             double gap_tol = kDefaultNullGapTolerance);

// Singular values of A (descending), computed through the R factor of a QR
// decomposition so tall stacks stay cheap.
VecX stacked_singular_values(const MatX& A);

}  // namespace trilost
