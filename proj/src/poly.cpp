#include "trilost/poly.hpp"

#include <Eigen/Eigenvalues>

namespace trilost {

VecX poly_mul(const VecX& a, const VecX& b) {
  VecX c = VecX::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) c(i + j) += a(i) * b(j);
  return c;
}

double poly_eval(const VecX& c, double t) {
  double v = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) v = v * t + c(i);
  return v;
}

double poly_eval_derivative(const VecX& c, double t) {
  double v = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 1; --i) v = v * t + static_cast<double>(i) * c(i);
  return v;
}

namespace {

// Parlett-Reinsch balancing with power-of-two scalings.
void balance(MatX& m) {
  const Eigen::Index n = m.rows();
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double cc = c, rr = r;
      while (cc < rr / 2.0) { cc *= 2.0; rr /= 2.0; f *= 2.0; }
      while (cc >= rr * 2.0) { cc /= 2.0; rr *= 2.0; f /= 2.0; }
      if ((cc + rr) < 0.95 * s) {
        converged = false;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
}

}  // namespace

std::vector<std::complex<double>> polynomial_roots(const VecX& c, double drop_tol) {
  std::vector<std::complex<double>> roots;
  if (c.size() == 0) return roots;
  const double cmax = c.cwiseAbs().maxCoeff();
  if (cmax == 0.0 || !std::isfinite(cmax)) return roots;

  Eigen::Index hi = c.size() - 1;
  while (hi > 0 && std::abs(c(hi)) <= drop_tol * cmax) --hi;
  Eigen::Index lo = 0;
  while (lo < hi && c(lo) == 0.0) {
    roots.emplace_back(0.0, 0.0);
    ++lo;
  }
  const Eigen::Index deg = hi - lo;
  if (deg <= 0) return roots;
  if (deg == 1) {
    roots.emplace_back(-c(lo) / c(hi), 0.0);
    return roots;
  }
  MatX comp = MatX::Zero(deg, deg);
  comp.diagonal(-1).setOnes();
  for (Eigen::Index i = 0; i < deg; ++i) comp(i, deg - 1) = -c(lo + i) / c(hi);
  balance(comp);
  Eigen::EigenSolver<MatX> es(comp, false);
  for (Eigen::Index i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()(i));
  return roots;
}

std::vector<double> real_roots(const VecX& c, double imag_tol) {
  std::vector<double> out;
  for (const auto& z : polynomial_roots(c)) {
    if (std::abs(z.imag()) > imag_tol * (1.0 + std::abs(z.real()))) continue;
    double t = z.real();
    double ft = std::abs(poly_eval(c, t));
    for (int it = 0; it < 3 && ft > 0.0; ++it) {
      const double dp = poly_eval_derivative(c, t);
      if (dp == 0.0) break;
      const double tn = t - poly_eval(c, t) / dp;
      const double fn = std::abs(poly_eval(c, tn));
      if (!(fn < ft)) break;
      t = tn;
      ft = fn;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace trilost
