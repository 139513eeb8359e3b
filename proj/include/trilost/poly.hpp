#pragma once

#include <complex>
#include <vector>

#include "trilost/geometry.hpp"

namespace trilost {

// Polynomials are stored with ascending powers: c(0) + c(1) t + ...

VecX poly_mul(const VecX& a, const VecX& b);
double poly_eval(const VecX& c, double t);
double poly_eval_derivative(const VecX& c, double t);

// All roots, from the eigenvalues of the balanced companion matrix. Leading
// coefficients below drop_tol * max|c| are discarded first, which removes
// roots pushed out to infinity.
std::vector<std::complex<double>> polynomial_roots(const VecX& c, double drop_tol = 1e-15);

// Roots with |Im| <= imag_tol (1 + |Re|), refined by a few guarded Newton
// steps on the original coefficients.
std::vector<double> real_roots(const VecX& c, double imag_tol = 1e-8);

}  // namespace trilost
