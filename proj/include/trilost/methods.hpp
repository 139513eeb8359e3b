#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "trilost/linear.hpp"

namespace trilost {

enum class Method {
  Dlt,            // image-plane lines of sight
  DltUnit,        // unit-vector lines of sight
  Plucker,
  ExplicitRange,
  Hs,
  Quat,
  Lost,
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);  // InvalidInput
std::vector<Method> parse_method_list(std::string_view comma_separated);

// Two-view-only methods refuse other view counts with WrongArity.
bool two_view_only(Method m);

TriangulationEstimate triangulate(Method m, Observations obs);

// First-order covariance at the given (usually noise-free) observations.
// Explicit range has one only for two views; HS and QUAT share the two-view
// information bound.
Mat3 analytic_covariance(Method m, Observations obs);

}  // namespace trilost
