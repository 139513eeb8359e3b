#include "trilost/methods.hpp"

#include <array>

#include "trilost/optimal.hpp"

namespace trilost {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 7> kNames = {{
    {Method::Dlt, "dlt"},
    {Method::DltUnit, "dlt-unit"},
    {Method::Plucker, "plucker"},
    {Method::ExplicitRange, "explicit-range"},
    {Method::Hs, "hs"},
    {Method::Quat, "quat"},
    {Method::Lost, "lost"},
}};

void require_two(Method m, Observations obs) {
  if (obs.size() != 2) {
    fail(ErrorCode::WrongArity,
         std::string(method_name(m)) + " needs exactly two observations, got " +
             std::to_string(obs.size()));
  }
}

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& [k, v] : kNames) {
    if (k == m) return v;
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& [k, v] : kNames) {
    if (v == name) return k;
  }
  fail(ErrorCode::InvalidInput, "unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_method_list(std::string_view s) {
  std::vector<Method> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    out.push_back(parse_method(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) fail(ErrorCode::InvalidInput, "empty method list");
  return out;
}

bool two_view_only(Method m) { return m == Method::Hs || m == Method::Quat; }

TriangulationEstimate triangulate(Method m, Observations obs) {
  switch (m) {
    case Method::Dlt:
      return dlt_triangulate(obs, LosNormalization::ImagePlane);
    case Method::DltUnit:
      return dlt_triangulate(obs, LosNormalization::UnitVector);
    case Method::Plucker:
      return plucker_triangulate(obs);
    case Method::ExplicitRange:
      return explicit_range_triangulate(obs);
    case Method::Hs:
      require_two(m, obs);
      return hs_triangulate(obs[0], obs[1]);
    case Method::Quat:
      require_two(m, obs);
      return quat_triangulate(obs[0], obs[1]);
    case Method::Lost:
      return lost_triangulate(obs);
  }
  fail(ErrorCode::InvalidInput, "unknown method");
}

Mat3 analytic_covariance(Method m, Observations obs) {
  switch (m) {
    case Method::Dlt:
      return dlt_covariance(obs, LosNormalization::ImagePlane);
    case Method::DltUnit:
      return dlt_covariance(obs, LosNormalization::UnitVector);
    case Method::Plucker:
      return *plucker_triangulate(obs).covariance;
    case Method::ExplicitRange:
      return explicit_range_covariance_n2(obs);
    case Method::Hs:
    case Method::Quat:
      require_two(m, obs);
      return hs_covariance(obs[0], obs[1]);
    case Method::Lost:
      return lost_covariance(obs);
  }
  fail(ErrorCode::InvalidInput, "unknown method");
}

}  // namespace trilost
