#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "trilost/io.hpp"

namespace trilost {

namespace {

constexpr std::string_view kBundlerHeader = "# Bundle file v0.3";

// Whitespace tokenizer that refuses to read past the end and checks claimed
// record counts against the bytes left before anything is allocated.
class Tokens {
 public:
  explicit Tokens(std::string_view s) : s_(s) {}

  std::size_t remaining() const { return s_.size() - pos_; }

  std::string_view next(const char* what) {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ >= s_.size()) fail(ErrorCode::TruncatedFile, std::string("file ends before ") + what);
    const std::size_t b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return s_.substr(b, pos_ - b);
  }

  double real(const char* what) {
    const std::string_view t = next(what);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) {
      fail(ErrorCode::MalformedRecord, std::string("bad number '") + std::string(t.substr(0, 32)) +
                                           "' in " + what);
    }
    return v;
  }

  std::int64_t integer(const char* what, ErrorCode on_bad = ErrorCode::MalformedRecord) {
    const std::string_view t = next(what);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v < 0) {
      fail(on_bad, std::string("bad count or index '") + std::string(t.substr(0, 32)) + "' in " + what);
    }
    return v;
  }

  // Every number takes at least one character plus a separator.
  void require_room(std::int64_t records, std::int64_t numbers_each, const char* what) const {
    const double need = 2.0 * static_cast<double>(records) * static_cast<double>(numbers_each) - 1.0;
    if (need > static_cast<double>(remaining())) {
      fail(ErrorCode::TruncatedFile, std::string("file too short for the claimed ") + what);
    }
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

BundlerDataset parse_bundler_text(std::string_view text, bool strict) {
  const std::size_t eol = text.find('\n');
  std::string_view first = text.substr(0, eol);
  while (!first.empty() && std::isspace(static_cast<unsigned char>(first.back()))) first.remove_suffix(1);
  if (first != kBundlerHeader) {
    fail(ErrorCode::MalformedHeader, "expected '# Bundle file v0.3' on the first line");
  }
  Tokens tok(eol == std::string_view::npos ? std::string_view() : text.substr(eol + 1));
  const std::int64_t ncam = tok.integer("camera count", ErrorCode::MalformedHeader);
  const std::int64_t npt = tok.integer("point count", ErrorCode::MalformedHeader);
  tok.require_room(ncam, 15, "cameras");

  BundlerDataset ds;
  ds.cameras.reserve(static_cast<std::size_t>(ncam));
  bool distorted = false;
  for (std::int64_t c = 0; c < ncam; ++c) {
    BundlerCamera cam;
    cam.f = tok.real("camera");
    cam.k1 = tok.real("camera");
    cam.k2 = tok.real("camera");
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) cam.R(r, k) = tok.real("camera rotation");
    }
    for (int k = 0; k < 3; ++k) cam.t(k) = tok.real("camera translation");
    distorted = distorted || cam.k1 != 0.0 || cam.k2 != 0.0;
    ds.cameras.push_back(cam);
  }
  if (distorted) {
    if (strict) fail(ErrorCode::UnsupportedFeature, "radial distortion is not modeled");
    ds.warnings.push_back("nonzero radial distortion ignored; pinhole model assumed");
  }

  tok.require_room(npt, 8, "points");
  ds.points.reserve(static_cast<std::size_t>(npt));
  for (std::int64_t i = 0; i < npt; ++i) {
    BundlerPoint p;
    for (int k = 0; k < 3; ++k) p.position(k) = tok.real("point position");
    for (int k = 0; k < 3; ++k) {
      const std::int64_t c = tok.integer("point color");
      if (c > 255) fail(ErrorCode::MalformedRecord, "color component above 255");
      p.color[k] = static_cast<int>(c);
    }
    const std::int64_t nv = tok.integer("view count");
    if (nv == 0) fail(ErrorCode::MalformedRecord, "point " + std::to_string(i) + " has no views");
    tok.require_room(nv, 4, "views");
    p.views.reserve(static_cast<std::size_t>(nv));
    for (std::int64_t v = 0; v < nv; ++v) {
      BundlerView view;
      view.camera = tok.integer("view camera index");
      if (view.camera >= ncam) {
        fail(ErrorCode::IndexOutOfRange, "point " + std::to_string(i) + " references camera " +
                                             std::to_string(view.camera) + " of " +
                                             std::to_string(ncam));
      }
      view.key = tok.integer("view key index");
      view.x = tok.real("view x");
      view.y = tok.real("view y");
      p.views.push_back(view);
    }
    ds.points.push_back(std::move(p));
  }
  return ds;
}

BundlerDataset parse_bundler(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_bundler_text(buf.str(), strict);
}

void write_bundler(const BundlerDataset& ds, std::ostream& out) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << kBundlerHeader << '\n' << ds.cameras.size() << ' ' << ds.points.size() << '\n';
  for (const auto& c : ds.cameras) {
    out << c.f << ' ' << c.k1 << ' ' << c.k2 << '\n';
    for (int r = 0; r < 3; ++r) out << c.R(r, 0) << ' ' << c.R(r, 1) << ' ' << c.R(r, 2) << '\n';
    out << c.t(0) << ' ' << c.t(1) << ' ' << c.t(2) << '\n';
  }
  for (const auto& p : ds.points) {
    out << p.position(0) << ' ' << p.position(1) << ' ' << p.position(2) << '\n';
    out << p.color[0] << ' ' << p.color[1] << ' ' << p.color[2] << '\n';
    out << p.views.size();
    for (const auto& v : p.views) out << ' ' << v.camera << ' ' << v.key << ' ' << v.x << ' ' << v.y;
    out << '\n';
  }
}

LosObservation bundler_observation(const BundlerCamera& cam, const BundlerView& view,
                                   double sigma_px) {
  if (!(cam.f > 0.0)) fail(ErrorCode::InvalidInput, "camera has no focal length");
  LosObservation ob;
  const Mat3 flip = Vec3(1.0, -1.0, -1.0).asDiagonal();
  ob.attitude = Rotation::nearest(flip * cam.R);
  ob.anchor = -cam.R.transpose() * cam.t;
  ob.intrinsics.dx = ob.intrinsics.dy = cam.f;
  ob.pixel.uv = Vec2(view.x, -view.y);
  ob.pixel_cov = PixelCovariance::isotropic(sigma_px);
  return ob;
}

// ---- re-triangulation -----------------------------------------------------

namespace {

PointResult retriangulate_point(const BundlerDataset& ds, const BundlerPoint& pt,
                                const std::vector<Method>& methods,
                                const RetriangulateOptions& opts) {
  PointResult r;
  r.reference = pt.position;
  r.views = pt.views.size();
  r.estimates.assign(methods.size(), std::nullopt);
  r.residuals.assign(methods.size(), std::numeric_limits<double>::quiet_NaN());
  r.errors.assign(methods.size(), std::string());
  std::vector<LosObservation> obs;
  try {
    if (pt.views.size() < 2) fail(ErrorCode::TooFewObservations, "fewer than two views");
    obs.reserve(pt.views.size());
    for (const auto& v : pt.views) {
      obs.push_back(bundler_observation(ds.cameras[static_cast<std::size_t>(v.camera)], v, opts.sigma_px));
    }
  } catch (const Error& e) {
    for (auto& msg : r.errors) msg = std::string(error_name(e.code())) + ": " + e.what();
    return r;
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    try {
      if (methods[m] == Method::ExplicitRange && obs.size() > kExplicitRangeWarnViews &&
          !opts.allow_large_explicit_range) {
        fail(ErrorCode::PolicyRefused, "explicit range refused above " +
                                           std::to_string(kExplicitRangeWarnViews) + " views");
      }
      const Vec3 x = triangulate(methods[m], obs).position;
      if (!x.allFinite()) fail(ErrorCode::RankDeficient, "non-finite estimate");
      r.estimates[m] = x;
      r.residuals[m] = (x - pt.position).norm();
    } catch (const Error& e) {
      r.errors[m] = std::string(error_name(e.code())) + ": " + e.what();
    }
  }
  return r;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

ReconstructionReport retriangulate(const BundlerDataset& ds, const std::vector<Method>& methods,
                                   const RetriangulateOptions& opts) {
  if (methods.empty()) fail(ErrorCode::InvalidInput, "no methods requested");
  for (Method m : methods) {
    if (two_view_only(m)) {
      fail(ErrorCode::InvalidInput, std::string(method_name(m)) + " is two-view only");
    }
  }
  if (!(opts.sigma_px > 0.0)) fail(ErrorCode::InvalidInput, "sigma_px must be positive");
  ReconstructionReport rep;
  rep.methods = methods;
  rep.sigma_px = opts.sigma_px;
  rep.warnings = ds.warnings;
  rep.points.resize(ds.points.size());

  const std::size_t n = ds.points.size();
  const std::size_t chunk = 512;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
        rep.points[i] = retriangulate_point(ds, ds.points[i], methods, opts);
      }
    }
  };
  const int workers = opts.workers > 0 ? opts.workers : default_worker_count();
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(chunks, 1));
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // Shared log-spaced edges so the methods can be compared bin by bin.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& p : rep.points) {
    for (double r : p.residuals) {
      if (std::isnan(r)) continue;
      if (r > 0.0) lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (!std::isfinite(lo)) lo = hi > 0.0 ? hi : 1.0;
  if (!(hi > lo)) hi = 10.0 * lo;
  const int bins = std::max(1, opts.histogram_bins);
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    edges[static_cast<std::size_t>(b)] = std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * b / bins);
  }
  edges.front() = lo;
  edges.back() = hi;

  for (std::size_t m = 0; m < methods.size(); ++m) {
    Histogram h;
    h.method = methods[m];
    h.edges = edges;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    std::vector<double> ok;
    for (const auto& p : rep.points) {
      const double r = p.residuals[m];
      if (std::isnan(r)) {
        ++h.failures;
        continue;
      }
      ok.push_back(r);
      const auto it = std::upper_bound(edges.begin(), edges.end(), r);
      auto b = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
      b = std::clamp<std::ptrdiff_t>(b, 0, bins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
    }
    h.median = median_of(std::move(ok));
    rep.histograms.push_back(std::move(h));
  }
  return rep;
}

Json reconstruction_summary_json(const ReconstructionReport& rep) {
  Json j;
  j["schema"] = 1;
  j["points"] = rep.points.size();
  j["sigma_px"] = rep.sigma_px;
  j["warnings"] = rep.warnings;
  j["methods"] = Json::array();
  for (const auto& h : rep.histograms) {
    std::int64_t total = 0;
    for (auto c : h.counts) total += c;
    j["methods"].push_back({{"method", std::string(method_name(h.method))},
                            {"solved", total},
                            {"failures", h.failures},
                            {"median_residual", std::isnan(h.median) ? Json(nullptr) : Json(h.median)},
                            {"bin_edges", h.edges},
                            {"counts", h.counts}});
  }
  return j;
}

std::string histogram_csv(const ReconstructionReport& rep) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "method,bin_lo,bin_hi,count\n";
  for (const auto& h : rep.histograms) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << method_name(h.method) << ',' << h.edges[b] << ',' << h.edges[b + 1] << ','
          << h.counts[b] << '\n';
    }
  }
  return out.str();
}

}  // namespace trilost
