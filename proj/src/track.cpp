#include "gpmpc/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "gpmpc/csv.hpp"
#include "gpmpc/errors.hpp"

namespace gpmpc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace

void CurvatureProfile::validate() const {
  if (breakpoints.size() < 2 || breakpoints.size() != kappas.size()) {
    throw TrackError("curvature table needs matching breakpoints and kappas");
  }
  if (breakpoints(0) != 0.0) {
    throw TrackError("first breakpoint must be 0");
  }
  for (Eigen::Index i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints(i) > breakpoints(i - 1))) {
      throw TrackError("breakpoints must be strictly increasing");
    }
  }
  if (closed && kappas(0) != kappas(kappas.size() - 1)) {
    throw TrackError("closed profile must have matching seam curvature");
  }
}

double curvature_at(const CurvatureProfile& profile, double s) {
  if (!std::isfinite(s)) {
    throw std::domain_error("curvature_at: non-finite arc length");
  }
  const double length = profile.total_length();
  if (profile.closed) {
    s = std::fmod(s, length);
    if (s < 0.0) s += length;
  } else {
    if (s <= 0.0) return profile.kappas(0);
    if (s >= length) return profile.kappas(profile.kappas.size() - 1);
  }
  const double* begin = profile.breakpoints.data();
  const double* end = begin + profile.breakpoints.size();
  const Eigen::Index hi = std::min<Eigen::Index>(
      std::upper_bound(begin, end, s) - begin, profile.breakpoints.size() - 1);
  const Eigen::Index lo = hi - 1;
  const double t = (s - profile.breakpoints(lo)) /
                   (profile.breakpoints(hi) - profile.breakpoints(lo));
  return profile.kappas(lo) + t * (profile.kappas(hi) - profile.kappas(lo));
}

double wrap_s(const CurvatureProfile& profile, double s) {
  if (!profile.closed) {
    throw std::invalid_argument("wrap_s requires a closed profile");
  }
  const double length = profile.total_length();
  double r = std::fmod(s, length);
  if (r < 0.0) r += length;
  return r;
}

namespace {

// One RK4 step of the centerline ODE (px' = cos th, py' = sin th, th' = kappa)
// from arc length s over step h.
Eigen::Vector3d centerline_rk4(const CurvatureProfile& profile, double s,
                               const Eigen::Vector3d& y, double h) {
  const auto f = [&](double si, const Eigen::Vector3d& yi) {
    return Eigen::Vector3d(std::cos(yi(2)), std::sin(yi(2)),
                           curvature_at(profile, si));
  };
  const Eigen::Vector3d k1 = f(s, y);
  const Eigen::Vector3d k2 = f(s + 0.5 * h, y + 0.5 * h * k1);
  const Eigen::Vector3d k3 = f(s + 0.5 * h, y + 0.5 * h * k2);
  const Eigen::Vector3d k4 = f(s + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Centerline Centerline::build(const CurvatureProfile& profile, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("centerline step must be > 0");
  profile.validate();

  Centerline c;
  c.profile_ = profile;
  const double length = profile.total_length();
  const auto m = static_cast<Eigen::Index>(std::ceil(length / ds));
  c.h_ = length / static_cast<double>(m);
  c.s_.resize(m + 1);
  c.px_.resize(m + 1);
  c.py_.resize(m + 1);
  c.theta_.resize(m + 1);

  Eigen::Vector3d y(0.0, 0.0, 0.0);
  c.s_(0) = 0.0;
  c.px_(0) = y(0);
  c.py_(0) = y(1);
  c.theta_(0) = y(2);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double si = c.h_ * static_cast<double>(i);
    y = centerline_rk4(profile, si, y, c.h_);
    c.s_(i + 1) = c.h_ * static_cast<double>(i + 1);
    c.px_(i + 1) = y(0);
    c.py_(i + 1) = y(1);
    c.theta_(i + 1) = y(2);
  }

  if (profile.closed) {
    const double gap = std::hypot(c.px_(m) - c.px_(0), c.py_(m) - c.py_(0));
    if (gap > 1e-3 * length) {
      throw TrackError("closed track centerline does not close: gap " +
                       std::to_string(gap));
    }
  }
  return c;
}

Eigen::Vector3d Centerline::pose(double s) const {
  const double length = profile_.total_length();
  if (profile_.closed) {
    s = std::fmod(s, length);
    if (s < 0.0) s += length;
  } else {
    s = std::clamp(s, 0.0, length);
  }
  auto i = static_cast<Eigen::Index>(std::floor(s / h_));
  i = std::clamp<Eigen::Index>(i, 0, s_.size() - 2);
  const Eigen::Vector3d y(px_(i), py_(i), theta_(i));
  const double rem = s - s_(i);
  if (rem == 0.0) return y;
  return centerline_rk4(profile_, s_(i), y, rem);
}

Eigen::Vector2d Centerline::position(double s) const {
  return pose(s).head<2>();
}

double Centerline::heading(double s) const { return pose(s)(2); }

double Centerline::refine(double s0, const Eigen::Vector2d& point) const {
  double s = s0;
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector3d y = pose(s);
    const Eigen::Vector2d d = point - y.head<2>();
    const Eigen::Vector2d tangent(std::cos(y(2)), std::sin(y(2)));
    const Eigen::Vector2d normal(-std::sin(y(2)), std::cos(y(2)));
    const double g = tangent.dot(d);
    const double n = normal.dot(d);
    const double denom = 1.0 - n * curvature_at(profile_, s);
    if (std::abs(denom) < 1e-9) break;
    const double step = g / denom;
    s += step;
    if (std::abs(step) < 1e-13) break;
  }
  return s;
}

Projection Centerline::project(const Eigen::Vector2d& point,
                               std::optional<double> hint) const {
  const double length = profile_.total_length();
  std::vector<double> candidates;

  if (hint.has_value()) {
    double s = refine(*hint, point);
    // Accept only if the refinement stayed local and is a genuine foot point.
    if (std::abs(s - *hint) < 0.25 * length || profile_.closed) {
      const Eigen::Vector3d y = pose(s);
      const Eigen::Vector2d d = point - y.head<2>();
      const double g = std::cos(y(2)) * d(0) + std::sin(y(2)) * d(1);
      if (std::abs(g) < 1e-9) candidates.push_back(s);
    }
  }

  if (candidates.empty()) {
    const Eigen::Index m = s_.size();
    Eigen::VectorXd dist2 =
        (px_.array() - point(0)).square() + (py_.array() - point(1)).square();
    // Newton-refine every local minimum of the sampled distance.
    const Eigen::Index last = profile_.closed ? m - 1 : m;
    for (Eigen::Index i = 0; i < last; ++i) {
      double prev, next;
      if (profile_.closed) {
        prev = dist2((i + last - 1) % last);
        next = dist2((i + 1) % last);
      } else {
        prev = (i == 0) ? dist2(i) + 1.0 : dist2(i - 1);
        next = (i == m - 1) ? dist2(i) + 1.0 : dist2(i + 1);
      }
      if (dist2(i) <= prev && dist2(i) <= next) {
        candidates.push_back(refine(s_(i), point));
      }
    }
  }

  if (candidates.empty()) {
    throw ProjectionError("no candidate foot point found");
  }

  bool found = false;
  Projection best;
  for (double s : candidates) {
    if (profile_.closed) {
      s = std::fmod(s, length);
      if (s < 0.0) s += length;
    } else {
      s = std::clamp(s, 0.0, length);
    }
    const Eigen::Vector3d y = pose(s);
    const Eigen::Vector2d d = point - y.head<2>();
    const double n = -std::sin(y(2)) * d(0) + std::cos(y(2)) * d(1);
    const double dist = d.norm();
    const bool better =
        !found || dist < best.distance - tie_tol ||
        (std::abs(dist - best.distance) <= tie_tol && s < best.s);
    if (better) {
      best = Projection{s, n, dist};
      found = true;
    }
  }

  const double kappa = curvature_at(profile_, best.s);
  if (std::abs(best.n * kappa) >= 1.0 - 1e-9) {
    throw ProjectionError("point at or beyond the local center of curvature");
  }
  return best;
}

CurvilinearState Centerline::to_curvilinear(const CartesianState& x,
                                            std::optional<double> hint) const {
  const Projection p = project({x.px, x.py}, hint);
  CurvilinearState out;
  out.s = p.s;
  out.n = p.n;
  out.alpha = wrap_angle(x.psi - heading(p.s));
  out.v = x.v;
  return out;
}

CartesianState Centerline::to_cartesian(const CurvilinearState& x) const {
  const Eigen::Vector3d y = pose(x.s);
  CartesianState out;
  out.px = y(0) - x.n * std::sin(y(2));
  out.py = y(1) + x.n * std::cos(y(2));
  out.psi = y(2) + x.alpha;
  out.v = x.v;
  return out;
}

CurvatureProfile benchmark_track() {
  // Half-lap segment list (length, curvature at start, curvature at end):
  // stadium bends of |kappa| = 1.2 around an S-curve, then a wide arc of
  // kappa = 1.0 sized so the half integrates a heading change of exactly pi.
  struct Segment {
    double len, k0, k1;
  };
  const std::vector<Segment> half = {
      {0.60, 0.0, 0.0},   {0.30, 0.0, 1.2},   {0.40, 1.2, 1.2},
      {0.60, 1.2, -1.2},  {0.40, -1.2, -1.2}, {0.30, -1.2, 0.0},
      {0.50, 0.0, 0.0},   {0.30, 0.0, 1.0},   {kPi - 0.3, 1.0, 1.0},
      {0.30, 1.0, 0.0},
  };

  std::vector<double> bp{0.0};
  std::vector<double> kv{half.front().k0};
  for (int rep = 0; rep < 2; ++rep) {
    for (const Segment& seg : half) {
      bp.push_back(bp.back() + seg.len);
      kv.push_back(seg.k1);
    }
  }

  CurvatureProfile profile;
  profile.breakpoints = Eigen::Map<Eigen::VectorXd>(bp.data(), bp.size());
  profile.kappas = Eigen::Map<Eigen::VectorXd>(kv.data(), kv.size());
  profile.closed = true;
  profile.validate();
  return profile;
}

CurvatureProfile straight_track(double length) {
  CurvatureProfile profile;
  profile.breakpoints = Eigen::Vector2d(0.0, length);
  profile.kappas = Eigen::Vector2d(0.0, 0.0);
  profile.closed = false;
  return profile;
}

CurvatureProfile circle_track(double radius) {
  CurvatureProfile profile;
  profile.breakpoints = Eigen::Vector2d(0.0, 2.0 * kPi * radius);
  profile.kappas = Eigen::Vector2d(1.0 / radius, 1.0 / radius);
  profile.closed = true;
  return profile;
}

CurvatureProfile load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrackError("cannot open track file: " + path);
  nlohmann::json doc;
  in >> doc;
  const auto bp = doc.at("breakpoints").get<std::vector<double>>();
  const auto kv = doc.at("kappas").get<std::vector<double>>();
  CurvatureProfile profile;
  profile.breakpoints =
      Eigen::Map<const Eigen::VectorXd>(bp.data(), static_cast<Eigen::Index>(bp.size()));
  profile.kappas =
      Eigen::Map<const Eigen::VectorXd>(kv.data(), static_cast<Eigen::Index>(kv.size()));
  profile.closed = doc.at("closed").get<bool>();
  profile.validate();
  return profile;
}

void save_track(const CurvatureProfile& profile, const std::string& path) {
  nlohmann::json doc;
  doc["breakpoints"] =
      std::vector<double>(profile.breakpoints.data(),
                          profile.breakpoints.data() + profile.breakpoints.size());
  doc["kappas"] = std::vector<double>(
      profile.kappas.data(), profile.kappas.data() + profile.kappas.size());
  doc["closed"] = profile.closed;
  std::ofstream out(path);
  if (!out) throw TrackError("cannot write track file: " + path);
  out << doc.dump(2) << '\n';
}

void export_centerline_csv(const Centerline& centerline, double ds,
                           const std::string& path) {
  CsvWriter csv(path, {"s", "p_x", "p_y", "theta", "kappa"});
  const double length = centerline.total_length();
  const auto m = static_cast<Eigen::Index>(std::ceil(length / ds));
  const double h = length / static_cast<double>(m);
  for (Eigen::Index i = 0; i <= m; ++i) {
    const double s = h * static_cast<double>(i);
    const Eigen::Vector2d p = centerline.position(s);
    csv.row({CsvWriter::cell(s), CsvWriter::cell(p(0)), CsvWriter::cell(p(1)),
             CsvWriter::cell(centerline.heading(s)),
             CsvWriter::cell(curvature_at(centerline.profile(), s))});
  }
}

}  // namespace gpmpc
