#pragma once

// Planar geometry primitives: points, similarity transforms, closed contours
// and the polygon predicates the recognition code is built on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shapedl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline double angle_of(Vec2 a) { return std::atan2(a.y, a.x); }

/// Wraps an angle in radians to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Circular distance between two angles, in radians, within [0, pi].
inline double angular_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Similarity transform p -> s * R(theta) * p + (tx, ty).
struct Transform {
  double tx = 0.0;
  double ty = 0.0;
  double theta = 0.0;
  double s = 1.0;

  static Transform identity() { return {}; }

  Vec2 apply(Vec2 p) const {
    const double c = std::cos(theta), sn = std::sin(theta);
    return {s * (c * p.x - sn * p.y) + tx, s * (sn * p.x + c * p.y) + ty};
  }

  /// Applies only the linear part (rotation and scale).
  Vec2 apply_linear(Vec2 p) const {
    const double c = std::cos(theta), sn = std::sin(theta);
    return {s * (c * p.x - sn * p.y), s * (sn * p.x + c * p.y)};
  }

  Vec2 translation() const { return {tx, ty}; }

  Transform inverse() const {
    if (!(s > 0.0)) throw GeometryError("transform scale must be positive");
    Transform inv{0.0, 0.0, wrap_angle(-theta), 1.0 / s};
    const Vec2 t = inv.apply_linear({tx, ty});
    inv.tx = -t.x;
    inv.ty = -t.y;
    return inv;
  }

  void validate() const {
    if (!std::isfinite(tx) || !std::isfinite(ty) || !std::isfinite(theta) || !std::isfinite(s))
      throw GeometryError("transform has non-finite fields");
    if (!(s > 0.0)) throw GeometryError("transform scale must be positive");
  }
};

/// outer ∘ inner: apply inner first.
inline Transform compose(const Transform& outer, const Transform& inner) {
  Transform out;
  out.s = outer.s * inner.s;
  out.theta = wrap_angle(outer.theta + inner.theta);
  const Vec2 t = outer.apply(inner.translation());
  out.tx = t.x;
  out.ty = t.y;
  return out;
}

inline double signed_area(std::span<const Vec2> pts) {
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(pts[i], pts[(i + 1) % n]);
  return 0.5 * a;
}

inline double perimeter(std::span<const Vec2> pts) {
  double p = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) p += distance(pts[i], pts[(i + 1) % n]);
  return p;
}

namespace detail {

inline int orient(Vec2 a, Vec2 b, Vec2 c, double tol) {
  const double v = cross(b - a, c - a);
  if (v > tol) return 1;
  if (v < -tol) return -1;
  return 0;
}

/// Segments ab and cd cross at a single point interior to both.
inline bool proper_intersection(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double tol) {
  const int o1 = orient(a, b, c, tol), o2 = orient(a, b, d, tol);
  const int o3 = orient(c, d, a, tol), o4 = orient(c, d, b, tol);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

inline double bbox_diagonal(std::span<const Vec2> pts) {
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const Vec2& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return std::hypot(x1 - x0, y1 - y0);
}

}  // namespace detail

/// Closed, simple, counter-clockwise polyline. The last point connects to the first.
class Contour {
 public:
  Contour() = default;

  /// Validates and normalizes: drops repeated points, orients counter-clockwise,
  /// rotates the start to the lowest-y (then lowest-x) vertex.
  explicit Contour(std::vector<Vec2> points) : points_(std::move(points)) {
    for (const Vec2& p : points_)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw GeometryError("contour has non-finite coordinates");
    dedupe();
    if (points_.size() < 3)
      throw GeometryError("contour needs at least 3 distinct points, got " +
                          std::to_string(points_.size()));
    const double area = signed_area(points_);
    const double diag = detail::bbox_diagonal(points_);
    if (!(std::abs(area) > 1e-12 * diag * diag) || diag == 0.0)
      throw GeometryError("contour encloses zero area");
    if (area < 0.0) std::reverse(points_.begin(), points_.end());
    if (self_intersecting(points_)) throw GeometryError("contour is self-intersecting");
    const auto start = std::min_element(points_.begin(), points_.end(), [](Vec2 a, Vec2 b) {
      return a.y < b.y || (a.y == b.y && a.x < b.x);
    });
    std::rotate(points_.begin(), start, points_.end());
  }

  /// Wraps points known to be valid and counter-clockwise; keeps their order.
  static Contour trusted(std::vector<Vec2> points) {
    Contour c;
    c.points_ = std::move(points);
    return c;
  }

  std::span<const Vec2> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Vec2& operator[](std::size_t i) const { return points_[i]; }
  bool empty() const { return points_.empty(); }

  double area() const { return signed_area(points_); }

  static bool self_intersecting(std::span<const Vec2> pts) {
    const std::size_t n = pts.size();
    const double tol = 1e-12 * detail::bbox_diagonal(pts) * detail::bbox_diagonal(pts);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = pts[i], b = pts[(i + 1) % n];
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (detail::proper_intersection(a, b, pts[j], pts[(j + 1) % n], tol)) return true;
      }
    }
    return false;
  }

 private:
  void dedupe() {
    std::vector<Vec2> out;
    out.reserve(points_.size());
    for (const Vec2& p : points_)
      if (out.empty() || !(out.back() == p)) out.push_back(p);
    while (out.size() > 1 && out.front() == out.back()) out.pop_back();
    points_ = std::move(out);
  }

  std::vector<Vec2> points_;
};

inline Contour apply_transform(const Transform& t, const Contour& c) {
  std::vector<Vec2> out;
  out.reserve(c.size());
  for (const Vec2& p : c.points()) out.push_back(t.apply(p));
  // Rotation moves the lowest vertex; restore the canonical start.
  const auto start = std::min_element(out.begin(), out.end(), [](Vec2 a, Vec2 b) {
    return a.y < b.y || (a.y == b.y && a.x < b.x);
  });
  std::rotate(out.begin(), start, out.end());
  return Contour::trusted(std::move(out));
}

/// Area centroid (first-order polygon moments over area).
inline Vec2 centroid(std::span<const Vec2> pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw GeometryError("centroid of degenerate contour");
  // Shift to the first vertex to keep the moment sums well conditioned.
  const Vec2 o = pts[0];
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = pts[i] - o, q = pts[(i + 1) % n] - o;
    const double w = cross(p, q);
    a += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  if (std::abs(a) < 1e-300) throw GeometryError("centroid of zero-area contour");
  return {o.x + cx / (3.0 * a), o.y + cy / (3.0 * a)};
}

inline Vec2 centroid(const Contour& c) { return centroid(c.points()); }

/// Points equally spaced by arc length along the closed polyline, starting at pts[0].
inline std::vector<Vec2> resample_points(std::span<const Vec2> pts, std::size_t count) {
  const std::size_t n = pts.size();
  if (n < 2 || count == 0) throw GeometryError("cannot resample degenerate contour");
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + distance(pts[i], pts[(i + 1) % n]);
  const double total = cum[n];
  if (!(total > 0.0)) throw GeometryError("cannot resample zero-length contour");
  std::vector<Vec2> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(count);
    while (seg + 1 < n && cum[seg + 1] <= target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    const Vec2 a = pts[seg], b = pts[(seg + 1) % n];
    out.push_back(a + u * (b - a));
  }
  return out;
}

/// Uniform arc-length resampling; keeps the contour's start point.
inline Contour resample_uniform(const Contour& c, std::size_t nb) {
  if (nb < 8) throw GeometryError("resample_uniform needs at least 8 samples");
  if (c.size() < 3) throw GeometryError("cannot resample degenerate contour");
  return Contour::trusted(resample_points(c.points(), nb));
}

/// Mean distance from the centroid over the boundary, by arc length. Each
/// edge is integrated in closed form, so the start vertex does not matter.
inline double size(const Contour& c) {
  const Vec2 g = centroid(c);
  const auto pts = c.points();
  // Antiderivative of sqrt(x^2 + h^2).
  auto prim = [](double x, double h) {
    const double r = std::hypot(x, h);
    return 0.5 * (x * r + (h > 0.0 ? h * h * std::asinh(x / h) : 0.0));
  };
  double sum = 0.0, perimeter = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 a = pts[i] - g, b = pts[(i + 1) % pts.size()] - g;
    const double len = distance(a, b);
    if (len == 0.0) continue;
    const Vec2 u = (b - a) * (1.0 / len);
    const double t0 = dot(a, u);
    const double h = std::abs(cross(u, a));
    sum += prim(t0 + len, h) - prim(t0, h);
    perimeter += len;
  }
  return sum / perimeter;
}

enum class PointLocation { Outside, Boundary, Inside };

inline PointLocation locate_point(Vec2 p, std::span<const Vec2> poly, double tol) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[j], b = poly[i];
    if (detail::point_segment_distance(p, a, b) <= tol) return PointLocation::Boundary;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside ? PointLocation::Inside : PointLocation::Outside;
}

namespace detail {

/// A point strictly inside a simple polygon, found on a horizontal scanline.
inline Vec2 interior_point(std::span<const Vec2> poly) {
  double y0 = poly[0].y, y1 = poly[0].y;
  for (const Vec2& p : poly) {
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  // Try a few scanlines that avoid vertex heights.
  for (double frac : {0.5, 0.37, 0.61, 0.23, 0.77, 0.11, 0.89}) {
    const double y = y0 + frac * (y1 - y0);
    bool on_vertex = false;
    for (const Vec2& p : poly)
      if (std::abs(p.y - y) < 1e-12 * (y1 - y0)) on_vertex = true;
    if (on_vertex) continue;
    std::vector<double> xs;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly[i], b = poly[(i + 1) % n];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    double best = -1.0;
    Vec2 pick{};
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      if (xs[i + 1] - xs[i] > best) {
        best = xs[i + 1] - xs[i];
        pick = {0.5 * (xs[i] + xs[i + 1]), y};
      }
    }
    if (best > 0.0) return pick;
  }
  return centroid(poly);
}

/// True when some piece of a's boundary lies strictly inside b.
inline bool boundary_enters(std::span<const Vec2> a, std::span<const Vec2> b, double tol) {
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> cuts;
  for (std::size_t i = 0; i < na; ++i) {
    const Vec2 p = a[i], q = a[(i + 1) % na];
    const Vec2 pq = q - p;
    const double len2 = dot(pq, pq);
    if (len2 == 0.0) continue;
    cuts.assign({0.0, 1.0});
    for (std::size_t j = 0; j < nb; ++j) {
      const Vec2 c = b[j], d = b[(j + 1) % nb];
      const Vec2 cd = d - c;
      const double denom = cross(pq, cd);
      if (std::abs(denom) > 1e-14 * std::sqrt(len2 * dot(cd, cd))) {
        const double t = cross(c - p, cd) / denom;
        const double u = cross(c - p, pq) / denom;
        if (t > 0.0 && t < 1.0 && u >= -1e-12 && u <= 1.0 + 1e-12) cuts.push_back(t);
      } else {
        // Parallel: project b's endpoints so collinear overlaps get split.
        for (Vec2 e : {c, d}) {
          const double t = dot(e - p, pq) / len2;
          if (t > 0.0 && t < 1.0) cuts.push_back(t);
        }
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (cuts[k + 1] - cuts[k] < 1e-12) continue;
      const Vec2 mid = p + (0.5 * (cuts[k] + cuts[k + 1])) * pq;
      if (locate_point(mid, b, tol) == PointLocation::Inside) return true;
    }
  }
  return false;
}

inline bool bboxes_disjoint(std::span<const Vec2> a, std::span<const Vec2> b, double tol) {
  auto box = [](std::span<const Vec2> pts) {
    double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
    for (const Vec2& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    return std::array<double, 4>{x0, x1, y0, y1};
  };
  const auto ba = box(a), bb = box(b);
  return ba[1] < bb[0] - tol || bb[1] < ba[0] - tol || ba[3] < bb[2] - tol || bb[3] < ba[2] - tol;
}

inline double overlap_tolerance(std::span<const Vec2> a, std::span<const Vec2> b) {
  return 1e-9 * std::max(bbox_diagonal(a), bbox_diagonal(b));
}

}  // namespace detail

/// Positive-area intersection of the two enclosed interiors. Touching boundaries
/// do not count.
inline bool interiors_overlap(const Contour& a, const Contour& b) {
  const double tol = detail::overlap_tolerance(a.points(), b.points());
  if (detail::bboxes_disjoint(a.points(), b.points(), tol)) return false;
  if (detail::boundary_enters(a.points(), b.points(), tol)) return true;
  if (detail::boundary_enters(b.points(), a.points(), tol)) return true;
  return locate_point(detail::interior_point(a.points()), b.points(), tol) == PointLocation::Inside;
}

/// Region layouts allow nesting (a hole region inside an outer region's contour)
/// but not partially crossing or coincident contours.
inline bool regions_conflict(const Contour& a, const Contour& b) {
  const double tol = detail::overlap_tolerance(a.points(), b.points());
  if (detail::bboxes_disjoint(a.points(), b.points(), tol)) return false;
  const bool a_in_b = detail::boundary_enters(a.points(), b.points(), tol);
  const bool b_in_a = detail::boundary_enters(b.points(), a.points(), tol);
  if (a_in_b && b_in_a) return true;
  if (a_in_b || b_in_a) return false;
  return locate_point(detail::interior_point(a.points()), b.points(), tol) == PointLocation::Inside;
}

}  // namespace shapedl
