#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdlab/random.hpp"

namespace cdlab {

/// Absolute tolerance for closed-set membership tests.
inline constexpr double kMembershipTol = 1e-12;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed axis-aligned box; degenerate boxes represent segments and points.
struct Box {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;

  bool empty() const { return x0 > x1 || y0 > y1; }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return empty() ? 0.0 : width() * height(); }
  Point center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }

  bool contains(Point p, double tol = kMembershipTol) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol &&
           p.y <= y1 + tol;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline Box intersect(const Box& a, const Box& b) {
  return {std::max(a.x0, b.x0), std::min(a.x1, b.x1), std::max(a.y0, b.y0),
          std::min(a.y1, b.y1)};
}

inline double linf_dist(Point p, Point q) {
  return std::max(std::abs(p.x - q.x), std::abs(p.y - q.y));
}

/// The l-infinity midpoint set of p and q.
///
/// z is a midpoint iff it lies in both closed balls of radius |p-q|/2 around
/// p and q (the triangle inequality then forces equality), so the set is the
/// intersection of two axis-aligned squares.
inline Box mid_region(Point p, Point q) {
  const double r = 0.5 * linf_dist(p, q);
  // Along the dominant axis the interval is a single point; rounding can
  // invert its ends, so collapse it to the exact midpoint.
  auto side = [r](double a, double b) -> std::pair<double, double> {
    const double lo = std::max(a, b) - r;
    const double hi = std::min(a, b) + r;
    if (lo >= hi) return {0.5 * (a + b), 0.5 * (a + b)};
    return {lo, hi};
  };
  const auto [x0, x1] = side(p.x, q.x);
  const auto [y0, y1] = side(p.y, q.y);
  return {x0, x1, y0, y1};
}

/// A region bounded by two graphs over an x-interval:
/// {(x, y) : x_min <= x <= x_max, lower(x) <= y <= upper(x)}.
template <typename R>
concept XSimpleRegion = requires(const R& r, double x) {
  { r.x_min() } -> std::convertible_to<double>;
  { r.x_max() } -> std::convertible_to<double>;
  { r.lower(x) } -> std::convertible_to<double>;
  { r.upper(x) } -> std::convertible_to<double>;
};

template <XSimpleRegion R>
bool region_contains(const R& region, Point p, double tol = kMembershipTol) {
  if (p.x < region.x_min() - tol || p.x > region.x_max() + tol) return false;
  const double x = std::clamp(p.x, region.x_min(), region.x_max());
  return p.y >= region.lower(x) - tol && p.y <= region.upper(x) + tol;
}

struct RectRegion {
  Box box;

  double x_min() const { return box.x0; }
  double x_max() const { return box.x1; }
  double lower(double) const { return box.y0; }
  double upper(double) const { return box.y1; }
};

/// Intersection of an x-simple region with an axis-aligned box.
template <XSimpleRegion R>
struct ClippedRegion {
  const R* base;
  Box clip;

  double x_min() const { return std::max(base->x_min(), clip.x0); }
  double x_max() const { return std::min(base->x_max(), clip.x1); }
  double lower(double x) const { return std::max(base->lower(x), clip.y0); }
  double upper(double x) const { return std::min(base->upper(x), clip.y1); }
};

/// The local domain: vertical sides at a and b, a unit-circle arc
/// y = S(x) = yc + sqrt(1 - (x - xc)^2) as floor, and a 45-degree roof that
/// rises from height d at both sides to d + (b - a)/2 at the center.
/// c is the floor of the bounding box and must sit at or below the arc.
struct CornerDomain {
  double a = -0.005;
  double b = 0.005;
  double c = -0.002;
  double d = 0.005;
  double xc = 0.0;
  double yc = -1.0;

  static CornerDomain demo() { return {}; }

  double top() const { return d + 0.5 * (b - a); }
  Box bounding_box() const { return {a, b, c, top()}; }

  /// S(x). Throws std::domain_error outside [a, b] or off the unit arc.
  double lower_boundary(double x) const {
    if (!(x >= a - kMembershipTol && x <= b + kMembershipTol)) {
      throw std::domain_error("lower_boundary: x = " + std::to_string(x) +
                              " outside [a, b]");
    }
    const double dx = x - xc;
    const double rad = 1.0 - dx * dx;
    if (rad < 0.0) {
      throw std::domain_error("lower_boundary: x beyond the unit arc");
    }
    // yc + sqrt(1 - dx^2) without the cancellation near the top of the arc.
    return (yc + 1.0) - dx * dx / (1.0 + std::sqrt(rad));
  }

  double roof(double x) const {
    return top() - std::abs(x - 0.5 * (a + b));
  }

  double x_min() const { return a; }
  double x_max() const { return b; }
  double lower(double x) const {
    return std::max(lower_boundary(std::clamp(x, a, b)), c);
  }
  double upper(double x) const { return roof(x); }

  bool contains(Point p, double tol = kMembershipTol) const {
    if (p.x < a - tol || p.x > b + tol) return false;
    const double x = std::clamp(p.x, a, b);
    const double dx = x - xc;
    if (1.0 - dx * dx < 0.0) return false;
    return p.y >= lower(x) - tol && p.y <= upper(x) + tol;
  }
};

/// One row of a validation report: the constraint name, a witness point and
/// the signed margin at that witness (negative means violated).
struct ConstraintViolation {
  std::string constraint;
  double witness_x = 0.0;
  double witness_y = 0.0;
  double margin = 0.0;
};

struct ValidationReport {
  std::vector<ConstraintViolation> violations;
  /// Smallest sphere-center margin seen over all samples.
  double sphere_center_margin = std::numeric_limits<double>::infinity();

  bool valid() const { return violations.empty(); }
  bool has(const std::string& name) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const auto& v) { return v.constraint == name; });
  }
};

namespace detail {

/// Keeps the worst witness per constraint.
class ViolationCollector {
 public:
  void record(const std::string& name, double x, double y, double margin,
              double tol = 0.0) {
    if (margin >= -tol) return;
    for (auto& v : rows_) {
      if (v.constraint == name) {
        if (margin < v.margin) v = {name, x, y, margin};
        return;
      }
    }
    rows_.push_back({name, x, y, margin});
  }
  /// For strict constraints: a zero margin is already a violation.
  void record_strict(const std::string& name, double x, double y,
                     double margin) {
    if (margin > 0.0) return;
    record(name, x, y, std::min(margin, -std::numeric_limits<double>::min()));
  }
  std::vector<ConstraintViolation> take() { return std::move(rows_); }

 private:
  std::vector<ConstraintViolation> rows_;
};

inline std::vector<double> grid_points(double lo, double hi, double step) {
  std::vector<double> pts;
  if (hi < lo) return pts;
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step));
  pts.reserve(static_cast<std::size_t>(n) + 2);
  for (std::int64_t i = 0; i <= n; ++i) pts.push_back(lo + step * i);
  if (pts.back() < hi) pts.push_back(hi);
  return pts;
}

}  // namespace detail

/// Checks every CornerDomain constraint on a grid of spacing grid_step.
/// Violations are returned as data; only grid_step <= 0 throws.
inline ValidationReport validate_corner_domain(const CornerDomain& e,
                                               double grid_step) {
  if (!(grid_step > 0.0)) {
    throw std::invalid_argument("validate_corner_domain: grid_step must be > 0");
  }
  constexpr double kMaxSize = 1.0 / 64.0;
  detail::ViolationCollector out;
  ValidationReport report;

  if (!(e.a < e.b)) {
    out.record("ordered_sides", e.a, e.c, e.b - e.a);
    report.violations = out.take();
    return report;
  }
  out.record("width", e.b, e.c, kMaxSize - (e.b - e.a));
  out.record("height", e.a, e.top(), kMaxSize - (e.top() - e.c));

  const auto xs = detail::grid_points(e.a, e.b, grid_step);
  bool arc_ok = true;
  for (double x : xs) {
    const double m = 1.0 - std::abs(x - e.xc);
    out.record_strict("unit_arc_reach", x, e.yc, m);
    if (m <= 0.0) arc_ok = false;
  }
  // The strict inequality is checked as margin > 0.
  auto sphere = [&](double x, double y) {
    const double m = 0.5 * (y - e.yc) - std::abs(x - e.xc);
    report.sphere_center_margin = std::min(report.sphere_center_margin, m);
    out.record_strict("sphere_center", x, y, m);
  };
  const Box bb = e.bounding_box();
  sphere(bb.x0, bb.y0);
  sphere(bb.x1, bb.y0);
  sphere(bb.x0, bb.y1);
  sphere(bb.x1, bb.y1);
  if (!arc_ok) {
    report.violations = out.take();
    return report;
  }

  for (double x : xs) {
    const double s = e.lower_boundary(x);
    out.record("floor_below_arc", x, e.c, s - e.c);
    out.record("arc_below_roof", x, s, e.roof(x) - s);
    for (double y : detail::grid_points(e.lower(x), e.upper(x), grid_step)) {
      sphere(x, y);
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double x1 = xs[i];
      const double x2 = xs[j];
      const double gap = e.lower_boundary(0.5 * (x1 + x2)) -
                         0.5 * (e.lower_boundary(x1) + e.lower_boundary(x2));
      const double bound = 0.5 * (x1 - x2) * (x1 - x2);
      out.record("small_vertical_difference", 0.5 * (x1 + x2), gap,
                 bound - gap, 1e-12);
    }
  }
  report.violations = out.take();
  return report;
}

/// Orientation of an embedded corner window: the window's local frame maps
/// to the plane by (x, y) -> (sx * x, sy * y).
struct Reflection {
  int sx = 1;
  int sy = 1;

  Point apply(Point p) const { return {sx * p.x, sy * p.y}; }
};

struct EmbeddedCorner {
  CornerDomain window;
  Reflection reflection;
};

/// The global two-block space: two squares of side block_side joined by a
/// horizontal neck of height neck_height. Between neck and blocks the walls
/// rise along straight ramps of slope ramp_slope; the concave bend between
/// each neck edge and ramp is a unit-radius arc tangent to both. The space is
/// symmetric under x -> -x and y -> -y and centered at the origin.
///
/// The profile f(|x|) (half-height of the vertical section) is 1-Lipschitz
/// and quasi-convex, which makes the space weakly l-infinity convex.
class NeckSpace {
 public:
  NeckSpace(double block_side, double neck_height, double neck_length,
            double ramp_slope, bool has_neck = true)
      : s_(block_side),
        h_(neck_height),
        l_(neck_length),
        slope_(ramp_slope),
        has_neck_(has_neck) {
    if (!(h_ > 0.0) || !(l_ > 0.0)) {
      throw std::invalid_argument("NeckSpace: need h > 0 and l > 0");
    }
    if (!(s_ > h_)) {
      throw std::invalid_argument("NeckSpace: block side must exceed h");
    }
    if (!(slope_ > 0.0 && slope_ < 0.5)) {
      throw std::invalid_argument("NeckSpace: ramp slope must lie in (0, 1/2)");
    }
    const double theta = std::atan(slope_);
    tangent_ = std::tan(0.5 * theta);
    arc_width_ = std::sin(theta);
    ramp_ = 0.5 * (s_ - h_) / slope_;
    if (0.5 * l_ < tangent_) {
      throw std::invalid_argument("NeckSpace: neck too short for the fillet");
    }
    if (ramp_ < arc_width_ - tangent_) {
      throw std::invalid_argument("NeckSpace: ramp too short for the fillet");
    }
  }

  double block_side() const { return s_; }
  double neck_height() const { return h_; }
  double neck_length() const { return l_; }
  double ramp_slope() const { return slope_; }
  double ramp_length() const { return ramp_; }
  bool has_neck() const { return has_neck_; }

  /// Inner x-coordinate (toward the neck) of the right block.
  double block_inner() const { return 0.5 * l_ + ramp_; }
  double x_extent() const { return block_inner() + s_; }

  Box left_block() const {
    return {-x_extent(), -block_inner(), -0.5 * s_, 0.5 * s_};
  }
  Box right_block() const {
    return {block_inner(), x_extent(), -0.5 * s_, 0.5 * s_};
  }
  Box neck_rect() const { return {-0.5 * l_, 0.5 * l_, -0.5 * h_, 0.5 * h_}; }
  Box bounding_box() const {
    return {-x_extent(), x_extent(), -0.5 * s_, 0.5 * s_};
  }

  /// x-coordinate of the fillet circle center for the right-hand bends.
  double fillet_center_x() const { return 0.5 * l_ - tangent_; }
  double fillet_width() const { return arc_width_; }

  /// Half-height of the vertical section at x; -inf where the section is
  /// empty.
  double half_height(double x) const {
    const double u = std::abs(x);
    constexpr double kEmpty = -std::numeric_limits<double>::infinity();
    if (u > x_extent() + kMembershipTol) return kEmpty;
    if (u >= block_inner()) return 0.5 * s_;
    if (!has_neck_) return kEmpty;
    const double x0 = fillet_center_x();
    if (u <= x0) return 0.5 * h_;
    if (u <= x0 + arc_width_) {
      const double dx = u - x0;
      return 0.5 * h_ + 1.0 - std::sqrt(1.0 - dx * dx);
    }
    return 0.5 * h_ + slope_ * (u - 0.5 * l_);
  }

  bool contains(Point p, double tol = kMembershipTol) const {
    const double f = half_height(std::clamp(p.x, -x_extent(), x_extent()));
    if (std::abs(p.x) > x_extent() + tol) return false;
    if (!std::isfinite(f)) {
      // Closed blocks: accept points within tol of the inner faces.
      if (std::abs(std::abs(p.x) - block_inner()) <= tol) {
        return std::abs(p.y) <= 0.5 * s_ + tol;
      }
      return false;
    }
    return std::abs(p.y) <= f + tol;
  }

  /// Largest half-height over [x0, x1]. f is quasi-convex on each connected
  /// piece of the x-range, so the maximum sits at a clipped endpoint.
  double max_half_height(double x0, double x1) const {
    double best = -std::numeric_limits<double>::infinity();
    auto piece = [&](double lo, double hi) {
      const double a = std::max(x0, lo);
      const double b = std::min(x1, hi);
      if (a > b) return;
      best = std::max({best, half_height(a), half_height(b)});
    };
    if (has_neck_) {
      piece(-x_extent(), x_extent());
    } else {
      piece(-x_extent(), -block_inner());
      piece(block_inner(), x_extent());
    }
    return best;
  }

  bool intersects(const Box& box) const {
    if (box.empty()) return false;
    const double f = max_half_height(box.x0, box.x1);
    if (!std::isfinite(f)) return false;
    double gap = 0.0;
    if (box.y0 > 0.0) gap = box.y0;
    if (box.y1 < 0.0) gap = -box.y1;
    return gap <= f + kMembershipTol;
  }

  /// The four bends as CornerDomain windows in their un-reflected frames.
  /// Each bend is tiled by windows narrower than 1/64 so every window obeys
  /// the local-domain size constraints.
  std::vector<EmbeddedCorner> corner_windows(double window_width = 1.0 / 128.0) const {
    std::vector<EmbeddedCorner> out;
    if (!has_neck_) return out;
    const double x0 = fillet_center_x();
    // Headroom above the arc stays inside the neck section.
    const double room = std::min(1.0 / 256.0, 0.25 * h_);
    window_width = std::min(window_width, 0.5 * h_);
    const auto n = static_cast<int>(std::ceil(arc_width_ / window_width));
    const double w = arc_width_ / n;
    for (int sx : {1, -1}) {
      for (int sy : {1, -1}) {
        for (int k = 0; k < n; ++k) {
          CornerDomain cd;
          cd.a = x0 + k * w;
          cd.b = cd.a + w;
          cd.xc = x0;
          cd.yc = -0.5 * h_ - 1.0;
          const double s_lo = cd.yc + std::sqrt(1.0 - (cd.b - x0) * (cd.b - x0));
          const double s_hi = cd.yc + std::sqrt(1.0 - (cd.a - x0) * (cd.a - x0));
          cd.c = s_lo - 0.5 * room;
          cd.d = s_hi + room;
          out.push_back({cd, Reflection{sx, -sy}});
        }
      }
    }
    return out;
  }

  double x_min() const { return -x_extent(); }
  double x_max() const { return x_extent(); }
  double lower(double x) const { return -half_height(x); }
  double upper(double x) const { return half_height(x); }

 private:
  double s_;
  double h_;
  double l_;
  double slope_;
  bool has_neck_;
  double tangent_ = 0.0;
  double arc_width_ = 0.0;
  double ramp_ = 0.0;
};

struct ConvexityReport {
  std::int64_t pairs = 0;
  std::int64_t with_midpoint = 0;

  double fraction() const {
    return pairs == 0 ? 1.0 : static_cast<double>(with_midpoint) / pairs;
  }
};

enum class PairMode { Independent, Identical };

inline Point sample_point(const NeckSpace& x, Rng& rng) {
  const Box bb = x.bounding_box();
  for (;;) {
    const Point p{rng.uniform(bb.x0, bb.x1), rng.uniform(bb.y0, bb.y1)};
    if (x.contains(p, 0.0)) return p;
  }
}

/// Samples pairs from X and counts those whose midpoint set meets X.
inline ConvexityReport check_weak_convexity(
    const NeckSpace& x, std::int64_t n_samples, std::uint64_t seed,
    PairMode mode = PairMode::Independent) {
  if (n_samples < 1) {
    throw std::invalid_argument("check_weak_convexity: n_samples must be >= 1");
  }
  Rng rng(seed);
  ConvexityReport report;
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const Point p = sample_point(x, rng);
    const Point q = mode == PairMode::Identical ? p : sample_point(x, rng);
    ++report.pairs;
    if (x.intersects(mid_region(p, q))) ++report.with_midpoint;
  }
  return report;
}

}  // namespace cdlab
