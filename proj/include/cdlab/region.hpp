#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "cdlab/geometry.hpp"

namespace cdlab {

/// Area and centroid of region ∩ cell.
struct CellPiece {
  double area = 0.0;
  Point centroid;
};

namespace detail {

using Moments = std::array<double, 3>;  // area, x-moment, y-moment

inline Moments simpson(double a, double b, const Moments& fa,
                const Moments& fm, const Moments& fb) {
  Moments out;
  for (int k = 0; k < 3; ++k) out[k] = (b - a) / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]);
  return out;
}

template <typename F>
Moments adaptive_simpson(F& f, double a, double b, const Moments& fa,
                         const Moments& fm, const Moments& fb,
                         const Moments& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Moments flm = f(lm);
  const Moments frm = f(rm);
  const Moments left = simpson(a, m, fa, flm, fm);
  const Moments right = simpson(m, b, fm, frm, fb);
  const double err = std::abs(left[0] + right[0] - whole[0]);
  if (depth <= 0 || err <= 15.0 * tol) {
    Moments out;
    for (int k = 0; k < 3; ++k) out[k] = left[k] + right[k] + (left[k] + right[k] - whole[k]) / 15.0;
    return out;
  }
  const Moments l = adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
  const Moments r = adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  return {l[0] + r[0], l[1] + r[1], l[2] + r[2]};
}

}  // namespace detail

/// Integrates the vertical extent of region ∩ cell over x.
template <XSimpleRegion R>
CellPiece clip_cell(const R& region, const Box& cell) {
  const double x0 = std::max(cell.x0, static_cast<double>(region.x_min()));
  const double x1 = std::min(cell.x1, static_cast<double>(region.x_max()));
  if (!(x0 < x1)) return {};
  auto f = [&](double x) -> detail::Moments {
    const double lo = std::max(static_cast<double>(region.lower(x)), cell.y0);
    const double hi = std::min(static_cast<double>(region.upper(x)), cell.y1);
    if (!(hi > lo)) return {0.0, 0.0, 0.0};
    const double h = hi - lo;
    return {h, x * h, 0.5 * (hi * hi - lo * lo)};
  };
  const double tol = 1e-12 * cell.area();
  // Four initial panels so thin slivers are not skipped.
  constexpr int kPanels = 4;
  detail::Moments total{0.0, 0.0, 0.0};
  const double w = (x1 - x0) / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double a = x0 + i * w;
    const double b = i + 1 == kPanels ? x1 : a + w;
    const auto fa = f(a);
    const auto fm = f(0.5 * (a + b));
    const auto fb = f(b);
    const auto whole = detail::simpson(a, b, fa, fm, fb);
    const auto part =
        detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol / kPanels, 30);
    for (int k = 0; k < 3; ++k) total[k] += part[k];
  }
  if (!(total[0] > 0.0)) return {};
  return {total[0], {total[1] / total[0], total[2] / total[0]}};
}

template <XSimpleRegion R>
double region_area(const R& region) {
  const double x0 = region.x_min();
  const double x1 = region.x_max();
  double lo = region.lower(x0);
  double hi = region.upper(x0);
  // Bounding box by sampling; clip_cell does the exact work.
  for (int i = 0; i <= 256; ++i) {
    const double x = x0 + (x1 - x0) * i / 256.0;
    lo = std::min(lo, static_cast<double>(region.lower(x)));
    hi = std::max(hi, static_cast<double>(region.upper(x)));
  }
  return clip_cell(region, Box{x0, x1, lo - 1.0, hi + 1.0}).area;
}

}  // namespace cdlab
