#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/region.hpp"

namespace cdlab {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// One atom: all of `mass` spread uniformly over a cell of area `area`
/// (the cell's intersection with the ambient region).
struct Atom {
  Point point;
  double mass = 0.0;
  double area = 0.0;

  double density() const { return mass / area; }
};

/// Atomic probability measure in the cell-density model. Atom i stands for
/// density mass_i / area_i on its cell; area defaults to cell_size^2.
class DiscreteMeasure {
 public:
  static constexpr double kMassTol = 1e-12;

  DiscreteMeasure() = default;

  /// Validates: positive masses, unit total within kMassTol, distinct points.
  DiscreteMeasure(std::vector<Atom> atoms, double cell_size,
                  std::string domain_tag = "plane")
      : atoms_(std::move(atoms)),
        cell_size_(cell_size),
        domain_tag_(std::move(domain_tag)) {
    if (!(cell_size_ > 0.0)) {
      throw std::invalid_argument("DiscreteMeasure: cell size must be > 0");
    }
    if (atoms_.empty()) {
      throw std::invalid_argument("DiscreteMeasure: no atoms");
    }
    CompensatedSum total;
    for (auto& a : atoms_) {
      if (!(a.mass > 0.0)) {
        throw std::invalid_argument("DiscreteMeasure: nonpositive mass");
      }
      if (a.area == 0.0) a.area = cell_size_ * cell_size_;
      if (!(a.area > 0.0)) {
        throw std::invalid_argument("DiscreteMeasure: nonpositive cell area");
      }
      if (!std::isfinite(a.point.x) || !std::isfinite(a.point.y)) {
        throw std::invalid_argument("DiscreteMeasure: non-finite atom");
      }
      total.add(a.mass);
    }
    if (std::abs(total.value() - 1.0) > kMassTol) {
      throw std::invalid_argument("DiscreteMeasure: total mass " +
                                  std::to_string(total.value()) + " != 1");
    }
    std::vector<Point> pts;
    pts.reserve(atoms_.size());
    for (const auto& a : atoms_) pts.push_back(a.point);
    std::sort(pts.begin(), pts.end(), [](Point p, Point q) {
      return p.x < q.x || (p.x == q.x && p.y < q.y);
    });
    if (std::adjacent_find(pts.begin(), pts.end()) != pts.end()) {
      throw std::invalid_argument("DiscreteMeasure: repeated atom point");
    }
  }

  /// Rescales masses to unit total before validating.
  static DiscreteMeasure normalized(std::vector<Atom> atoms, double cell_size,
                                    std::string domain_tag = "plane") {
    CompensatedSum total;
    for (const auto& a : atoms) total.add(a.mass);
    const double t = total.value();
    if (!(t > 0.0)) throw std::invalid_argument("normalized: zero total mass");
    for (auto& a : atoms) a.mass /= t;
    return DiscreteMeasure(std::move(atoms), cell_size, std::move(domain_tag));
  }

  /// Equal-mass atoms at the given points, each on a full cell.
  static DiscreteMeasure uniform_atoms(std::span<const Point> points,
                                       double cell_size,
                                       std::string domain_tag = "plane") {
    std::vector<Atom> atoms;
    for (Point p : points) {
      atoms.push_back({p, 1.0 / points.size(), cell_size * cell_size});
    }
    return DiscreteMeasure(std::move(atoms), cell_size, std::move(domain_tag));
  }

  std::span<const Atom> atoms() const { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  std::size_t size() const { return atoms_.size(); }
  double cell_size() const { return cell_size_; }
  const std::string& domain_tag() const { return domain_tag_; }

  double total_mass() const {
    CompensatedSum s;
    for (const auto& a : atoms_) s.add(a.mass);
    return s.value();
  }

  /// Sorts atoms lexicographically by (x, y).
  void sort_atoms() {
    std::sort(atoms_.begin(), atoms_.end(), [](const Atom& p, const Atom& q) {
      return p.point.x < q.point.x ||
             (p.point.x == q.point.x && p.point.y < q.point.y);
    });
  }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.size() != b.size() || a.cell_size_ != b.cell_size_) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& p = a.atoms_[i];
      const auto& q = b.atoms_[i];
      if (!(p.point == q.point) || p.mass != q.mass || p.area != q.area) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Atom> atoms_;
  double cell_size_ = 1.0;
  std::string domain_tag_ = "plane";
};

/// How atoms are placed before re-binning: as point masses, or as uniform
/// squares of side cell_size centered at the atom (the cell-density model).
enum class Spread { Point, Cell };

namespace detail {

struct CellKey {
  std::int64_t ix;
  std::int64_t iy;
  auto operator<=>(const CellKey&) const = default;
};

inline CellKey cell_of(Point p, double eps) {
  return {static_cast<std::int64_t>(std::floor(p.x / eps)),
          static_cast<std::int64_t>(std::floor(p.y / eps))};
}

inline Box cell_box(CellKey k, double eps) {
  return {k.ix * eps, (k.ix + 1) * eps, k.iy * eps, (k.iy + 1) * eps};
}

/// Converts accumulated cell masses into atoms at region-clipped centroids.
/// Mass landing in a cell with no region overlap (boundary rounding) moves
/// to the nearest neighboring cell that has overlap.
template <XSimpleRegion R>
DiscreteMeasure cells_to_measure(std::map<CellKey, double> masses,
                                 double eps, const R& region,
                                 const std::string& tag) {
  std::map<CellKey, CellPiece> pieces;
  auto piece = [&](CellKey k) -> const CellPiece& {
    auto it = pieces.find(k);
    if (it == pieces.end()) {
      it = pieces.emplace(k, clip_cell(region, cell_box(k, eps))).first;
    }
    return it->second;
  };
  const double min_area = 1e-9 * eps * eps;
  std::map<CellKey, double> moved;
  for (const auto& [k, m] : masses) {
    if (piece(k).area > min_area) {
      moved[k] += m;
      continue;
    }
    bool placed = false;
    for (int ring = 1; ring <= 2 && !placed; ++ring) {
      double best_area = 0.0;
      CellKey best = k;
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          const CellKey n{k.ix + dx, k.iy + dy};
          const double a = piece(n).area;
          if (a > best_area) {
            best_area = a;
            best = n;
          }
        }
      }
      if (best_area > min_area) {
        moved[best] += m;
        placed = true;
      }
    }
    if (!placed) {
      throw std::domain_error("block_average: mass outside the region");
    }
  }
  if (moved.empty()) throw std::domain_error("block_average: empty support");
  std::vector<Atom> atoms;
  atoms.reserve(moved.size());
  for (const auto& [k, m] : moved) {
    if (!(m > 0.0)) continue;
    const auto& p = piece(k);
    atoms.push_back({p.centroid, m, p.area});
  }
  auto out = DiscreteMeasure::normalized(std::move(atoms), eps, tag);
  out.sort_atoms();
  return out;
}

}  // namespace detail

/// Bins raw atoms (repeated points allowed) onto the eps-grid
/// [n eps, (n+1) eps) x [m eps, (m+1) eps) intersected with the region.
/// With Spread::Cell each atom is a uniform square of side atom_cell.
template <XSimpleRegion R>
DiscreteMeasure bin_atoms(std::span<const Atom> atoms, double atom_cell, double eps,
                          const R& region, Spread spread = Spread::Point,
                          const std::string& tag = "region") {
  if (!(eps > 0.0)) throw std::invalid_argument("block_average: eps must be > 0");
  std::map<detail::CellKey, double> masses;
  if (spread == Spread::Point) {
    for (const auto& a : atoms) masses[detail::cell_of(a.point, eps)] += a.mass;
  } else {
    const double half = 0.5 * atom_cell;
    for (const auto& a : atoms) {
      const Box sq{a.point.x - half, a.point.x + half, a.point.y - half,
                   a.point.y + half};
      const auto lo = detail::cell_of({sq.x0, sq.y0}, eps);
      const auto hi = detail::cell_of({sq.x1, sq.y1}, eps);
      const double full = sq.area();
      for (auto ix = lo.ix; ix <= hi.ix; ++ix) {
        for (auto iy = lo.iy; iy <= hi.iy; ++iy) {
          const double ov = intersect(sq, detail::cell_box({ix, iy}, eps)).area();
          if (ov > 0.0) masses[{ix, iy}] += a.mass * ov / full;
        }
      }
    }
  }
  return detail::cells_to_measure(std::move(masses), eps, region, tag);
}

/// Cell averages of mu on the eps-grid intersected with the region. Output
/// atoms sit at region-clipped cell centroids and carry the input mass of
/// their cell.
template <XSimpleRegion R>
DiscreteMeasure block_average(const DiscreteMeasure& mu, double eps,
                              const R& region, Spread spread = Spread::Point,
                              const std::string& tag = "region") {
  return bin_atoms(mu.atoms(), mu.cell_size(), eps, region, spread, tag);
}

/// Discretizes an analytic density on region ∩ eps-cells. The per-cell mass
/// uses a Gauss-Legendre rule over the clipped vertical sections.
template <XSimpleRegion R>
DiscreteMeasure block_average(const std::function<double(Point)>& density,
                              double eps, const R& region,
                              const std::string& tag = "region") {
  if (!(eps > 0.0)) throw std::invalid_argument("block_average: eps must be > 0");
  static constexpr std::array<double, 4> kNodes{-0.8611363115940526, -0.3399810435848563,
                                                0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> kWeights{0.3478548451374538, 0.6521451548625461,
                                                  0.6521451548625461, 0.3478548451374538};
  const double x0 = region.x_min();
  const double x1 = region.x_max();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -y0;
  for (int i = 0; i <= 512; ++i) {
    const double x = x0 + (x1 - x0) * i / 512.0;
    const double lo = region.lower(x);
    const double hi = region.upper(x);
    if (hi >= lo) {
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
  }
  if (!(y1 >= y0)) throw std::domain_error("block_average: empty support");
  const auto lo = detail::cell_of({x0, y0}, eps);
  const auto hi = detail::cell_of({x1, y1}, eps);
  std::vector<Atom> atoms;
  for (auto ix = lo.ix; ix <= hi.ix; ++ix) {
    for (auto iy = lo.iy; iy <= hi.iy; ++iy) {
      const Box cell = detail::cell_box({ix, iy}, eps);
      const CellPiece piece = clip_cell(region, cell);
      if (!(piece.area > 1e-9 * eps * eps)) continue;
      const double cx0 = std::max(cell.x0, x0);
      const double cx1 = std::min(cell.x1, x1);
      CompensatedSum mass;
      for (int i = 0; i < 4; ++i) {
        const double x = 0.5 * (cx0 + cx1) + 0.5 * (cx1 - cx0) * kNodes[i];
        const double ylo = std::max(static_cast<double>(region.lower(x)), cell.y0);
        const double yhi = std::min(static_cast<double>(region.upper(x)), cell.y1);
        if (!(yhi > ylo)) continue;
        for (int j = 0; j < 4; ++j) {
          const double y = 0.5 * (ylo + yhi) + 0.5 * (yhi - ylo) * kNodes[j];
          mass.add(kWeights[i] * kWeights[j] * 0.25 * (cx1 - cx0) * (yhi - ylo) *
                   density({x, y}));
        }
      }
      if (mass.value() > 0.0) atoms.push_back({piece.centroid, mass.value(), piece.area});
    }
  }
  if (atoms.empty()) throw std::domain_error("block_average: empty support");
  auto out = DiscreteMeasure::normalized(std::move(atoms), eps, tag);
  out.sort_atoms();
  return out;
}

namespace detail {

template <XSimpleRegion R>
Box region_bounds(const R& region) {
  const double x0 = region.x_min();
  const double x1 = region.x_max();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -y0;
  for (int i = 0; i <= 512; ++i) {
    const double x = x0 + (x1 - x0) * i / 512.0;
    const double lo = region.lower(x);
    const double hi = region.upper(x);
    if (hi >= lo) {
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
  }
  return {x0, x1, y0, y1};
}

}  // namespace detail

/// Piecewise-constant measure on the cells of side `cell` clipped to the
/// region: the cell with clipped centroid c gets density density(c).
/// Cells with nonpositive density are left out.
template <XSimpleRegion R>
DiscreteMeasure piecewise_measure(const R& region, double cell,
                                  const std::function<double(Point)>& density,
                                  const std::string& tag = "region") {
  if (!(cell > 0.0)) throw std::invalid_argument("piecewise_measure: cell must be > 0");
  const Box bb = detail::region_bounds(region);
  if (bb.empty()) throw std::domain_error("piecewise_measure: empty support");
  const auto lo = detail::cell_of({bb.x0, bb.y0}, cell);
  const auto hi = detail::cell_of({bb.x1, bb.y1}, cell);
  std::vector<Atom> atoms;
  for (auto ix = lo.ix; ix <= hi.ix; ++ix) {
    for (auto iy = lo.iy; iy <= hi.iy; ++iy) {
      const CellPiece p = clip_cell(region, detail::cell_box({ix, iy}, cell));
      if (!(p.area > 1e-9 * cell * cell)) continue;
      const double rho = density(p.centroid);
      if (rho > 0.0) atoms.push_back({p.centroid, rho * p.area, p.area});
    }
  }
  if (atoms.empty()) throw std::domain_error("piecewise_measure: empty support");
  auto out = DiscreteMeasure::normalized(std::move(atoms), cell, tag);
  out.sort_atoms();
  return out;
}

/// Measure with a density that is constant on each eps-cell of the region,
/// represented on subdiv x subdiv sub-cells per cell. cell_density receives
/// the integer cell index.
template <XSimpleRegion R>
DiscreteMeasure cell_density_measure(
    const R& region, double eps, int subdiv,
    const std::function<double(std::int64_t, std::int64_t)>& cell_density,
    const std::string& tag = "region") {
  if (!(eps > 0.0) || subdiv < 1) {
    throw std::invalid_argument("cell_density_measure: bad resolution");
  }
  return piecewise_measure(
      region, eps / subdiv,
      [&](Point c) {
        const auto k = detail::cell_of(c, eps);
        return cell_density(k.ix, k.iy);
      },
      tag);
}

/// Rényi-type entropy: -sum_i m_i (m_i / area_i)^(-1/N').
inline double ent_N(const DiscreteMeasure& mu, double n_prime) {
  if (!(n_prime > 1.0)) throw std::invalid_argument("ent_N: N' must be > 1");
  CompensatedSum s;
  for (const auto& a : mu.atoms()) {
    if (!(a.mass > 0.0)) throw std::invalid_argument("ent_N: nonpositive mass");
    s.add(a.mass * std::pow(a.density(), -1.0 / n_prime));
  }
  return -s.value();
}

/// Boltzmann entropy: sum_i m_i log(m_i / area_i).
inline double ent_inf(const DiscreteMeasure& mu) {
  CompensatedSum s;
  for (const auto& a : mu.atoms()) s.add(a.mass * std::log(a.density()));
  return s.value();
}

struct DistortionInput {
  double t = 0.0;
  double K = 0.0;
  double N = 1.0;
  double theta = 0.0;
};

/// Distortion coefficient sigma^(t)_{K,N}(theta); +inf when K theta^2 >= N pi^2.
inline double sigma(const DistortionInput& in) {
  if (!(in.t >= 0.0 && in.t <= 1.0) || !(in.N >= 1.0) || !(in.theta >= 0.0)) {
    throw std::invalid_argument("sigma: need t in [0,1], N >= 1, theta >= 0");
  }
  const double k_theta2 = in.K * in.theta * in.theta;
  if (k_theta2 >= in.N * std::numbers::pi * std::numbers::pi) {
    return std::numeric_limits<double>::infinity();
  }
  if (k_theta2 == 0.0) return in.t;
  if (k_theta2 > 0.0) {
    const double w = in.theta * std::sqrt(in.K / in.N);
    return std::sin(in.t * w) / std::sin(w);
  }
  const double w = in.theta * std::sqrt(-in.K / in.N);
  return std::sinh(in.t * w) / std::sinh(w);
}

}  // namespace cdlab
