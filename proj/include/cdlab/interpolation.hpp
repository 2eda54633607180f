#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

enum class MidpointBranch { Euclidean, Corrected };

inline const char* to_string(MidpointBranch b) {
  return b == MidpointBranch::Euclidean ? "Mdef1" : "Mdef2";
}

struct Midpoint {
  Point point;
  MidpointBranch branch = MidpointBranch::Euclidean;
};

/// The corner-domain midpoint: Euclidean midpoint unless the pair moves
/// strictly more horizontally than vertically; horizontal pairs are lifted
/// above the arc by
///   y = (S0 + S1)/2 + (x0 - x1)^2 + (sqrt(y0 - S0) + sqrt(y1 - S1))^2 / 4.
/// Throws std::domain_error when an endpoint lies below the arc.
inline Midpoint midpoint_map(const CornerDomain& e, Point z0, Point z1) {
  if (classify(z0, z1) != PairClass::H) {
    return {{0.5 * (z0.x + z1.x), 0.5 * (z0.y + z1.y)}, MidpointBranch::Euclidean};
  }
  const double s0 = e.lower_boundary(z0.x);
  const double s1 = e.lower_boundary(z1.x);
  double u0 = z0.y - s0;
  double u1 = z1.y - s1;
  if (u0 < -kMembershipTol || u1 < -kMembershipTol) {
    throw std::domain_error("midpoint_map: point below the lower boundary");
  }
  u0 = std::max(u0, 0.0);
  u1 = std::max(u1, 0.0);
  const double root = std::sqrt(u0) + std::sqrt(u1);
  const double dx = z0.x - z1.x;
  return {{0.5 * (z0.x + z1.x), 0.5 * (s0 + s1) + dx * dx + 0.25 * root * root},
          MidpointBranch::Corrected};
}

struct MidpointRecord {
  int entry = 0;
  Point point;
  MidpointBranch branch = MidpointBranch::Euclidean;
};

struct MidpointAssignment {
  TransportPlan plan;
  std::vector<MidpointRecord> midpoints;  // one per plan entry, same order
  double collision_tol = 0.0;
};

/// Maps every plan entry to its midpoint and bins the midpoint masses onto
/// the eps_mid grid clipped to E. Throws std::domain_error if a midpoint
/// leaves E.
inline std::pair<MidpointAssignment, DiscreteMeasure> pushforward_midpoint(
    const CornerDomain& e, const TransportPlan& plan, double eps_mid,
    Spread spread = Spread::Point) {
  MidpointAssignment out{plan, {}, 0.25 * eps_mid};
  std::vector<Atom> atoms;
  out.midpoints.reserve(plan.entries.size());
  atoms.reserve(plan.entries.size());
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    const auto& entry = plan.entries[k];
    const Midpoint m = midpoint_map(e, plan.src(entry), plan.dst(entry));
    if (!e.contains(m.point)) {
      throw std::domain_error("pushforward_midpoint: midpoint (" + std::to_string(m.point.x) +
                              ", " + std::to_string(m.point.y) +
                              ") outside the domain; the domain or the plan is invalid");
    }
    out.midpoints.push_back({static_cast<int>(k), m.point, m.branch});
    atoms.push_back({m.point, entry.mass, 0.0});
  }
  const double atom_cell = std::min(plan.source.cell_size(), plan.target.cell_size());
  auto mu = bin_atoms(atoms, atom_cell, eps_mid, e, spread, "E");
  return {std::move(out), std::move(mu)};
}

/// Mass fraction of entries whose midpoint lies within tol (l-infinity) of
/// the midpoint of an entry with a different source atom.
inline double collision_fraction(const MidpointAssignment& a, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("collision_fraction: tol must be > 0");
  std::map<detail::CellKey, std::vector<int>> buckets;
  for (std::size_t k = 0; k < a.midpoints.size(); ++k) {
    buckets[detail::cell_of(a.midpoints[k].point, tol)].push_back(static_cast<int>(k));
  }
  CompensatedSum hit;
  for (std::size_t k = 0; k < a.midpoints.size(); ++k) {
    const Point p = a.midpoints[k].point;
    const auto key = detail::cell_of(p, tol);
    const int src = a.plan.entries[k].i;
    bool found = false;
    for (int dx = -1; dx <= 1 && !found; ++dx) {
      for (int dy = -1; dy <= 1 && !found; ++dy) {
        const auto it = buckets.find({key.ix + dx, key.iy + dy});
        if (it == buckets.end()) continue;
        for (int other : it->second) {
          if (a.plan.entries[other].i != src &&
              linf_dist(a.midpoints[other].point, p) <= tol) {
            found = true;
            break;
          }
        }
      }
    }
    if (found) hit.add(a.plan.entries[k].mass);
  }
  return hit.value();
}

struct GeodesicSample {
  double time = 0.0;
  DiscreteMeasure measure;
};

/// Dyadic midpoint construction: level by level, each pair of neighbors is
/// joined by the midpoint measure of its lexicographic plan.
inline std::vector<GeodesicSample> dyadic_geodesic(const CornerDomain& e,
                                                   const DiscreteMeasure& mu0,
                                                   const DiscreteMeasure& mu1, int depth,
                                                   double eps_mid,
                                                   Spread spread = Spread::Point,
                                                   double face_tol = 1e-9) {
  if (depth < 1) throw std::invalid_argument("dyadic_geodesic: depth must be >= 1");
  std::vector<DiscreteMeasure> level{mu0, mu1};
  for (int d = 0; d < depth; ++d) {
    std::vector<DiscreteMeasure> next;
    next.reserve(2 * level.size() - 1);
    for (std::size_t k = 0; k + 1 < level.size(); ++k) {
      const auto plan = refine_lexicographic(level[k], level[k + 1], face_tol);
      next.push_back(level[k]);
      next.push_back(pushforward_midpoint(e, plan, eps_mid, spread).second);
    }
    next.push_back(level.back());
    level = std::move(next);
  }
  std::vector<GeodesicSample> out;
  const double n = static_cast<double>(level.size() - 1);
  for (std::size_t k = 0; k < level.size(); ++k) out.push_back({k / n, std::move(level[k])});
  return out;
}

struct JacobianCheck {
  double j_m = 0.0;
  double j_t = 0.0;
  bool holds = false;
};

/// Algebraic midpoint-Jacobian inequality
///   J_M^(1/4) >= (1 + J_T^(1/4)) / 2,
/// J_M = (1 + a)/2 * (1 + b + sqrt(r) + b/sqrt(r))/4, J_T = a b.
inline JacobianCheck jacobian_inequality_check(double a, double b, double r) {
  if (!(r > 0.0)) throw std::domain_error("jacobian_inequality_check: r must be > 0");
  if (!(a >= 0.0) || !(b >= 0.0)) {
    throw std::invalid_argument("jacobian_inequality_check: a, b must be >= 0");
  }
  const double sr = std::sqrt(r);
  JacobianCheck out;
  out.j_m = 0.5 * (1.0 + a) * 0.25 * (1.0 + b + sr + b / sr);
  out.j_t = a * b;
  out.holds = std::pow(out.j_m, 0.25) >= 0.5 * (1.0 + std::pow(out.j_t, 0.25)) - 1e-12;
  return out;
}

}  // namespace cdlab
