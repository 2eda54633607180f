#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/transport.hpp"

namespace cdlab::oracle {

inline constexpr int kMaxAtoms = 8;

/// Source and target weights are integer multiples of 1/L.
struct TinyInstance {
  std::vector<Point> sources;
  std::vector<Point> targets;
  std::vector<int> source_units;
  std::vector<int> target_units;
  int L = 1;

  void validate() const {
    if (sources.size() != source_units.size() || targets.size() != target_units.size()) {
      throw std::invalid_argument("TinyInstance: weights do not match points");
    }
    if (sources.empty() || targets.empty() || sources.size() > kMaxAtoms ||
        targets.size() > kMaxAtoms) {
      throw std::invalid_argument("TinyInstance: instance too large");
    }
    const int s = std::accumulate(source_units.begin(), source_units.end(), 0);
    const int t = std::accumulate(target_units.begin(), target_units.end(), 0);
    if (s != L || t != L) throw std::invalid_argument("TinyInstance: weights must sum to L");
    for (int u : source_units) if (u <= 0) throw std::invalid_argument("TinyInstance: zero weight");
    for (int u : target_units) if (u <= 0) throw std::invalid_argument("TinyInstance: zero weight");
  }

  static TinyInstance unit(std::vector<Point> src, std::vector<Point> dst) {
    if (src.size() != dst.size()) throw std::invalid_argument("TinyInstance::unit: sizes differ");
    const int n = static_cast<int>(src.size());
    return {std::move(src), std::move(dst), std::vector<int>(n, 1), std::vector<int>(n, 1), n};
  }

  DiscreteMeasure source_measure(double cell = 1.0) const { return measure(sources, source_units, cell); }
  DiscreteMeasure target_measure(double cell = 1.0) const { return measure(targets, target_units, cell); }

 private:
  DiscreteMeasure measure(const std::vector<Point>& pts, const std::vector<int>& units,
                          double cell) const {
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      atoms.push_back({pts[k], static_cast<double>(units[k]) / L, cell * cell});
    }
    return DiscreteMeasure(std::move(atoms), cell, "plane");
  }
};

/// Coupling as an integer matrix in units of 1/L (row = source).
using UnitPlan = std::vector<std::vector<int>>;

inline CostTriple unit_plan_costs(const TinyInstance& inst, const UnitPlan& plan) {
  CompensatedSum p, s, t;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    for (std::size_t j = 0; j < plan[i].size(); ++j) {
      if (plan[i][j] == 0) continue;
      const double m = static_cast<double>(plan[i][j]) / inst.L;
      p.add(m * primary_cost(inst.sources[i], inst.targets[j]));
      s.add(m * secondary_cost(inst.sources[i], inst.targets[j]));
      t.add(m * tertiary_cost(inst.sources[i], inst.targets[j]));
    }
  }
  return {p.value(), s.value(), t.value()};
}

/// Calls visit for every nonnegative integer matrix with the instance's
/// row and column sums.
inline void enumerate_plans(const TinyInstance& inst, const std::function<void(const UnitPlan&)>& visit) {
  inst.validate();
  const std::size_t n = inst.sources.size();
  const std::size_t m = inst.targets.size();
  UnitPlan plan(n, std::vector<int>(m, 0));
  std::vector<int> col_left = inst.target_units;
  std::function<void(std::size_t, std::size_t, int)> rec = [&](std::size_t i, std::size_t j, int row_left) {
    if (i == n) {
      visit(plan);
      return;
    }
    if (j + 1 == m) {
      if (row_left > col_left[j]) return;
      plan[i][j] = row_left;
      col_left[j] -= row_left;
      if (i + 1 < n) {
        rec(i + 1, 0, inst.source_units[i + 1]);
      } else if (std::all_of(col_left.begin(), col_left.end(), [](int c) { return c == 0; })) {
        visit(plan);
      }
      col_left[j] += row_left;
      plan[i][j] = 0;
      return;
    }
    for (int v = std::min(row_left, col_left[j]); v >= 0; --v) {
      plan[i][j] = v;
      col_left[j] -= v;
      rec(i, j + 1, row_left - v);
      col_left[j] += v;
    }
    plan[i][j] = 0;
  };
  rec(0, 0, inst.source_units[0]);
}

struct OtResult {
  double cost = 0.0;
  std::vector<UnitPlan> optimal_plans;
};

/// Exhaustive minimum of the l-infinity squared cost over unit plans.
inline OtResult brute_force_ot(const TinyInstance& inst, double tol = 1e-12) {
  OtResult out;
  out.cost = std::numeric_limits<double>::infinity();
  enumerate_plans(inst, [&](const UnitPlan& p) {
    const double c = unit_plan_costs(inst, p).primary;
    if (c < out.cost - tol) {
      out.cost = c;
      out.optimal_plans.clear();
    }
    if (c <= out.cost + tol) out.optimal_plans.push_back(p);
  });
  return out;
}

struct LexResult {
  CostTriple costs;
  std::vector<UnitPlan> witnesses;
};

/// Exhaustive lexicographic minimum of (primary, secondary, tertiary).
inline LexResult brute_force_lex(const TinyInstance& inst, double tol = 1e-12) {
  LexResult out;
  const double inf = std::numeric_limits<double>::infinity();
  out.costs = {inf, inf, inf};
  auto less = [&](const CostTriple& a, const CostTriple& b) {
    if (a.primary < b.primary - tol) return true;
    if (a.primary > b.primary + tol) return false;
    if (a.secondary < b.secondary - tol) return true;
    if (a.secondary > b.secondary + tol) return false;
    return a.tertiary < b.tertiary - tol;
  };
  enumerate_plans(inst, [&](const UnitPlan& p) {
    const CostTriple c = unit_plan_costs(inst, p);
    if (less(c, out.costs)) {
      out.costs = c;
      out.witnesses.clear();
      out.witnesses.push_back(p);
    } else if (!less(out.costs, c)) {
      out.witnesses.push_back(p);
    }
  });
  return out;
}

/// Lattice points of the box [min - r, max + r]^2 around p, q (r half their
/// distance) satisfying both midpoint equalities within 1e-9.
inline std::vector<Point> lattice_mid_scan(Point p, Point q, int resolution) {
  if (resolution < 10) throw std::invalid_argument("lattice_mid_scan: resolution must be >= 10");
  const double r = 0.5 * linf_dist(p, q);
  const Box box{std::min(p.x, q.x) - r, std::max(p.x, q.x) + r, std::min(p.y, q.y) - r,
                std::max(p.y, q.y) + r};
  constexpr double kTol = 1e-9;
  std::vector<Point> out;
  for (int i = 0; i < resolution; ++i) {
    const double x = box.x0 + box.width() * i / (resolution - 1);
    for (int j = 0; j < resolution; ++j) {
      const double y = box.y0 + box.height() * j / (resolution - 1);
      const Point z{x, y};
      if (std::abs(linf_dist(p, z) - r) <= kTol && std::abs(linf_dist(q, z) - r) <= kTol) {
        if (out.empty() || !(out.back() == z)) out.push_back(z);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cdlab::oracle
