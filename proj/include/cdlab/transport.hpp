#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/network_simplex.hpp"

namespace cdlab {

enum class Stage { Opt1, Opt2, Opt3 };
enum class PairClass { H, V, D };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Opt1: return "Opt1";
    case Stage::Opt2: return "Opt2";
    case Stage::Opt3: return "Opt3";
  }
  return "?";
}

inline const char* to_string(PairClass c) {
  switch (c) {
    case PairClass::H: return "H";
    case PairClass::V: return "V";
    case PairClass::D: return "D";
  }
  return "?";
}

/// Exact comparison on stored coordinates.
inline PairClass classify(Point z, Point w) {
  const double dx = std::abs(z.x - w.x);
  const double dy = std::abs(z.y - w.y);
  if (dx > dy) return PairClass::H;
  if (dx < dy) return PairClass::V;
  return PairClass::D;
}

inline double primary_cost(Point z, Point w) {
  const double d = linf_dist(z, w);
  return d * d;
}
inline double secondary_cost(Point z, Point w) { return (z.x - w.x) * (z.x - w.x); }
inline double tertiary_cost(Point z, Point w) { return (z.y - w.y) * (z.y - w.y); }

struct CostTriple {
  double primary = 0.0;
  double secondary = 0.0;
  double tertiary = 0.0;
};

struct PlanEntry {
  int i = 0;  // source atom
  int j = 0;  // target atom
  double mass = 0.0;
};

/// Coupling between two discrete measures. Entries are sorted by (i, j).
struct TransportPlan {
  DiscreteMeasure source;
  DiscreteMeasure target;
  std::vector<PlanEntry> entries;
  Stage stage = Stage::Opt1;
  CostTriple costs;
  /// Non-basic arcs with zero reduced cost at the final stage; nonzero
  /// values flag possible alternative optimal vertices.
  std::int64_t tied_arcs = 0;

  Point src(const PlanEntry& e) const { return source[e.i].point; }
  Point dst(const PlanEntry& e) const { return target[e.j].point; }
};

inline CostTriple plan_costs(const TransportPlan& plan) {
  CompensatedSum p, s, t;
  for (const auto& e : plan.entries) {
    const Point z = plan.src(e);
    const Point w = plan.dst(e);
    p.add(e.mass * primary_cost(z, w));
    s.add(e.mass * secondary_cost(z, w));
    t.add(e.mass * tertiary_cost(z, w));
  }
  return {p.value(), s.value(), t.value()};
}

/// Largest row/column marginal error of the plan.
inline double marginal_error(const TransportPlan& plan) {
  std::vector<double> row(plan.source.size(), 0.0);
  std::vector<double> col(plan.target.size(), 0.0);
  for (const auto& e : plan.entries) {
    row[e.i] += e.mass;
    col[e.j] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) err = std::max(err, std::abs(row[i] - plan.source[i].mass));
  for (std::size_t j = 0; j < col.size(); ++j) err = std::max(err, std::abs(col[j] - plan.target[j].mass));
  return err;
}

class SolverError : public std::runtime_error {
 public:
  SolverError(Stage stage, const std::string& what)
      : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

namespace detail {

/// Entering threshold on normalized reduced costs.
inline constexpr double kEnterTol = 1e-13;
/// Flows below this are dropped from the plan.
inline constexpr double kFlowFloor = 1e-15;

struct Masses {
  std::vector<double> supply;
  std::vector<double> demand;
};

inline Masses balanced_masses(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  Masses m;
  for (const auto& a : mu0.atoms()) m.supply.push_back(a.mass);
  for (const auto& a : mu1.atoms()) m.demand.push_back(a.mass);
  const double s = mu0.total_mass();
  const double d = mu1.total_mass();
  if (std::abs(s - d) > DiscreteMeasure::kMassTol) {
    throw SolverError(Stage::Opt1, "mass mismatch between source and target");
  }
  // Remove the sub-tolerance imbalance so the problem is exactly balanced.
  for (double& v : m.demand) v *= s / d;
  return m;
}

using CostFn = double (*)(Point, Point);

/// Solves min sum cost over couplings restricted to `arcs`, with the cost
/// scaled by its maximum on the arc set. Returns arcs whose reduced cost is
/// within face_tol of zero together with the final flows.
struct StageResult {
  std::vector<std::array<int, 2>> tight;
  std::vector<PlanEntry> entries;
  std::int64_t tied_nonbasic = 0;
};

inline StageResult solve_stage(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                               const Masses& masses,
                               const std::vector<std::array<int, 2>>& arcs, CostFn cost,
                               Stage stage, double face_tol) {
  double scale = 0.0;
  std::vector<double> c(arcs.size());
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    c[k] = cost(mu0[arcs[k][0]].point, mu1[arcs[k][1]].point);
    scale = std::max(scale, c[k]);
  }
  if (scale == 0.0) scale = 1.0;
  TransportSimplex<double> ns(masses.supply, masses.demand);
  for (std::size_t k = 0; k < arcs.size(); ++k) ns.add_arc(arcs[k][0], arcs[k][1], c[k] / scale);
  const auto status = ns.run(kEnterTol);
  if (status == TransportSimplex<double>::Status::IterationLimit) {
    throw SolverError(stage, "pivot limit reached");
  }
  if (status == TransportSimplex<double>::Status::Infeasible) {
    throw SolverError(stage, "restricted problem infeasible");
  }
  StageResult out;
  for (int e = 0; e < ns.arc_count(); ++e) {
    const double r = ns.reduced_cost(e);
    if (r <= face_tol) {
      out.tight.push_back(arcs[e]);
      if (!ns.is_basic(e)) ++out.tied_nonbasic;
    }
    if (ns.flow(e) > kFlowFloor) out.entries.push_back({arcs[e][0], arcs[e][1], ns.flow(e)});
  }
  return out;
}

inline std::vector<std::array<int, 2>> dense_arcs(std::size_t n, std::size_t m) {
  std::vector<std::array<int, 2>> arcs;
  arcs.reserve(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) arcs.push_back({static_cast<int>(i), static_cast<int>(j)});
  }
  return arcs;
}

inline TransportPlan make_plan(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                               std::vector<PlanEntry> entries, Stage stage,
                               std::int64_t tied) {
  std::sort(entries.begin(), entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  });
  TransportPlan plan{mu0, mu1, std::move(entries), stage, {}, tied};
  plan.costs = plan_costs(plan);
  return plan;
}

}  // namespace detail

/// Minimizes the l-infinity squared cost over all couplings.
inline TransportPlan solve_primary(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                   double face_tol = 1e-9) {
  const auto masses = detail::balanced_masses(mu0, mu1);
  auto r = detail::solve_stage(mu0, mu1, masses, detail::dense_arcs(mu0.size(), mu1.size()),
                               primary_cost, Stage::Opt1, face_tol);
  return detail::make_plan(mu0, mu1, std::move(r.entries), Stage::Opt1, r.tied_nonbasic);
}

/// Nested minimization: primary, then secondary over the primary optimal
/// face, then tertiary over the secondary optimal face. Each face is the set
/// of arcs with zero reduced cost (within face_tol, on costs scaled to unit
/// maximum) for the previous stage's optimal duals; by complementary
/// slackness a coupling is optimal for that stage iff it lives on that set.
inline TransportPlan refine_lexicographic(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                          double face_tol = 1e-9, Stage upto = Stage::Opt3) {
  if (!(face_tol >= 0.0)) throw std::invalid_argument("refine_lexicographic: face_tol < 0");
  const auto masses = detail::balanced_masses(mu0, mu1);
  auto r = detail::solve_stage(mu0, mu1, masses, detail::dense_arcs(mu0.size(), mu1.size()),
                               primary_cost, Stage::Opt1, face_tol);
  if (upto == Stage::Opt1) {
    return detail::make_plan(mu0, mu1, std::move(r.entries), Stage::Opt1, r.tied_nonbasic);
  }
  r = detail::solve_stage(mu0, mu1, masses, r.tight, secondary_cost, Stage::Opt2, face_tol);
  if (upto == Stage::Opt2) {
    return detail::make_plan(mu0, mu1, std::move(r.entries), Stage::Opt2, r.tied_nonbasic);
  }
  r = detail::solve_stage(mu0, mu1, masses, r.tight, tertiary_cost, Stage::Opt3, face_tol);
  return detail::make_plan(mu0, mu1, std::move(r.entries), Stage::Opt3, r.tied_nonbasic);
}

/// Cross-check backend: one solve of primary + lambda secondary +
/// lambda^2 tertiary (each scaled to unit maximum) in extended precision.
inline TransportPlan refine_scalarized(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                       long double lambda = 1e-7L) {
  const auto masses = detail::balanced_masses(mu0, mu1);
  const auto arcs = detail::dense_arcs(mu0.size(), mu1.size());
  std::array<long double, 3> scale{0, 0, 0};
  for (const auto& a : arcs) {
    const Point z = mu0[a[0]].point;
    const Point w = mu1[a[1]].point;
    scale[0] = std::max<long double>(scale[0], primary_cost(z, w));
    scale[1] = std::max<long double>(scale[1], secondary_cost(z, w));
    scale[2] = std::max<long double>(scale[2], tertiary_cost(z, w));
  }
  for (auto& s : scale) if (s == 0) s = 1;
  TransportSimplex<long double> ns(masses.supply, masses.demand);
  for (const auto& a : arcs) {
    const Point z = mu0[a[0]].point;
    const Point w = mu1[a[1]].point;
    ns.add_arc(a[0], a[1],
               primary_cost(z, w) / scale[0] + lambda * (secondary_cost(z, w) / scale[1]) +
                   lambda * lambda * (tertiary_cost(z, w) / scale[2]));
  }
  const long double tol = 1e-17L;
  if (ns.run(tol) != TransportSimplex<long double>::Status::Optimal) {
    throw SolverError(Stage::Opt3, "scalarized solve failed");
  }
  std::vector<PlanEntry> entries;
  std::int64_t tied = 0;
  for (int e = 0; e < ns.arc_count(); ++e) {
    if (ns.flow(e) > detail::kFlowFloor) entries.push_back({arcs[e][0], arcs[e][1], ns.flow(e)});
    if (!ns.is_basic(e) && ns.reduced_cost(e) <= tol) ++tied;
  }
  return detail::make_plan(mu0, mu1, std::move(entries), Stage::Opt3, tied);
}

struct ClassSummary {
  std::vector<PairClass> classes;  // one per plan entry
  double mass_h = 0.0;
  double mass_v = 0.0;
  double mass_d = 0.0;
};

inline ClassSummary classify_pairs(const TransportPlan& plan) {
  ClassSummary out;
  CompensatedSum h, v, d;
  for (const auto& e : plan.entries) {
    const PairClass c = classify(plan.src(e), plan.dst(e));
    out.classes.push_back(c);
    (c == PairClass::H ? h : c == PairClass::V ? v : d).add(e.mass);
  }
  out.mass_h = h.value();
  out.mass_v = v.value();
  out.mass_d = d.value();
  return out;
}

/// Worst pairwise violation of one swap condition, with the two entries.
struct ConditionAudit {
  double max_violation = 0.0;
  std::int64_t checked = 0;
  int entry1 = -1;
  int entry2 = -1;
};

struct CyclicalAudit {
  ConditionAudit comcyc;
  ConditionAudit vercyc;
  ConditionAudit horcyc;
  /// Pairs that meet only the one-coordinate guard (swap keeps that
  /// coordinate's cost but changes the l-infinity cost) and fail the other
  /// coordinate's inequality. Such swaps raise the primary cost, so they are
  /// not excluded by the nested minimization; informational only.
  std::int64_t single_guard_exceptions = 0;

  double max_violation() const {
    return std::max({comcyc.max_violation, vercyc.max_violation, horcyc.max_violation});
  }
};

namespace detail {
inline void note(ConditionAudit& a, double violation, int e1, int e2) {
  ++a.checked;
  if (violation > a.max_violation) {
    a.max_violation = violation;
    a.entry1 = e1;
    a.entry2 = e2;
  }
}
inline bool near_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace detail

/// Checks the three two-pair swap conditions over all ordered entry pairs.
/// A coordinate condition is checked when the swap leaves both the
/// l-infinity cost and the other coordinate's cost unchanged (within eq_tol);
/// entries with a D-class pair are checked for the l-infinity condition only.
inline CyclicalAudit audit_cyclical(const TransportPlan& plan, double eq_tol = 1e-12) {
  CyclicalAudit out;
  const auto cls = classify_pairs(plan).classes;
  const auto n = static_cast<int>(plan.entries.size());
  for (int a = 0; a < n; ++a) {
    const Point z1 = plan.src(plan.entries[a]);
    const Point w1 = plan.dst(plan.entries[a]);
    for (int b = a + 1; b < n; ++b) {
      const Point z2 = plan.src(plan.entries[b]);
      const Point w2 = plan.dst(plan.entries[b]);
      const double p_keep = primary_cost(z1, w1) + primary_cost(z2, w2);
      const double p_swap = primary_cost(z1, w2) + primary_cost(z2, w1);
      detail::note(out.comcyc, p_keep - p_swap, a, b);

      const double x_keep = secondary_cost(z1, w1) + secondary_cost(z2, w2);
      const double x_swap = secondary_cost(z1, w2) + secondary_cost(z2, w1);
      const double y_keep = tertiary_cost(z1, w1) + tertiary_cost(z2, w2);
      const double y_swap = tertiary_cost(z1, w2) + tertiary_cost(z2, w1);
      const bool x_eq = detail::near_equal(x_keep, x_swap, eq_tol);
      const bool y_eq = detail::near_equal(y_keep, y_swap, eq_tol);
      const bool p_eq = detail::near_equal(p_keep, p_swap, eq_tol);

      if ((x_eq && y_keep - y_swap > 0.0 && !p_eq) || (y_eq && x_keep - x_swap > 0.0 && !p_eq)) {
        ++out.single_guard_exceptions;
      }
      if (cls[a] == PairClass::D || cls[b] == PairClass::D || !p_eq) continue;
      if (x_eq) detail::note(out.vercyc, y_keep - y_swap, a, b);
      if (y_eq) detail::note(out.horcyc, x_keep - x_swap, a, b);
    }
  }
  return out;
}

/// Mass of source atoms sent to two or more targets.
inline double audit_map_structure(const TransportPlan& plan) {
  std::vector<int> outgoing(plan.source.size(), 0);
  for (const auto& e : plan.entries) ++outgoing[e.i];
  CompensatedSum split;
  for (std::size_t i = 0; i < outgoing.size(); ++i) {
    if (outgoing[i] >= 2) split.add(plan.source[i].mass);
  }
  return split.value() / plan.source.total_mass();
}

struct OrderViolation {
  int entry1 = -1;
  int entry2 = -1;
  /// 1: shared x, images share first coordinate; 2: shared y, images share
  /// second coordinate.
  int kind = 0;
  double quotient = 0.0;
};

struct OrderAudit {
  std::int64_t checked_vertical = 0;
  std::int64_t checked_horizontal = 0;
  std::vector<OrderViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Sign conditions on difference quotients along vertical and horizontal
/// lines whose images stay on a vertical (horizontal) line.
inline OrderAudit audit_monotone_order(const TransportPlan& plan, double eq_tol = 1e-12) {
  OrderAudit out;
  const auto n = static_cast<int>(plan.entries.size());
  for (int a = 0; a < n; ++a) {
    const Point z1 = plan.src(plan.entries[a]);
    const Point t1 = plan.dst(plan.entries[a]);
    for (int b = a + 1; b < n; ++b) {
      const Point z2 = plan.src(plan.entries[b]);
      const Point t2 = plan.dst(plan.entries[b]);
      if (std::abs(z1.x - z2.x) <= eq_tol && std::abs(z1.y - z2.y) > eq_tol &&
          std::abs(t1.x - t2.x) <= eq_tol) {
        ++out.checked_vertical;
        const double q = (t1.y - t2.y) / (z1.y - z2.y);
        if (q < 0.0 && std::abs(t1.y - t2.y) > eq_tol) out.violations.push_back({a, b, 1, q});
      }
      if (std::abs(z1.y - z2.y) <= eq_tol && std::abs(z1.x - z2.x) > eq_tol &&
          std::abs(t1.y - t2.y) <= eq_tol) {
        ++out.checked_horizontal;
        const double q = (t1.x - t2.x) / (z1.x - z2.x);
        if (q < 0.0 && std::abs(t1.x - t2.x) > eq_tol) out.violations.push_back({a, b, 2, q});
      }
    }
  }
  return out;
}

/// Builds a plan from explicit entries (for hand-made couplings and tests).
inline TransportPlan make_plan(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                               std::vector<PlanEntry> entries, Stage stage = Stage::Opt1) {
  for (const auto& e : entries) {
    if (!(e.mass > 0.0) || e.i < 0 || e.j < 0 || e.i >= static_cast<int>(mu0.size()) ||
        e.j >= static_cast<int>(mu1.size())) {
      throw std::invalid_argument("make_plan: bad entry");
    }
  }
  return detail::make_plan(mu0, mu1, std::move(entries), stage, 0);
}

}  // namespace cdlab
