#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cdlab/geometry.hpp"
#include "cdlab/interpolation.hpp"
#include "cdlab/measure.hpp"
#include "cdlab/random.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

enum class Condition { CD0N, CDstarKN, CDKinf };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::CD0N: return "CD0N";
    case Condition::CDstarKN: return "CDstarKN";
    case Condition::CDKinf: return "CDKinf";
  }
  return "?";
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One evaluated entropy inequality lhs <= rhs (+ tolerance).
struct CDReport {
  Condition condition = Condition::CD0N;
  double K = 0.0;
  double N = kInf;
  double t = 0.5;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double margin = 0.0;
  double resolution = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> notes;
  std::int64_t trial = -1;
  std::string family;
};

namespace detail {
inline CDReport finish(CDReport r) {
  r.margin = r.rhs - r.lhs;
  r.satisfied = r.lhs <= r.rhs + r.tolerance;
  return r;
}
}  // namespace detail

/// Entropy midpoint convexity Ent_N(mu_half) <= (Ent_N(mu0) + Ent_N(mu1)) / 2.
inline CDReport check_cd0N_midpoint(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                    const DiscreteMeasure& mu_half, double n_prime,
                                    double tol = 1e-6) {
  CDReport r;
  r.condition = Condition::CD0N;
  r.N = n_prime;
  r.t = 0.5;
  r.lhs = ent_N(mu_half, n_prime);
  r.rhs = 0.5 * (ent_N(mu0, n_prime) + ent_N(mu1, n_prime));
  r.resolution = mu_half.cell_size();
  r.tolerance = tol;
  if (n_prime < 4.0) r.notes.push_back("N' below 4: outside the dimension range of the local bound");
  return detail::finish(std::move(r));
}

/// Distorted inequality along a plan:
///   Ent_N(mu_t) <= -sum m [sigma^(1-t)(theta) rho0^(-1/N) + sigma^(t)(theta) rho1^(-1/N)]
/// with theta the l-infinity length of each entry. An infinite coefficient
/// makes the right side -inf, so the report is unsatisfied and says so.
inline CDReport check_cdstar(const DiscreteMeasure& mu_t, const TransportPlan& plan, double K,
                             double n_prime, double t, double tol = 1e-6) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("check_cdstar: t outside [0, 1]");
  CDReport r;
  r.condition = Condition::CDstarKN;
  r.K = K;
  r.N = n_prime;
  r.t = t;
  r.lhs = ent_N(mu_t, n_prime);
  r.resolution = mu_t.cell_size();
  r.tolerance = tol;
  CompensatedSum rhs;
  bool infinite = false;
  for (const auto& e : plan.entries) {
    const double theta = linf_dist(plan.src(e), plan.dst(e));
    const double s0 = sigma({1.0 - t, K, n_prime, theta});
    const double s1 = sigma({t, K, n_prime, theta});
    if (std::isinf(s0) || std::isinf(s1)) {
      infinite = true;
      break;
    }
    const double rho0 = plan.source[e.i].density();
    const double rho1 = plan.target[e.j].density();
    rhs.add(e.mass * (s0 * std::pow(rho0, -1.0 / n_prime) + s1 * std::pow(rho1, -1.0 / n_prime)));
  }
  if (infinite) {
    r.rhs = -kInf;
    r.notes.push_back("sigma = +inf on a plan entry (K theta^2 >= N pi^2): right-hand side is -inf");
  } else {
    r.rhs = -rhs.value();
  }
  return detail::finish(std::move(r));
}

/// Ent_inf(mu_t) <= (1-t) Ent_inf(mu0) + t Ent_inf(mu1) - K/2 t (1-t) w2sq.
inline CDReport check_cdinf(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                            const DiscreteMeasure& mu_t, double K, double t, double w2sq,
                            double tol = 1e-6) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("check_cdinf: t outside [0, 1]");
  if (!(w2sq >= 0.0)) throw std::invalid_argument("check_cdinf: w2sq must be >= 0");
  CDReport r;
  r.condition = Condition::CDKinf;
  r.K = K;
  r.N = kInf;
  r.t = t;
  r.lhs = ent_inf(mu_t);
  r.rhs = (1.0 - t) * ent_inf(mu0) + t * ent_inf(mu1) - 0.5 * K * t * (1.0 - t) * w2sq;
  r.resolution = mu_t.cell_size();
  r.tolerance = tol;
  return detail::finish(std::move(r));
}

// ---------------------------------------------------------------------------
// Local experiment on the corner domain.

/// Discretization allowance tol_cd(eps) = base + C * eps, with C per
/// entropy exponent. C is the largest |margin| / eps of calibrate_translation
/// over eps = 1/256, 1/512, 1/1024 (default config), rounded up.
struct Allowance {
  double base = 1e-6;
  double c4 = 2.79;
  double c8 = 4.99;
  double c_inf = 144.0;
  double c_other = 0.448;

  double operator()(double eps, double n_prime) const {
    double c = c_other;
    if (std::isinf(n_prime)) c = c_inf;
    else if (n_prime == 4.0) c = c4;
    else if (n_prime == 8.0) c = c8;
    return base + c * eps;
  }
};

enum class Family { Random, Strips, Identical };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Random: return "random";
    case Family::Strips: return "strips";
    case Family::Identical: return "identical";
  }
  return "?";
}

struct LocalConfig {
  CornerDomain domain = CornerDomain::demo();
  Point ball_center{0.0, 0.0039};
  double ball_radius = 0.004;
  double eps = 1.0 / 512.0;
  std::int64_t trials = 50;
  std::uint64_t seed = 1;
  /// Each eps-cell is represented by subdiv x subdiv transport atoms.
  int subdiv = 4;
  /// Midpoint measures are re-binned at mid_factor * eps.
  double mid_factor = 0.5;
  Spread spread = Spread::Cell;
  std::vector<double> n_primes{4.0, 8.0, kInf};
  /// Every strip_every-th trial (starting at trial 0) uses the
  /// horizontal-strip family; 0 disables it.
  int strip_every = 5;
  /// Force every trial into one family.
  std::optional<Family> family;
  /// When > 0, every trial is repeated on the block average of its measures
  /// at this coarser resolution.
  double companion_eps = 0.0;
  Allowance allowance;
  double face_tol = 1e-9;
  int threads = 1;
};

/// The l-infinity ball is a square; the experiment region is ball ∩ E.
inline ClippedRegion<CornerDomain> ball_region(const LocalConfig& cfg) {
  const double r = cfg.ball_radius;
  return {&cfg.domain,
          {cfg.ball_center.x - r, cfg.ball_center.x + r, cfg.ball_center.y - r, cfg.ball_center.y + r}};
}

struct TrialMeasures {
  DiscreteMeasure mu0;
  DiscreteMeasure mu1;
  Family family = Family::Random;
};

inline Family trial_family(const LocalConfig& cfg, std::int64_t trial) {
  if (cfg.family) return *cfg.family;
  if (cfg.strip_every > 0 && trial % cfg.strip_every == 0) return Family::Strips;
  return Family::Random;
}

namespace detail {

inline std::uint64_t cell_hash(std::int64_t ix, std::int64_t iy) {
  return static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
         (static_cast<std::uint64_t>(iy) + 0x632BE59BD9B4E019ULL);
}

/// Piecewise-constant random density: log-uniform in [1, 1e4] per eps-cell.
inline std::function<double(std::int64_t, std::int64_t)> random_cell_density(std::uint64_t seed) {
  return [seed](std::int64_t ix, std::int64_t iy) {
    Rng rng(derive_seed(seed, cell_hash(ix, iy)));
    return rng.log_uniform(1.0, 1e4);
  };
}

}  // namespace detail

/// Draws the two measures of a trial on ball ∩ E at resolution eps.
inline TrialMeasures make_trial(const LocalConfig& cfg, std::int64_t trial) {
  const auto region = ball_region(cfg);
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
  const Family family = trial_family(cfg, trial);
  const double sub = cfg.eps / cfg.subdiv;
  if (family == Family::Random || family == Family::Identical) {
    auto mu0 = cell_density_measure(region, cfg.eps, cfg.subdiv,
                                    detail::random_cell_density(derive_seed(seed, 0)), "E");
    if (family == Family::Identical) return {mu0, mu0, family};
    auto mu1 = cell_density_measure(region, cfg.eps, cfg.subdiv,
                                    detail::random_cell_density(derive_seed(seed, 1)), "E");
    return {std::move(mu0), std::move(mu1), family};
  }
  // Thin layers along the arc at the left and right ends of the region:
  // mass moves horizontally and the midpoints must be lifted off the arc.
  Rng rng(derive_seed(seed, 2));
  const double x0 = region.x_min();
  const double x1 = region.x_max();
  const double w = (x1 - x0) * rng.uniform(0.25, 0.45);
  const double thick0 = sub * rng.uniform(1.0, 6.0);
  const double thick1 = sub * rng.uniform(1.0, 6.0);
  // Linear tilt of the density along each strip.
  const double tilt0 = rng.uniform(-0.8, 3.0);
  const double tilt1 = rng.uniform(-0.8, 3.0);
  auto strip = [&](double lo, double hi, double thick, double tilt) {
    return [&, lo, hi, thick, tilt](Point p) {
      if (p.x < lo || p.x > hi) return 0.0;
      if (p.y - region.lower(p.x) > thick) return 0.0;
      return 1.0 + tilt * (p.x - lo) / (hi - lo);
    };
  };
  auto mu0 = piecewise_measure(region, sub, strip(x0, x0 + w, thick0, tilt0), "E");
  auto mu1 = piecewise_measure(region, sub, strip(x1 - w, x1, thick1, tilt1), "E");
  return {std::move(mu0), std::move(mu1), family};
}

/// Block average of mu on the coarse grid, re-expanded into subdiv x subdiv
/// atoms per coarse cell so the transport resolution matches.
template <XSimpleRegion R>
DiscreteMeasure coarsen(const DiscreteMeasure& mu, const R& region, double coarse_eps, int subdiv) {
  const auto avg = bin_atoms(mu.atoms(), mu.cell_size(), coarse_eps, region, Spread::Point, "E");
  std::map<detail::CellKey, double> density;
  for (const auto& a : avg.atoms()) density[detail::cell_of(a.point, coarse_eps)] = a.density();
  return cell_density_measure(
      region, coarse_eps, subdiv,
      [&](std::int64_t ix, std::int64_t iy) {
        const auto it = density.find({ix, iy});
        return it == density.end() ? 0.0 : it->second;
      },
      "E");
}

struct TrialOutcome {
  std::vector<CDReport> reports;
  TransportPlan plan;
  DiscreteMeasure mu_half;
};

/// Runs transport, midpoint pushforward and the entropy checks for one pair.
inline TrialOutcome run_pair(const LocalConfig& cfg, const DiscreteMeasure& mu0,
                             const DiscreteMeasure& mu1, double eps, std::int64_t trial,
                             Family family) {
  auto plan = refine_lexicographic(mu0, mu1, cfg.face_tol);
  auto [assignment, mu_half] = pushforward_midpoint(cfg.domain, plan, cfg.mid_factor * eps, cfg.spread);
  TrialOutcome out{{}, std::move(plan), std::move(mu_half)};
  for (double np : cfg.n_primes) {
    const double tol = cfg.allowance(eps, np);
    CDReport r = std::isinf(np)
                     ? check_cdinf(mu0, mu1, out.mu_half, 0.0, 0.5, out.plan.costs.primary, tol)
                     : check_cd0N_midpoint(mu0, mu1, out.mu_half, np, tol);
    r.resolution = eps;
    r.trial = trial;
    r.family = to_string(family);
    if (out.plan.tied_arcs > 0) {
      r.notes.push_back("alternative optimal arcs: " + std::to_string(out.plan.tied_arcs));
    }
    out.reports.push_back(std::move(r));
  }
  return out;
}

/// Calls fn(k) for k in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
inline void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (std::int64_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t k = next.fetch_add(1);
        if (k >= n) return;
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Random and strip-family trials on ball ∩ E. Reports are ordered by
/// trial, then resolution (fine first), then exponent.
inline std::vector<CDReport> local_cd04_experiment(const LocalConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("local_cd04_experiment: trials must be >= 1");
  if (!(cfg.eps > 0.0) || cfg.subdiv < 1) throw std::invalid_argument("local_cd04_experiment: bad resolution");
  if (!cfg.domain.contains(cfg.ball_center)) {
    throw std::invalid_argument("local_cd04_experiment: ball center outside the domain");
  }
  std::vector<std::vector<CDReport>> per_trial(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.threads, [&](std::int64_t k) {
    const auto m = make_trial(cfg, k);
    auto fine = run_pair(cfg, m.mu0, m.mu1, cfg.eps, k, m.family);
    auto& out = per_trial[static_cast<std::size_t>(k)];
    out = std::move(fine.reports);
    if (cfg.companion_eps > 0.0) {
      const auto region = ball_region(cfg);
      const auto c0 = coarsen(m.mu0, region, cfg.companion_eps, cfg.subdiv);
      const auto c1 = coarsen(m.mu1, region, cfg.companion_eps, cfg.subdiv);
      auto coarse = run_pair(cfg, c0, c1, cfg.companion_eps, k, m.family);
      for (auto& r : coarse.reports) out.push_back(std::move(r));
    }
  });
  std::vector<CDReport> all;
  for (auto& v : per_trial) for (auto& r : v) all.push_back(std::move(r));
  return all;
}

/// Exact vertical translation of a uniform rectangle inside E, paired by
/// the translation itself: every entropy is the same, so the midpoint margin
/// isolates the discretization error. Returns |margin| per exponent.
struct CalibrationResult {
  double n_prime = 0.0;
  double margin = 0.0;
};

inline std::vector<CalibrationResult> calibrate_translation(const LocalConfig& cfg, double eps) {
  const CornerDomain& e = cfg.domain;
  // Largest rectangle under the roof and above the arc, lower third for mu0
  // and upper third for mu1.
  const double xa = e.a + 0.1 * (e.b - e.a);
  const double xb = e.b - 0.1 * (e.b - e.a);
  const double ylo = std::max(e.lower(xa), e.lower(xb)) + 0.02 * (e.top() - e.c);
  const double yhi = std::min(e.roof(xa), e.roof(xb));
  const double side = (yhi - ylo) / 3.0;
  const Box q0{xa, xb, ylo, ylo + side};
  const double shift = 1.7 * side;
  const Box q1{xa, xb, ylo + shift, ylo + shift + side};
  const auto mu0 = piecewise_measure(RectRegion{q0}, eps / cfg.subdiv, [](Point) { return 1.0; }, "E");
  const auto mu1 = piecewise_measure(RectRegion{q1}, eps / cfg.subdiv, [](Point) { return 1.0; }, "E");
  auto plan = refine_lexicographic(mu0, mu1, cfg.face_tol);
  auto mu_half = pushforward_midpoint(e, plan, cfg.mid_factor * eps, cfg.spread).second;
  std::vector<CalibrationResult> out;
  for (double np : cfg.n_primes) {
    const CDReport r = std::isinf(np) ? check_cdinf(mu0, mu1, mu_half, 0.0, 0.5, plan.costs.primary)
                                      : check_cd0N_midpoint(mu0, mu1, mu_half, np);
    out.push_back({np, std::abs(r.margin)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Global failure on the neck space.

/// Whether z is a midpoint of some p in a0, q in a1. Mid(p, q) is reached
/// along an axis k with p_k = z_k - s r and q_k = z_k + s r, the other
/// coordinates within r of z; this leaves an interval condition on r.
inline bool midpoint_reachable(Point z, const Box& a0, const Box& a1) {
  auto dist = [](double v, double lo, double hi) { return std::max({lo - v, v - hi, 0.0}); };
  for (int axis = 0; axis < 2; ++axis) {
    const double zk = axis == 0 ? z.x : z.y;
    const double zo = axis == 0 ? z.y : z.x;
    const double p_lo = axis == 0 ? a0.x0 : a0.y0;
    const double p_hi = axis == 0 ? a0.x1 : a0.y1;
    const double q_lo = axis == 0 ? a1.x0 : a1.y0;
    const double q_hi = axis == 0 ? a1.x1 : a1.y1;
    const double po_lo = axis == 0 ? a0.y0 : a0.x0;
    const double po_hi = axis == 0 ? a0.y1 : a0.x1;
    const double qo_lo = axis == 0 ? a1.y0 : a1.x0;
    const double qo_hi = axis == 0 ? a1.y1 : a1.x1;
    const double r_min_other = std::max(dist(zo, po_lo, po_hi), dist(zo, qo_lo, qo_hi));
    for (double s : {1.0, -1.0}) {
      // p_k = zk - s r in [p_lo, p_hi], q_k = zk + s r in [q_lo, q_hi].
      double lo = r_min_other;
      double hi = kInf;
      if (s > 0) {
        lo = std::max({lo, zk - p_hi, q_lo - zk});
        hi = std::min(zk - p_lo, q_hi - zk);
      } else {
        lo = std::max({lo, p_lo - zk, zk - q_hi});
        hi = std::min(p_hi - zk, zk - q_lo);
      }
      if (lo <= hi + kMembershipTol) return true;
    }
  }
  return false;
}

struct ReachEstimate {
  double area = 0.0;
  double error_bound = 0.0;
  std::int64_t inside_cells = 0;
  std::int64_t boundary_cells = 0;
  double grid_step = 0.0;
  Box scan_box;
};

/// Grid estimate of the area of {z in X : z in Mid(p, q), p in A0, q in A1}.
/// A cell counts as inside when its corners and center all pass, as
/// boundary when they disagree; boundary cells contribute half their area to
/// the estimate and half to the error bound.
template <typename Space>
ReachEstimate midpoint_reach_area(const Space& x, const Box& a0, const Box& a1, double grid_step,
                                  const Box& space_box) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("midpoint_reach_area: grid_step must be > 0");
  // Midpoints are within r_max of both sets.
  double r_max = 0.0;
  for (double px : {a0.x0, a0.x1}) for (double py : {a0.y0, a0.y1})
    for (double qx : {a1.x0, a1.x1}) for (double qy : {a1.y0, a1.y1})
      r_max = std::max(r_max, 0.5 * linf_dist({px, py}, {qx, qy}));
  const Box grow0{a0.x0 - r_max, a0.x1 + r_max, a0.y0 - r_max, a0.y1 + r_max};
  const Box grow1{a1.x0 - r_max, a1.x1 + r_max, a1.y0 - r_max, a1.y1 + r_max};
  const Box scan = intersect(intersect(grow0, grow1), space_box);
  ReachEstimate out;
  out.grid_step = grid_step;
  out.scan_box = scan;
  if (scan.empty()) return out;
  const auto nx = static_cast<std::int64_t>(std::ceil(scan.width() / grid_step));
  const auto ny = static_cast<std::int64_t>(std::ceil(scan.height() / grid_step));
  const double gx = nx > 0 ? scan.width() / nx : 0.0;
  const double gy = ny > 0 ? scan.height() / ny : 0.0;
  auto pass = [&](Point z) { return x.contains(z) && midpoint_reachable(z, a0, a1); };
  // Corner samples are shared between neighboring cells.
  std::vector<char> corner(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (std::int64_t i = 0; i <= nx; ++i)
    for (std::int64_t j = 0; j <= ny; ++j)
      corner[static_cast<std::size_t>(i * (ny + 1) + j)] = pass({scan.x0 + i * gx, scan.y0 + j * gy});
  for (std::int64_t i = 0; i < nx; ++i) {
    for (std::int64_t j = 0; j < ny; ++j) {
      const int count = corner[i * (ny + 1) + j] + corner[(i + 1) * (ny + 1) + j] +
                        corner[i * (ny + 1) + j + 1] + corner[(i + 1) * (ny + 1) + j + 1] +
                        pass({scan.x0 + (i + 0.5) * gx, scan.y0 + (j + 0.5) * gy});
      if (count == 5) ++out.inside_cells;
      else if (count > 0) ++out.boundary_cells;
    }
  }
  const double cell = gx * gy;
  out.area = (out.inside_cells + 0.5 * out.boundary_cells) * cell;
  out.error_bound = 0.5 * out.boundary_cells * cell;
  return out;
}

template <typename Space>
ReachEstimate midpoint_reach_area(const Space& x, const Box& a0, const Box& a1, double grid_step) {
  return midpoint_reach_area(x, a0, a1, grid_step, x.bounding_box());
}

struct FailureDemo {
  CDReport report;
  double K = 0.0;
  double l = 0.0;
  double a0_area = 0.0;
  double h = 0.0;
  double block_side = 0.0;
  double neck_length = 0.0;
  double ramp_slope = 0.0;
  Box a0;
  Box a1;
  double bound = 0.0;
  ReachEstimate reach;
  bool certified = false;
  int attempts = 0;
};

struct FailureOptions {
  /// Halve h until the violation is certified.
  bool search = false;
  double ramp_slope = 0.25;
  /// Grid step as a fraction of h.
  double grid_fraction = 1.0 / 32.0;
  double min_h = 1e-6;
};

/// Builds the neck space for (h, l, A0): square blocks of side 2 sqrt(A0),
/// A0 and A1 squares flush against the inner block faces, center distance l.
inline std::optional<NeckSpace> build_neck(double h, double l, double a0_area, double& slope) {
  const double a = std::sqrt(a0_area);
  const double s = 2.0 * a;
  if (!(h > 0.0) || !(h < s)) return std::nullopt;
  for (double sl = slope; sl < 0.5; sl += 0.05) {
    const double ramp = 0.5 * (s - h) / sl;
    const double neck = l - a - 2.0 * ramp;
    const double t = std::tan(0.5 * std::atan(sl));
    // The flat part of the neck must cover every midpoint abscissa.
    if (0.5 * neck - t >= 0.5 * a) {
      try {
        NeckSpace x(s, h, neck, sl);
        slope = sl;
        return x;
      } catch (const std::invalid_argument&) {
        continue;
      }
    }
  }
  return std::nullopt;
}

/// Compares the reachable-midpoint area with exp(K l^2 / 8) area(A0). With
/// opt.search the neck height is halved until the violation is certified.
inline FailureDemo global_failure_demo(double K, double h, double l, double a0_area,
                                       const FailureOptions& opt = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("global_failure_demo: h must be > 0");
  if (!(l > 0.0) || !(a0_area > 0.0)) throw std::invalid_argument("global_failure_demo: need l > 0 and A0 area > 0");
  const double a = std::sqrt(a0_area);
  FailureDemo out;
  out.K = K;
  out.l = l;
  out.a0_area = a0_area;
  out.bound = std::exp(K * l * l / 8.0) * a0_area;
  for (;;) {
    ++out.attempts;
    double slope = opt.ramp_slope;
    const auto x = build_neck(h, l, a0_area, slope);
    if (!x) {
      if (!opt.search) throw std::invalid_argument("global_failure_demo: (h, l, A0) do not define a valid neck space");
      h *= 0.5;
      if (h < opt.min_h) break;
      continue;
    }
    const double bi = x->block_inner();
    out.h = h;
    out.block_side = x->block_side();
    out.neck_length = x->neck_length();
    out.ramp_slope = slope;
    out.a0 = {-bi - a, -bi, -0.5 * a, 0.5 * a};
    out.a1 = {bi, bi + a, -0.5 * a, 0.5 * a};
    out.reach = midpoint_reach_area(*x, out.a0, out.a1, opt.grid_fraction * h);
    out.certified = out.reach.area + 2.0 * out.reach.error_bound < out.bound;
    if (out.certified || !opt.search) break;
    h *= 0.5;
    if (h < opt.min_h) break;
  }
  CDReport& r = out.report;
  r.condition = Condition::CDKinf;
  r.K = K;
  r.N = kInf;
  r.t = 0.5;
  r.resolution = out.reach.grid_step;
  r.tolerance = 0.0;
  // Jensen: Ent_inf(mu_half) >= -log |support| >= -log(reach upper bound).
  r.lhs = -std::log(out.reach.area + out.reach.error_bound);
  r.rhs = -std::log(a0_area) - K * l * l / 8.0;
  r = detail::finish(std::move(r));
  r.notes.push_back("W2^2 = l^2: every optimal pairing moves mass horizontally by l");
  if (out.certified) {
    r.notes.push_back("violation certified: reach area + 2 * grid error < exp(K l^2 / 8) * area(A0)");
  } else {
    r.notes.push_back("no certified violation: increase l or decrease h");
  }
  return out;
}

}  // namespace cdlab
