// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 iff all
// criteria pass. Optional argument: path to the cdlab CLI for the exit-code
// part of criterion 8.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "cdlab/io.hpp"
#include "cdlab/oracle.hpp"
#include "cdlab/random.hpp"

using namespace cdlab;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// `report` holds only seeded results (no timings) so reruns compare bytewise.
struct Outcome {
  bool pass = false;
  std::string detail;
  json report;
};

std::string cli_path;

Point random_point_in(const CornerDomain& e, Rng& rng) {
  const Box bb = e.bounding_box();
  for (;;) {
    const Point p{rng.uniform(bb.x0, bb.x1), rng.uniform(bb.y0, bb.y1)};
    if (e.contains(p, 0.0)) return p;
  }
}

std::vector<Point> lattice_points(Rng& rng, int n, int span) {
  std::vector<Point> out;
  while (static_cast<int>(out.size()) < n) {
    const Point p{static_cast<double>(rng.below(span)), static_cast<double>(rng.below(span))};
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

oracle::TinyInstance tiny_instance(std::uint64_t seed) {
  Rng rng(seed);
  const int n = 1 + static_cast<int>(rng.below(5));
  auto src = lattice_points(rng, n, 5);
  auto dst = lattice_points(rng, n, 5);
  return oracle::TinyInstance::unit(src, dst);
}

Outcome midpoint_correctness() {
  const CornerDomain e = CornerDomain::demo();
  Rng rng(1001);
  const auto t0 = Clock::now();
  std::int64_t failures = 0, horizontal = 0;
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const Point z0 = random_point_in(e, rng);
    const Point z1 = random_point_in(e, rng);
    const Midpoint m = midpoint_map(e, z0, z1);
    if (m.branch == MidpointBranch::Corrected) ++horizontal;
    const double half = 0.5 * linf_dist(z0, z1);
    const double err = std::max(std::abs(linf_dist(m.point, z0) - half), std::abs(linf_dist(m.point, z1) - half));
    worst = std::max(worst, err);
    if (err > 1e-10 || !e.contains(m.point)) ++failures;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && secs < 10.0;
  o.report = {{"pairs", 100000}, {"horizontal", horizontal}, {"failures", failures}, {"max_error", io::real(worst)}};
  o.detail = std::to_string(failures) + " failures of 100000 (max error " + io::fmt(worst) + "), " +
             std::to_string(secs) + " s";
  return o;
}

Outcome solver_vs_oracle() {
  const auto t0 = Clock::now();
  int mismatches = 0;
  json triples = json::array();
  for (int k = 0; k < 200; ++k) {
    const auto inst = tiny_instance(derive_seed(1002, k));
    const auto ref = oracle::brute_force_lex(inst);
    const auto plan = refine_lexicographic(inst.source_measure(), inst.target_measure());
    const bool ok = std::abs(plan.costs.primary - ref.costs.primary) <= 1e-9 &&
                    std::abs(plan.costs.secondary - ref.costs.secondary) <= 1e-9 &&
                    std::abs(plan.costs.tertiary - ref.costs.tertiary) <= 1e-9;
    if (!ok) ++mismatches;
    triples.push_back({io::fmt(plan.costs.primary), io::fmt(plan.costs.secondary), io::fmt(plan.costs.tertiary)});
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < 30.0;
  o.report = {{"instances", 200}, {"mismatches", mismatches}, {"triples", triples}};
  o.detail = std::to_string(mismatches) + " mismatches of 200, " + std::to_string(secs) + " s";
  return o;
}

// Smooth pair used by the map-structure trend.
const RectRegion kQ0{{0.0, 1.0, 0.0, 1.0}};
const RectRegion kQ1{{0.25, 1.25, 0.1, 1.1}};
double rho0(Point p) { return 1.0 + 0.5 * std::sin(std::numbers::pi * p.x) * std::cos(std::numbers::pi * p.y); }
double rho1(Point p) { return 1.0 + 0.3 * p.x * p.y; }

Outcome cyclical_monotonicity() {
  // Sweep: the tiny oracle instances, weighted random measures, the local
  // experiment trials and the smooth pair at the two coarser resolutions.
  std::vector<TransportPlan> plans;
  for (int k = 0; k < 200; ++k) {
    const auto inst = tiny_instance(derive_seed(1002, k));
    plans.push_back(refine_lexicographic(inst.source_measure(), inst.target_measure()));
  }
  Rng rng(1003);
  for (int k = 0; k < 30; ++k) {
    auto random_measure = [&] {
      std::vector<Atom> atoms;
      for (const Point p : lattice_points(rng, 12, 16)) atoms.push_back({{p.x / 16, p.y / 16}, rng.uniform(0.1, 1.0), 0.0});
      return DiscreteMeasure::normalized(std::move(atoms), 1.0 / 16);
    };
    const auto a = random_measure();
    const auto b = random_measure();
    plans.push_back(refine_lexicographic(a, b));
  }
  LocalConfig cfg;
  for (std::int64_t k = 0; k < cfg.trials; ++k) {
    const auto m = make_trial(cfg, k);
    plans.push_back(refine_lexicographic(m.mu0, m.mu1, cfg.face_tol));
  }
  const auto mu1 = piecewise_measure(kQ1, 1.0 / 8, rho1);
  for (int n : {32, 64}) plans.push_back(refine_lexicographic(piecewise_measure(kQ0, 1.0 / n, rho0), mu1));

  double worst = 0.0;
  std::int64_t checked = 0;
  for (const auto& p : plans) {
    if (p.stage != Stage::Opt3) return {false, "plan not at stage Opt3", {}};
    const auto audit = audit_cyclical(p);
    worst = std::max(worst, audit.max_violation());
    checked += audit.comcyc.checked + audit.vercyc.checked + audit.horcyc.checked;
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.report = {{"plans", plans.size()}, {"pair_checks", checked}, {"max_violation", io::real(worst)}};
  o.detail = std::to_string(plans.size()) + " plans, max violation " + io::fmt(worst);
  return o;
}

Outcome jacobian() {
  Rng rng(1004);
  const auto t0 = Clock::now();
  int failures = 0;
  for (int k = 0; k < 1000000; ++k) {
    const double a = rng.uniform(0.0, 100.0);
    const double b = rng.uniform(0.0, 100.0);
    const double r = rng.log_uniform(1e-3, 1e3);
    if (!jacobian_inequality_check(a, b, r).holds) ++failures;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && secs < 5.0;
  o.report = {{"samples", 1000000}, {"failures", failures}};
  o.detail = std::to_string(failures) + " failures of 1000000, " + std::to_string(secs) + " s";
  return o;
}

Outcome local_cd04() {
  LocalConfig cfg;
  cfg.companion_eps = 1.0 / 256;
  const auto t0 = Clock::now();
  const auto reports = local_cd04_experiment(cfg);
  const double secs = seconds_since(t0);
  std::map<std::int64_t, const CDReport*> fine, coarse;
  int strips = 0;
  for (const auto& r : reports) {
    if (r.N != 4.0) continue;
    (r.resolution == cfg.eps ? fine : coarse)[r.trial] = &r;
    if (r.resolution == cfg.eps && r.family == "strips") ++strips;
  }
  int unsatisfied = 0, violations = 0, not_shrinking = 0;
  json margins = json::array();
  for (const auto& [trial, r] : fine) {
    if (!r->satisfied) ++unsatisfied;
    if (r->margin < 0.0) {
      ++violations;
      if (2.0 * std::abs(r->margin) > std::abs(coarse.at(trial)->margin)) ++not_shrinking;
    }
    margins.push_back(io::fmt(r->margin));
  }
  Outcome o;
  o.pass = fine.size() == 50 && strips > 0 && unsatisfied == 0 && not_shrinking == 0 && secs < 600.0;
  o.report = {{"trials", fine.size()}, {"strip_trials", strips}, {"unsatisfied", unsatisfied},
              {"nominal_violations", violations}, {"not_shrinking", not_shrinking}, {"margins", margins}};
  o.detail = std::to_string(fine.size()) + " trials (" + std::to_string(strips) + " strips), " +
             std::to_string(unsatisfied) + " unsatisfied, " + std::to_string(violations) +
             " nominal violations, " + std::to_string(not_shrinking) + " not shrinking 2x, " +
             std::to_string(secs) + " s";
  return o;
}

Outcome sigma_checks() {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  Rng rng(1006);
  int zero_bad = 0, inf_bad = 0;
  double cont = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double t = rng.uniform();
    if (sigma({t, 0.0, rng.uniform(1.0, 10.0), rng.uniform(0.0, 5.0)}) != t) ++zero_bad;
    const DistortionInput in{rng.uniform(), rng.uniform(-20.0, 40.0), rng.uniform(1.0, 4.0), rng.uniform(0.0, 3.0)};
    if (std::isinf(sigma(in)) != (in.K * in.theta * in.theta >= in.N * pi2)) ++inf_bad;
  }
  // Exactly at the threshold, and one ulp-scale step below it.
  if (!std::isinf(sigma({0.5, 2.0 * pi2, 2.0, 1.0}))) ++inf_bad;
  if (std::isinf(sigma({0.5, 2.0 * pi2 * (1.0 - 1e-12), 2.0, 1.0}))) ++inf_bad;
  for (double t : {0.1, 0.5, 0.9}) {
    for (double n : {1.0, 4.0}) {
      for (double theta : {0.5, 1.0, 2.0}) {
        for (double k : {1e-9, -1e-9}) cont = std::max(cont, std::abs(sigma({t, k, n, theta}) - t));
      }
    }
  }
  Outcome o;
  o.pass = zero_bad == 0 && inf_bad == 0 && cont <= 1e-6;
  o.report = {{"zero_branch_mismatches", zero_bad}, {"inf_branch_mismatches", inf_bad},
              {"continuity_gap", io::real(cont)}};
  o.detail = "K=0 mismatches " + std::to_string(zero_bad) + ", +inf mismatches " + std::to_string(inf_bad) +
             ", continuity gap " + io::fmt(cont);
  return o;
}

Outcome entropy_identities() {
  Rng rng(1007);
  double worst_rel = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double w = rng.uniform(0.1, 3.0);
    const double h = rng.uniform(0.1, 3.0);
    const auto mu = piecewise_measure(RectRegion{{0.0, w, 0.0, h}}, 0.05, [](Point) { return 1.0; });
    for (double np : {2.0, 4.0, 8.0}) {
      const double expected = -std::pow(w * h, 1.0 / np);
      worst_rel = std::max(worst_rel, std::abs(ent_N(mu, np) - expected) / std::abs(expected));
    }
    const double e_inf = -std::log(w * h);
    worst_rel = std::max(worst_rel, std::abs(ent_inf(mu) - e_inf) / std::max(1.0, std::abs(e_inf)));
  }
  const RectRegion unit{{0.0, 1.0, 0.0, 1.0}};
  int increases = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto fine = piecewise_measure(unit, 1.0 / 8, [&](Point) { return rng.log_uniform(1.0, 100.0); });
    for (double eps : {0.25, 0.5}) {
      const auto coarse = block_average(fine, eps, unit);
      for (double np : {2.0, 4.0, 8.0}) increases += ent_N(coarse, np) > ent_N(fine, np) + 1e-12;
      increases += ent_inf(coarse) > ent_inf(fine) + 1e-12;
    }
  }
  Outcome o;
  o.pass = worst_rel <= 1e-12 && increases == 0;
  o.report = {{"uniform_max_rel_error", io::real(worst_rel)}, {"measures", 1000}, {"increases", increases}};
  o.detail = "uniform max rel error " + io::fmt(worst_rel) + ", " + std::to_string(increases) +
             " increases over 1000 measures";
  return o;
}

Outcome global_failure() {
  const auto t0 = Clock::now();
  bool all = true;
  json runs = json::array();
  std::string detail;
  for (double K : {-1.0, 0.5, 1.0, 4.0}) {
    const auto demo = global_failure_demo(K, 0.01, 2.0, 0.01, {.search = true});
    const bool strict = demo.reach.area + demo.reach.error_bound < demo.bound;
    all = all && demo.certified && strict;
    runs.push_back(io::to_json(demo));
    detail += "K=" + io::fmt(K) + " area+err " + io::fmt(demo.reach.area + demo.reach.error_bound) + " < " +
              io::fmt(demo.bound) + (strict ? "" : " (no)") + "; ";
    if (!cli_path.empty()) {
      const std::string cmd = "\"" + cli_path + "\" failure-demo --K " + io::fmt(K) + " > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      const bool ok = status == 0;
      all = all && ok;
      if (!ok) detail += "cli exit " + std::to_string(status) + "; ";
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = all && secs < 300.0;
  o.report = runs;
  o.detail = detail + (cli_path.empty() ? "cli not run, " : "cli exit 0 x4, ") + std::to_string(secs) + " s";
  return o;
}

Outcome map_structure() {
  const auto mu1 = piecewise_measure(kQ1, 1.0 / 8, rho1);
  std::vector<double> fractions;
  for (int n : {32, 64, 128}) {
    const auto plan = refine_lexicographic(piecewise_measure(kQ0, 1.0 / n, rho0), mu1);
    fractions.push_back(audit_map_structure(plan));
  }
  Outcome o;
  o.pass = fractions[1] <= fractions[0] && fractions[2] <= fractions[1] && fractions[2] < 0.05;
  o.report = {{"eps", {"1/32", "1/64", "1/128"}}, {"split_fraction", fractions}};
  o.detail = "split fractions " + io::fmt(fractions[0]) + ", " + io::fmt(fractions[1]) + ", " + io::fmt(fractions[2]);
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria{
    {"midpoint correctness", midpoint_correctness},
    {"lexicographic solver vs oracle", solver_vs_oracle},
    {"cyclical monotonicity audits", cyclical_monotonicity},
    {"midpoint Jacobian inequality", jacobian},
    {"local CD(0,4)", local_cd04},
    {"distortion coefficient", sigma_checks},
    {"entropy identities", entropy_identities},
    {"global CD(K,inf) failure", global_failure},
    {"map-structure trend", map_structure},
};

void print(int index, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", index, name, detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli_path = argv[1];
  bool all = true;
  std::vector<std::string> first;
  for (std::size_t k = 0; k < kCriteria.size(); ++k) {
    Outcome o;
    try {
      o = kCriteria[k].run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what(), {}};
    }
    print(static_cast<int>(k + 1), kCriteria[k].name, o.pass, o.detail);
    all = all && o.pass;
    first.push_back(o.report.dump());
  }

  int differing = 0;
  for (std::size_t k = 0; k < kCriteria.size(); ++k) {
    std::string again;
    try {
      again = kCriteria[k].run().report.dump();
    } catch (const std::exception& ex) {
      again = ex.what();
    }
    if (again != first[k]) ++differing;
  }
  const bool det = differing == 0;
  print(10, "determinism", det,
        std::to_string(differing) + " of " + std::to_string(kCriteria.size()) + " reports differ on rerun");
  all = all && det;
  return all ? 0 : 1;
}
