#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "cdlab/interpolation.hpp"
#include "cdlab/random.hpp"

using namespace cdlab;

namespace {

const CornerDomain kE = CornerDomain::demo();

Point random_point_in(const CornerDomain& e, Rng& rng) {
  const Box bb = e.bounding_box();
  for (;;) {
    const Point p{rng.uniform(bb.x0, bb.x1), rng.uniform(bb.y0, bb.y1)};
    if (e.contains(p, 0.0)) return p;
  }
}

// A pair moving strictly more horizontally than vertically, both ends in E.
std::pair<Point, Point> random_h_pair(const CornerDomain& e, Rng& rng) {
  for (;;) {
    const Point p = random_point_in(e, rng);
    const Point q = random_point_in(e, rng);
    if (classify(p, q) == PairClass::H) return {p, q};
  }
}

void expect_midpoint(Point z0, Point z1, Point z, double tol) {
  const double half = 0.5 * linf_dist(z0, z1);
  EXPECT_NEAR(linf_dist(z, z0), half, tol);
  EXPECT_NEAR(linf_dist(z, z1), half, tol);
}

DiscreteMeasure two_atoms(Point p, Point q, double cell) {
  const std::vector<Point> pts{p, q};
  return DiscreteMeasure::uniform_atoms(pts, cell, "E");
}

double w2sq(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return solve_primary(a, b).costs.primary;
}

}  // namespace

TEST(MidpointMap, NonHorizontalPairIsEuclidean) {
  const Midpoint m = midpoint_map(kE, {0, 0}, {0.001, 0.003});
  EXPECT_EQ(m.branch, MidpointBranch::Euclidean);
  EXPECT_DOUBLE_EQ(m.point.x, 0.0005);
  EXPECT_DOUBLE_EQ(m.point.y, 0.0015);
}

TEST(MidpointMap, HorizontalPairIsLifted) {
  const Point z0{-0.004, 0.002};
  const Point z1{0.004, 0.002};
  const Midpoint m = midpoint_map(kE, z0, z1);
  EXPECT_EQ(m.branch, MidpointBranch::Corrected);
  // Direct evaluation in long double.
  const long double s = -0.004L * 0.004L / (1.0L + std::sqrt(1.0L - 0.004L * 0.004L));
  const long double root = 2.0L * std::sqrt(0.002L - s);
  const long double y = s + 0.008L * 0.008L + 0.25L * root * root;
  EXPECT_EQ(m.point.x, 0.0);
  EXPECT_NEAR(m.point.y, static_cast<double>(y), 1e-17);
  EXPECT_NEAR(m.point.y, 0.0020640, 1e-7);
  expect_midpoint(z0, z1, m.point, 1e-12);
  EXPECT_TRUE(kE.contains(m.point));
}

TEST(MidpointMap, EqualPointsAreFixed) {
  const Point z{0.001, 0.003};
  const Midpoint m = midpoint_map(kE, z, z);
  EXPECT_EQ(m.point, z);
  EXPECT_EQ(m.branch, MidpointBranch::Euclidean);
}

TEST(MidpointMap, BelowArcThrows) {
  EXPECT_THROW(midpoint_map(kE, {-0.004, -0.001}, {0.004, 0.002}), std::domain_error);
}

TEST(MidpointMap, RandomHorizontalPairsAreMidpointsInE) {
  Rng rng(101);
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  for (int k = 0; k < 100000; ++k) {
    const auto [z0, z1] = random_h_pair(kE, rng);
    const Point z = midpoint_map(kE, z0, z1).point;
    const double half = 0.5 * linf_dist(z0, z1);
    if (std::abs(linf_dist(z, z0) - half) > 1e-10 || std::abs(linf_dist(z, z1) - half) > 1e-10 ||
        !kE.contains(z)) {
      ++failures;
    }
  }
  EXPECT_EQ(failures, 0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

// Equal-height pairs, and pairs with |dy| <= |dx| / 2, satisfy both
// equalities; the failures above come from steeper H-pairs.
TEST(MidpointMap, EqualHeightAndShallowPairsAreMidpoints) {
  Rng rng(105);
  int checked = 0;
  for (int k = 0; k < 100000; ++k) {
    auto [z0, z1] = random_h_pair(kE, rng);
    if (k % 2 == 0) z1.y = z0.y;
    if (!kE.contains(z1, 0.0) || classify(z0, z1) != PairClass::H) continue;
    if (std::abs(z1.y - z0.y) > 0.5 * std::abs(z1.x - z0.x)) continue;
    const Point z = midpoint_map(kE, z0, z1).point;
    const double half = 0.5 * linf_dist(z0, z1);
    ASSERT_NEAR(linf_dist(z, z0), half, 1e-10);
    ASSERT_NEAR(linf_dist(z, z1), half, 1e-10);
    ASSERT_TRUE(kE.contains(z));
    ++checked;
  }
  EXPECT_GT(checked, 50000);
}

TEST(MidpointMap, DiagonalPairsUseEuclideanBranch) {
  Rng rng(102);
  for (int k = 0; k < 2000; ++k) {
    const Point z0 = random_point_in(kE, rng);
    const double d = rng.uniform(-0.003, 0.003);
    const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const Point z1{z0.x + d, z0.y + s * d};
    if (!kE.contains(z1, 0.0) || classify(z0, z1) != PairClass::D) continue;
    const Midpoint m = midpoint_map(kE, z0, z1);
    EXPECT_EQ(m.branch, MidpointBranch::Euclidean);
    expect_midpoint(z0, z1, m.point, 1e-12);
  }
}

TEST(MidpointMap, CorrectedOrdinateNondecreasingInEndpointHeights) {
  Rng rng(103);
  for (int k = 0; k < 5000; ++k) {
    const auto [z0, z1] = random_h_pair(kE, rng);
    const double y = midpoint_map(kE, z0, z1).point.y;
    const double dy = 1e-6;
    for (int which = 0; which < 2; ++which) {
      Point a = z0;
      Point b = z1;
      (which == 0 ? a : b).y += dy;
      if (!kE.contains(a, 0.0) || !kE.contains(b, 0.0) || classify(a, b) != PairClass::H) continue;
      EXPECT_GE(midpoint_map(kE, a, b).point.y, y - 1e-15);
    }
  }
}

TEST(PushforwardMidpoint, IdentityPlanReturnsSourceCells) {
  const double eps = 1.0 / 1024;
  const auto mu = piecewise_measure(kE, eps, [](Point p) { return 1.0 + 100.0 * p.x; }, "E");
  const auto plan = refine_lexicographic(mu, mu);
  const auto [assignment, half] = pushforward_midpoint(kE, plan, eps);
  ASSERT_EQ(assignment.midpoints.size(), plan.entries.size());
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    EXPECT_EQ(assignment.midpoints[k].point, plan.src(plan.entries[k]));
  }
  const auto rebinned = block_average(mu, eps, kE);
  ASSERT_EQ(half.size(), rebinned.size());
  for (std::size_t i = 0; i < half.size(); ++i) {
    EXPECT_EQ(half[i].point, rebinned[i].point);
    EXPECT_NEAR(half[i].mass, rebinned[i].mass, 1e-15);
  }
  EXPECT_NEAR(half.total_mass(), 1.0, 1e-12);
}

TEST(PushforwardMidpoint, TwoAtomHorizontalPlan) {
  const auto mu0 = two_atoms({-0.004, 0.002}, {-0.004, 0.004}, 1e-4);
  const auto mu1 = two_atoms({0.004, 0.002}, {0.004, 0.004}, 1e-4);
  const auto plan = refine_lexicographic(mu0, mu1);
  const auto [assignment, half] = pushforward_midpoint(kE, plan, 1e-4);
  ASSERT_EQ(assignment.midpoints.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& e = plan.entries[k];
    EXPECT_EQ(plan.src(e).y, plan.dst(e).y);
    EXPECT_EQ(e.mass, 0.5);
    const Midpoint m = midpoint_map(kE, plan.src(e), plan.dst(e));
    EXPECT_EQ(assignment.midpoints[k].point, m.point);
    EXPECT_EQ(assignment.midpoints[k].branch, MidpointBranch::Corrected);
  }
  ASSERT_EQ(half.size(), 2u);
  EXPECT_NEAR(half[0].mass, 0.5, 1e-15);
}

TEST(PushforwardMidpoint, VerticalPlanMatchesEuclideanPushforward) {
  const std::vector<Point> p0{{-0.003, -0.001}, {0.0, 0.0}, {0.002, 0.0005}};
  const std::vector<Point> p1{{-0.003, 0.006}, {0.0, 0.007}, {0.002, 0.0065}};
  const auto mu0 = DiscreteMeasure::uniform_atoms(p0, 1e-4, "E");
  const auto mu1 = DiscreteMeasure::uniform_atoms(p1, 1e-4, "E");
  const auto plan = refine_lexicographic(mu0, mu1);
  const auto [assignment, half] = pushforward_midpoint(kE, plan, 1e-4);
  std::vector<Atom> euclid;
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    const auto& e = plan.entries[k];
    ASSERT_EQ(classify(plan.src(e), plan.dst(e)), PairClass::V);
    const Point z{0.5 * (plan.src(e).x + plan.dst(e).x), 0.5 * (plan.src(e).y + plan.dst(e).y)};
    EXPECT_EQ(assignment.midpoints[k].point, z);
    euclid.push_back({z, e.mass, 0.0});
  }
  EXPECT_EQ(half, bin_atoms(euclid, 1e-4, 1e-4, kE, Spread::Point, "E"));
}

TEST(PushforwardMidpoint, MidpointOutsideDomainThrows) {
  // Endpoints above the roof: the lifted midpoint at x = 0 clears top().
  const auto mu0 = two_atoms({-0.004, 0.00997}, {-0.004, 0.0}, 1e-5);
  const auto mu1 = two_atoms({0.004, 0.00997}, {0.004, 0.0}, 1e-5);
  const auto plan = refine_lexicographic(mu0, mu1);
  EXPECT_GT(midpoint_map(kE, {-0.004, 0.00997}, {0.004, 0.00997}).point.y, kE.top());
  EXPECT_THROW(pushforward_midpoint(kE, plan, 1e-5), std::domain_error);
}

// Opt3 plans between two smooth densities on E, refined three times: the
// mass of near-colliding midpoints from different sources shrinks.
TEST(CollisionFraction, DecreasesUnderRefinement) {
  auto rho0 = [](Point p) { return 1.0 + 150.0 * (p.x + 0.005); };
  auto rho1 = [](Point p) { return 1.0 + 200.0 * (p.y + 0.002); };
  std::vector<double> fractions;
  for (int n : {8, 16, 32}) {
    const double eps = (kE.b - kE.a) / n;
    const auto mu0 = piecewise_measure(kE, eps, rho0, "E");
    const auto mu1 = piecewise_measure(kE, eps, rho1, "E");
    const auto plan = refine_lexicographic(mu0, mu1);
    const auto [assignment, half] = pushforward_midpoint(kE, plan, 0.5 * eps);
    fractions.push_back(collision_fraction(assignment, assignment.collision_tol));
  }
  for (std::size_t k = 1; k < fractions.size(); ++k) EXPECT_LE(fractions[k], fractions[k - 1]);
  EXPECT_LT(fractions.back(), 0.5 * fractions.front() + 1e-12);
}

TEST(CollisionFraction, RejectsBadTolerance) {
  const auto mu = two_atoms({0.0, 0.0}, {0.001, 0.0}, 1e-4);
  const auto [assignment, half] = pushforward_midpoint(kE, refine_lexicographic(mu, mu), 1e-4);
  EXPECT_THROW(collision_fraction(assignment, 0.0), std::invalid_argument);
  EXPECT_EQ(collision_fraction(assignment, 1e-6), 0.0);
}

TEST(DyadicGeodesic, DepthOneIsEndpointsAndMidpoint) {
  const auto mu0 = two_atoms({-0.004, 0.002}, {-0.004, 0.004}, 1e-5);
  const auto mu1 = two_atoms({0.004, 0.002}, {0.004, 0.004}, 1e-5);
  const auto g = dyadic_geodesic(kE, mu0, mu1, 1, 1e-5);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].time, 0.0);
  EXPECT_EQ(g[1].time, 0.5);
  EXPECT_EQ(g[2].time, 1.0);
  EXPECT_EQ(g[0].measure, mu0);
  EXPECT_EQ(g[2].measure, mu1);
  const auto plan = refine_lexicographic(mu0, mu1);
  EXPECT_EQ(g[1].measure, pushforward_midpoint(kE, plan, 1e-5).second);
}

TEST(DyadicGeodesic, IdenticalEndpointsStayPut) {
  const double eps = 1.0 / 512;
  const auto mu = piecewise_measure(kE, eps, [](Point p) { return 2.0 + 300.0 * p.y; }, "E");
  const auto g = dyadic_geodesic(kE, mu, mu, 2, eps);
  ASSERT_EQ(g.size(), 5u);
  const auto rebinned = block_average(mu, eps, kE);
  for (std::size_t k = 1; k + 1 < g.size(); ++k) {
    ASSERT_EQ(g[k].measure.size(), rebinned.size());
    for (std::size_t i = 0; i < rebinned.size(); ++i) {
      EXPECT_EQ(g[k].measure[i].point, rebinned[i].point);
      EXPECT_NEAR(g[k].measure[i].mass, rebinned[i].mass, 1e-14);
    }
  }
}

TEST(DyadicGeodesic, ConstantSpeedOnTwoAtomExample) {
  const auto mu0 = two_atoms({-0.004, 0.002}, {-0.004, 0.004}, 1e-6);
  const auto mu1 = two_atoms({0.004, 0.002}, {0.004, 0.004}, 1e-6);
  const auto g = dyadic_geodesic(kE, mu0, mu1, 2, 1e-6);
  ASSERT_EQ(g.size(), 5u);
  const double total = std::sqrt(w2sq(mu0, mu1));
  for (const auto& s : g) {
    EXPECT_NEAR(s.measure.total_mass(), 1.0, 1e-12);
    if (s.time == 0.0) continue;
    const double w = std::sqrt(w2sq(mu0, s.measure));
    EXPECT_NEAR(w / total, s.time, 0.05 * s.time) << s.time;
  }
}

TEST(DyadicGeodesic, RejectsZeroDepth) {
  const auto mu = two_atoms({0.0, 0.0}, {0.001, 0.0}, 1e-4);
  EXPECT_THROW(dyadic_geodesic(kE, mu, mu, 0, 1e-4), std::invalid_argument);
}

TEST(JacobianInequality, Examples) {
  const auto id = jacobian_inequality_check(1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(id.j_m, 1.0);
  EXPECT_DOUBLE_EQ(id.j_t, 1.0);
  EXPECT_TRUE(id.holds);
  const auto stretch = jacobian_inequality_check(4.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(stretch.j_m, 2.5);
  EXPECT_DOUBLE_EQ(stretch.j_t, 4.0);
  EXPECT_TRUE(stretch.holds);
  const auto flat = jacobian_inequality_check(0.0, 0.0, 2.0);
  EXPECT_NEAR(flat.j_m, (1.0 + std::sqrt(2.0)) / 8.0, 1e-15);
  EXPECT_NEAR(std::pow(flat.j_m, 0.25), 0.7411761, 1e-7);
  EXPECT_EQ(flat.j_t, 0.0);
  EXPECT_TRUE(flat.holds);
}

TEST(JacobianInequality, HoldsOnMillionSamples) {
  Rng rng(104);
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  for (int k = 0; k < 1000000; ++k) {
    const double a = rng.uniform(0.0, 100.0);
    const double b = rng.uniform(0.0, 100.0);
    const double r = rng.log_uniform(1e-3, 1e3);
    if (!jacobian_inequality_check(a, b, r).holds) ++failures;
  }
  EXPECT_EQ(failures, 0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(JacobianInequality, RejectsBadInput) {
  EXPECT_THROW(jacobian_inequality_check(1.0, 1.0, 0.0), std::domain_error);
  EXPECT_THROW(jacobian_inequality_check(1.0, 1.0, -1.0), std::domain_error);
  EXPECT_THROW(jacobian_inequality_check(-1.0, 1.0, 1.0), std::invalid_argument);
}
