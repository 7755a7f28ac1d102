#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "polyinc/geometry.hpp"
#include "polyinc/predicates.hpp"

using namespace polyinc;
using fixtures::two_layers;

namespace {

AprioriData small_d0() {
  AprioriData a;
  a.d0 = 0.2;
  a.beta0 = kPi / 4;
  a.k = 4;
  a.c0 = 1;
  return a;
}

// Brute force: sample one boundary at spacing `step`, exact distance to the other.
double sampled_directed(const Polygon& A, const Polygon& B, double step) {
  double d = 0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const Vec2 a = A[i], b = A.vertex(static_cast<long>(i) + 1);
    const int n = static_cast<int>(std::ceil(distance(a, b) / step));
    for (int k = 0; k <= n; ++k) d = std::max(d, distance_to_boundary(B, a + (b - a) * (static_cast<double>(k) / n)));
  }
  return d;
}

// Sutherland-Hodgman clip of a convex polygon against the half plane n . x <= c.
std::vector<Vec2> clip(const std::vector<Vec2>& P, Vec2 n, double c) {
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const Vec2 a = P[i], b = P[(i + 1) % P.size()];
    const double fa = dot(n, a) - c, fb = dot(n, b) - c;
    if (fa <= 0) out.push_back(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) out.push_back(a + (b - a) * (fa / (fa - fb)));
  }
  return out;
}

double shoelace(const std::vector<Vec2>& P) {
  double s = 0;
  for (std::size_t i = 0; i < P.size(); ++i) s += cross(P[i], P[(i + 1) % P.size()]);
  return std::abs(0.5 * s);
}

std::vector<Vec2> clip_by_convex(std::vector<Vec2> P, const Polygon& Q) {
  for (std::size_t i = 0; i < Q.size() && !P.empty(); ++i) {
    const Vec2 n = Q.outward_normal(i);
    P = clip(P, n, dot(n, Q[i]));
  }
  return P;
}

std::vector<Vec2> clip_band(std::vector<Vec2> P, double lo, double hi) {
  P = clip(P, {0, 1}, hi);
  if (P.empty()) return P;
  return clip(P, {0, -1}, -lo);
}

Polygon random_convex(std::mt19937_64& rng, int n, Vec2 c, double r) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> th;
  for (int i = 0; i < n; ++i) th.push_back(2 * kPi * u(rng));
  std::sort(th.begin(), th.end());
  std::vector<Vec2> v;
  for (double t : th) v.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
  return Polygon(std::move(v));
}

}  // namespace

TEST(Predicates, OrientMatchesIntegerArithmeticOnDyadicGrid) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long> coord(-(1L << 26), 1L << 26);
  const double scale = std::ldexp(1.0, -26);
  for (int trial = 0; trial < 20000; ++trial) {
    long ax = coord(rng), ay = coord(rng), bx = coord(rng), by = coord(rng);
    // Nearly collinear third point: on the line through a and b plus a tiny offset.
    const long k = coord(rng) % 8;
    long cx = ax + k * (bx - ax), cy = ay + k * (by - ay);
    if (trial % 3 == 1) cx += 1;
    if (std::abs(cx) > (1L << 29) || std::abs(cy) > (1L << 29)) continue;
    const __int128 det = static_cast<__int128>(bx - ax) * (cy - ay) - static_cast<__int128>(by - ay) * (cx - ax);
    const int expect = det > 0 ? 1 : (det < 0 ? -1 : 0);
    const Vec2 a{ax * scale, ay * scale}, b{bx * scale, by * scale}, c{cx * scale, cy * scale};
    ASSERT_EQ(predicates::orient(a, b, c), expect);
  }
}

TEST(Predicates, IncircleOnCocircularPoints) {
  EXPECT_EQ(predicates::incircle({1, 0}, {0, 1}, {-1, 0}, {0, -1}), 0);
  EXPECT_GT(predicates::incircle({1, 0}, {0, 1}, {-1, 0}, {0, 0}), 0);
  EXPECT_LT(predicates::incircle({1, 0}, {0, 1}, {-1, 0}, {0, -1.0000001}), 0);
}

TEST(Validation, AxisAlignedSquarePassesEveryConstraint) {
  const LayeredBackground bg{1, {-1, 0, 1}, {1, 2}};
  const Polygon p({{-0.3, 0.1}, {0.3, 0.1}, {0.3, 0.7}, {-0.3, 0.7}});
  const auto rep = validate_polygon(p, bg, small_d0());
  EXPECT_TRUE(rep.ok()) << rep.summary();
  EXPECT_NEAR(rep.find("SideTooShort")->measured, 0.6, 1e-15);
  EXPECT_NEAR(rep.find("InterfaceDistance")->measured, 0.1, 1e-15);
  EXPECT_NEAR(rep.find("BoundaryDistance")->measured, 0.3, 1e-15);
  EXPECT_NEAR(rep.find("AngleViolation")->measured, kPi / 2, 1e-15);
  EXPECT_TRUE(rep.find("Lipschitz")->passed);
}

TEST(Validation, ShortSideAndSharpAngleAreReported) {
  const LayeredBackground bg{1, {-1, 0, 1}, {1, 2}};
  const Polygon shortened({{-0.3, 0.1}, {0.3, 0.1}, {0.3, 0.15}, {-0.3, 0.15}});
  const auto r1 = validate_polygon(shortened, bg, small_d0());
  EXPECT_TRUE(r1.violated("SideTooShort"));
  EXPECT_NEAR(r1.find("SideTooShort")->measured, 0.05, 1e-15);

  // Isosceles triangle with apex angle 0.05.
  const double h = 0.5, half = h * std::tan(0.025);
  const Polygon thin({{0, 0.15}, {half, 0.15 + h}, {-half, 0.15 + h}});
  const auto r2 = validate_polygon(thin, bg, small_d0());
  EXPECT_TRUE(r2.violated("AngleViolation"));
  EXPECT_NEAR(r2.find("AngleViolation")->measured, 0.05, 1e-12);
}

TEST(Validation, SelfIntersectionIsAViolationNotAnException) {
  const Polygon bow({{-0.3, 0.2}, {0.3, 0.7}, {0.3, 0.2}, {-0.3, 0.7}});
  ClassAReport rep;
  EXPECT_NO_THROW(rep = validate_polygon(bow, two_layers(), small_d0()));
  EXPECT_TRUE(rep.violated("Simple"));
}

TEST(Validation, VertexNearInterfaceAndBoundary) {
  const auto a = small_d0();
  EXPECT_TRUE(validate_polygon(fixtures::square(0.3, {0, 0.35}), two_layers(), a).violated("InterfaceDistance"));
  EXPECT_TRUE(validate_polygon(fixtures::square(0.3, {0.6, 0.4}), two_layers(), a).violated("BoundaryDistance"));
  AprioriData weak = a;
  weak.k = 2.5;
  weak.c0 = 1;
  EXPECT_TRUE(validate_polygon(fixtures::square(0.3, {0, 0.45}), two_layers(), weak).violated("Contrast"));
}

TEST(Hausdorff, TrivialCases) {
  const Polygon s = fixtures::square(0.5, {0.5, 0.5});
  EXPECT_EQ(hausdorff_distance(s, s), 0.0);
  EXPECT_NEAR(hausdorff_distance(s, s.translated({0.1, 0})), 0.1, 1e-15);
  const Polygon wide({{-0.1, 0}, {1.1, 0}, {1.1, 1}, {-0.1, 1}});
  const double exact = hausdorff_distance(s, wide);
  EXPECT_NEAR(exact, 0.1, 1e-15);
  const double sampled = std::max(sampled_directed(s, wide, 1e-4), sampled_directed(wide, s, 1e-4));
  EXPECT_NEAR(sampled, exact, 1e-4);
}

TEST(Hausdorff, AgreesWithDenseSamplingOnRandomPairs) {
  std::mt19937_64 rng(11);
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  for (int trial = 0; trial < 10; ++trial) {
    const Polygon p = fixtures::random_admissible(rng, bg, a);
    const Polygon q = fixtures::random_admissible(rng, bg, a);
    const double exact = hausdorff_distance(p, q);
    const double sampled = std::max(sampled_directed(p, q, 1e-4), sampled_directed(q, p, 1e-4));
    EXPECT_LE(sampled, exact + 1e-12);
    EXPECT_NEAR(sampled, exact, 1e-4);
  }
}

TEST(Hausdorff, IsASymmetricMetricOnBoundaries) {
  std::mt19937_64 rng(3);
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  for (int trial = 0; trial < 30; ++trial) {
    const Polygon p = fixtures::random_admissible(rng, bg, a);
    const Polygon q = fixtures::random_admissible(rng, bg, a);
    const Polygon r = fixtures::random_admissible(rng, bg, a);
    EXPECT_NEAR(hausdorff_distance(p, q), hausdorff_distance(q, p), 1e-15);
    EXPECT_LE(hausdorff_distance(p, r), hausdorff_distance(p, q) + hausdorff_distance(q, r) + 1e-14);
    // Same vertex set up to a cyclic shift.
    std::vector<Vec2> v = p.vertices();
    std::rotate(v.begin(), v.begin() + 1 + trial % (v.size() - 1), v.end());
    EXPECT_LE(hausdorff_distance(p, Polygon(v)), 1e-15);
    EXPECT_GT(hausdorff_distance(p, q), 0.0);
  }
}

TEST(Area, SymmetricDifferenceTrivialCases) {
  const Polygon s = fixtures::square(0.5, {0.5, 0.5});
  EXPECT_NEAR(symmetric_difference_area(s, s), 0.0, 1e-15);
  EXPECT_NEAR(symmetric_difference_area(s, s.translated({0.1, 0})), 0.2, 1e-14);
  EXPECT_NEAR(symmetric_difference_area(s, s.translated({5, 0})), 2.0, 1e-14);
}

TEST(Area, SymmetricDifferenceAgreesWithMonteCarlo) {
  std::mt19937_64 rng(5);
  const Polygon p = random_convex(rng, 5, {0, 0}, 0.5);
  const Polygon q = random_convex(rng, 5, {0.1, 0.05}, 0.5);
  const double exact = symmetric_difference_area(p, q);
  std::uniform_real_distribution<double> u(-1, 1);
  const long n = 10'000'000;
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    const Vec2 x{u(rng), u(rng)};
    hits += p.contains(x) != q.contains(x);
  }
  const double frac = static_cast<double>(hits) / n;
  const double sigma = 4 * std::sqrt(frac * (1 - frac) / n);
  EXPECT_NEAR(4 * frac, exact, 3 * sigma);
}

TEST(Area, ConductivityDistancesMatchConvexClipping) {
  std::mt19937_64 rng(17);
  const auto bg = LayeredBackground{1, {-1, -0.2, 0.3, 1}, {1, 2, 0.5}};
  const double k = 4;
  for (int trial = 0; trial < 20; ++trial) {
    const Polygon p = random_convex(rng, 6, {0, 0}, 0.6);
    const Polygon q = random_convex(rng, 6, {0.05, 0}, 0.6);
    double l1 = 0, l2 = 0;
    for (int i = 0; i < bg.layers(); ++i) {
      const double lo = bg.omegas[i], hi = bg.omegas[i + 1];
      const double ap = shoelace(clip_band(p.vertices(), lo, hi));
      const double aq = shoelace(clip_band(q.vertices(), lo, hi));
      const double apq = shoelace(clip_band(clip_by_convex(p.vertices(), q), lo, hi));
      const double d = ap + aq - 2 * apq;
      l1 += std::abs(k - bg.gammas[i]) * d;
      l2 += (k - bg.gammas[i]) * (k - bg.gammas[i]) * d;
    }
    const auto cd = conductivity_distances(p, q, bg, k);
    EXPECT_NEAR(cd.l1, l1, 1e-12 * std::max(1.0, l1));
    EXPECT_NEAR(cd.l2_squared, l2, 1e-12 * std::max(1.0, l2));
    // Smallest contrast is |4 - 2| = 2.
    EXPECT_GE(cd.l2_squared, 4 * cd.sym_diff - 1e-12);
  }
}

TEST(Crossings, AxisAlignedSquare) {
  const auto bg = two_layers();
  const auto c = interface_crossings(fixtures::square(0.3), bg);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].point, (Vec2{0.3, 0}));
  EXPECT_EQ(c[1].point, (Vec2{-0.3, 0}));
  EXPECT_TRUE(interface_crossings(fixtures::square(0.2, {0, 0.5}), bg).empty());
}

TEST(Crossings, LieOnTheInterfaceAndInsideTheirSide) {
  std::mt19937_64 rng(23);
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  for (int trial = 0; trial < 50; ++trial) {
    const Polygon p = fixtures::random_admissible(rng, bg, a);
    const auto cr = interface_crossings(p, bg);
    EXPECT_EQ(cr.size() % 2, 0u);
    for (const auto& c : cr) {
      EXPECT_EQ(c.point.y, 0.0);
      const Vec2 s = p[static_cast<std::size_t>(c.side)], e = p.vertex(c.side + 1);
      EXPECT_GT(c.tau, 0.0);
      EXPECT_LT(c.tau, 1.0);
      EXPECT_LE(std::abs(cross(e - s, c.point - s)) / norm(e - s), 1e-12);
    }
  }
}

TEST(Crossings, VertexOnInterfaceThrows) {
  const Polygon p({{-0.3, 0}, {0.3, -0.3}, {0.3, 0.3}});
  try {
    interface_crossings(p, two_layers());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VertexOnInterface);
  }
}

TEST(Matching, TranslationPairsEveryVertexAtTheShift) {
  const auto bg = two_layers();
  auto a = fixtures::apriori();
  a.r0 = 1;
  a.d0 = 0.4;
  ASSERT_GE(a.delta0(), 0.01);
  const Polygon p = fixtures::square(0.3);
  const auto corr = match_vertices(p, p.translated({0.01, 0}), bg, a);
  EXPECT_EQ(corr.vertex_count(), 4u);
  EXPECT_EQ(corr.pairs.size(), 6u);
  for (const auto& mp : corr.pairs) EXPECT_NEAR(distance(mp.p0, mp.p1), 0.01, 1e-15);
  EXPECT_NEAR(corr.normV, std::sqrt(6.0) * 0.01, 1e-15);
}

TEST(Matching, CrossingsAreOrderedAlongTheBoundary) {
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  const Polygon p = fixtures::square(0.3);
  const auto corr = match_vertices(p, fixtures::sheared(p, 0.005), bg, a);
  ASSERT_EQ(corr.pairs.size(), 6u);
  // Vertex 1 (0.3, -0.3), then the crossing on side 1, and so on.
  EXPECT_FALSE(corr.pairs[1].crossing);
  EXPECT_TRUE(corr.pairs[2].crossing);
  EXPECT_EQ(corr.pairs[2].p0, (Vec2{0.3, 0}));
  EXPECT_TRUE(corr.pairs[5].crossing);
  EXPECT_EQ(corr.pairs[5].p0, (Vec2{-0.3, 0}));
  for (const auto& mp : corr.pairs)
    if (mp.crossing) EXPECT_EQ(mp.p1.y, 0.0);
}

TEST(Matching, FarPolygonsAreRejected) {
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  const Polygon p = fixtures::square(0.3);
  try {
    match_vertices(p, p.translated({2 * a.delta0(), 0}), bg, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DistanceTooLarge);
  }
}

TEST(Matching, EqualsExhaustiveMinimumCostBijection) {
  std::mt19937_64 rng(29);
  const auto bg = two_layers();
  const auto a = small_d0();
  for (int trial = 0; trial < 100; ++trial) {
    const Polygon p({{-0.3, 0.15}, {0.3, 0.15}, {0.3, 0.7}, {-0.3, 0.7}});
    const auto q = fixtures::jittered(p, rng, 0.005, bg, a);
    ASSERT_TRUE(q);
    // Shuffle the starting vertex of the second polygon.
    std::vector<Vec2> v = q->vertices();
    std::rotate(v.begin(), v.begin() + trial % 4, v.end());
    const Polygon qs(v);
    const auto corr = match_vertices(p, qs, bg, a);

    double best = 1e300;
    std::size_t best_shift = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      double cost = 0;
      for (std::size_t j = 0; j < 4; ++j) cost += distance(p[j], qs[(j + s) % 4]);
      if (cost < best) {
        best = cost;
        best_shift = s;
      }
    }
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(corr.p1[j], qs[(j + best_shift) % 4]);
    for (const auto& mp : corr.pairs) EXPECT_LE(distance(mp.p0, mp.p1), a.C0() * corr.dH * (1 + 1e-12));
  }
}

TEST(Matching, CrossingCountMismatch) {
  const auto bg = two_layers();
  // Vertex 2 sits on opposite sides of the interface.
  const Polygon p({{-0.3, -0.3}, {0.3, -0.3}, {0.3, 0.003}, {-0.3, 0.3}});
  const Polygon q({{-0.3, -0.3}, {0.3, -0.3}, {0.3, -0.003}, {-0.3, 0.3}});
  try {
    correspond_aligned(p, q, bg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CrossingMismatch);
  }
}

TEST(Matching, HausdorffControlsTheSquareRootOfTheSymmetricDifference) {
  std::mt19937_64 rng(31);
  const auto bg = two_layers();
  const auto a = fixtures::apriori();
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto [p, q] = fixtures::random_pair(rng, bg, a, a.delta0());
    worst = std::max(worst, hausdorff_distance(p, q) / std::sqrt(symmetric_difference_area(p, q)));
  }
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_LT(worst, 10.0);
}

TEST(Interpolation, EndpointsAndMidpoint) {
  const Polygon p = fixtures::square(0.3), q = p.translated({0.02, -0.01});
  EXPECT_EQ(hausdorff_distance(interpolate_polygon(p, q, 0), p), 0.0);
  EXPECT_NEAR(hausdorff_distance(interpolate_polygon(p, q, 1), q), 0.0, 1e-15);
  EXPECT_NEAR(hausdorff_distance(interpolate_polygon(p, q, 0.5), p.translated({0.01, -0.005})), 0.0, 1e-15);
}
