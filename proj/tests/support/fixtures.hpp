#pragma once

// Backgrounds, polygons and random admissible pairs shared by the unit and
// acceptance tests.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "polyinc/geometry.hpp"

namespace fixtures {

using namespace polyinc;

/// Omega = (-1, 1)^2 with one interface at y = 0.
inline LayeredBackground two_layers(double g_lo = 1, double g_hi = 2) { return {1.0, {-1, 0, 1}, {g_lo, g_hi}}; }

inline AprioriData apriori(double k = 4) {
  AprioriData a;
  a.k = k;
  a.c0 = 1.5;
  a.N0 = 8;
  a.d0 = 0.4;
  return a;
}

inline Polygon square(double half = 0.3, Vec2 c = {}) {
  return Polygon({{c.x - half, c.y - half}, {c.x + half, c.y - half}, {c.x + half, c.y + half}, {c.x - half, c.y + half}});
}

inline Polygon hexagon(double r = 0.45, Vec2 c = {}) {
  std::vector<Vec2> v;
  for (int i = 0; i < 6; ++i) {
    const double th = kPi / 6 + i * kPi / 3;
    v.push_back({c.x + r * std::cos(th), c.y + r * std::sin(th)});
  }
  return Polygon(std::move(v));
}

/// Random admissible polygon with 4 to 6 vertices around the origin.
inline Polygon random_admissible(std::mt19937_64& rng, const LayeredBackground& bg, const AprioriData& a) {
  std::uniform_real_distribution<double> u(0, 1);
  for (;;) {
    const int n = 4 + static_cast<int>(u(rng) * 3);
    const Vec2 c{0.1 * (2 * u(rng) - 1), 0.1 * (2 * u(rng) - 1)};
    const double r = 0.42 + 0.15 * u(rng);
    const double phase = 2 * kPi * u(rng);
    std::vector<Vec2> v;
    for (int i = 0; i < n; ++i) {
      const double th = phase + 2 * kPi * (i + 0.25 * (2 * u(rng) - 1)) / n;
      const double ri = r * (1 + 0.1 * (2 * u(rng) - 1));
      v.push_back({c.x + ri * std::cos(th), c.y + ri * std::sin(th)});
    }
    Polygon p(std::move(v));
    if (validate_polygon(p, bg, a).ok()) return p;
  }
}

/// Every vertex moved by a uniform random vector of length <= eps; empty if
/// the result is not admissible.
inline std::optional<Polygon> jittered(const Polygon& p, std::mt19937_64& rng, double eps, const LayeredBackground& bg,
                                       const AprioriData& a) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec2> v = p.vertices();
  for (auto& x : v) {
    const double r = eps * std::sqrt(u(rng)), th = 2 * kPi * u(rng);
    x += Vec2{r * std::cos(th), r * std::sin(th)};
  }
  Polygon q(std::move(v));
  if (!validate_polygon(q, bg, a).ok()) return std::nullopt;
  return q;
}

/// Admissible pair (P0, P1) with d_H(P0, P1) <= cap, the second polygon a
/// vertex jitter of the first.
inline std::pair<Polygon, Polygon> random_pair(std::mt19937_64& rng, const LayeredBackground& bg, const AprioriData& a,
                                               double cap) {
  for (;;) {
    const Polygon p0 = random_admissible(rng, bg, a);
    const auto p1 = jittered(p0, rng, cap, bg, a);
    if (p1 && hausdorff_distance(p0, *p1) <= cap && hausdorff_distance(p0, *p1) > 0) return {p0, *p1};
  }
}

/// Square straddling y = 0, top edge pushed right and bottom edge left.
inline Polygon sheared(const Polygon& sq, double s) {
  std::vector<Vec2> v = sq.vertices();
  for (auto& x : v) x.x += x.y > 0 ? s : -s;
  return Polygon(std::move(v));
}

inline Polygon vertex_moved(const Polygon& p, std::size_t j, Vec2 d) {
  std::vector<Vec2> v = p.vertices();
  v[j] += d;
  return Polygon(std::move(v));
}

}  // namespace fixtures
