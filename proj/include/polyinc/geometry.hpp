#pragma once

// Layered backgrounds, admissible polygons and the purely geometric
// quantities built on them: Hausdorff distance of boundaries, exact
// (layer-weighted) areas of intersections and symmetric differences,
// interface crossings and vertex correspondences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyinc/core.hpp"
#include "polyinc/predicates.hpp"

namespace polyinc {

/// The constant pack that parameterizes the admissible class and the background.
struct AprioriData {
  int N0 = 6;
  double d0 = 0.4;
  double r0 = 0.1;
  double K0 = 1.0;
  double L = 1.0;
  double beta0 = kPi / 4;
  double c0 = 1.0;
  double k = 4.0;
  int m = 2;

  void validate() const {
    auto fail = [](const std::string& w) { throw Error(ErrorCode::InvalidInput, w); };
    if (!(d0 > 0) || !(r0 > 0) || !(K0 > 0) || !(L > 0)) fail("a priori lengths must be positive");
    if (!(beta0 > 0) || beta0 > kPi / 2 + 1e-15) fail("beta0 must lie in (0, pi/2]");
    if (!(c0 > 0)) fail("c0 must be positive");
    if (!(k > 0)) fail("k must be positive");
    if (N0 < 3) fail("N0 must be at least 3");
    if (m < 1) fail("m must be at least 1");
    if (!(d0 < L)) fail("d0 must be smaller than L");
  }

  /// Vertex-matching radius: min{K0 r0, d0 sin(beta0)/16}.
  double delta0() const { return std::min(K0 * r0, d0 * std::sin(beta0) / 16.0); }
  /// Matching constant sqrt(1 + 16/sin^2(beta0)).
  double C0() const {
    const double s = std::sin(beta0);
    return std::sqrt(1.0 + 16.0 / (s * s));
  }
};

/// Horizontal layers omega_0 = -L < ... < omega_m = L with conductivities gamma_1..gamma_m.
struct LayeredBackground {
  double L = 1.0;
  std::vector<double> omegas;
  std::vector<double> gammas;

  static LayeredBackground homogeneous(double L, double gamma) { return {L, {-L, L}, {gamma}}; }

  int layers() const { return static_cast<int>(gammas.size()); }
  /// Heights of the interior interfaces Sigma_1..Sigma_{m-1}.
  std::vector<double> interfaces() const {
    if (omegas.size() < 2) return {};
    return {omegas.begin() + 1, omegas.end() - 1};
  }

  /// Zero-based layer index containing height y (clamped to the outer layers).
  int layer_of(double y) const {
    int i = 0;
    while (i + 1 < layers() && y >= omegas[i + 1]) ++i;
    return i;
  }
  double gamma_at(double y) const { return gammas[layer_of(y)]; }

  void validate() const {
    auto fail = [](const std::string& w) { throw Error(ErrorCode::InvalidInput, w); };
    if (!(L > 0)) fail("L must be positive");
    if (gammas.empty()) fail("gammas must be nonempty");
    if (omegas.size() != gammas.size() + 1) fail("omegas must have one more entry than gammas");
    if (std::abs(omegas.front() + L) > 1e-14 || std::abs(omegas.back() - L) > 1e-14)
      fail("omegas must start at -L and end at L");
    for (std::size_t i = 0; i + 1 < omegas.size(); ++i)
      if (!(omegas[i] < omegas[i + 1])) fail("omegas must be strictly increasing");
    for (double g : gammas)
      if (!(g > 0)) fail("gammas must be positive");
  }
};

/// Simple polygon, stored counter-clockwise.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices) : v_(std::move(vertices)) {
    for (const auto& p : v_)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw Error(ErrorCode::InvalidInput, "polygon vertex is not finite");
    if (v_.size() >= 3 && signed_area() < 0) std::reverse(v_.begin(), v_.end());
  }

  const std::vector<Vec2>& vertices() const { return v_; }
  std::size_t size() const { return v_.size(); }
  const Vec2& operator[](std::size_t i) const { return v_[i]; }
  Vec2 vertex(long i) const {
    const long n = static_cast<long>(v_.size());
    return v_[static_cast<std::size_t>(((i % n) + n) % n)];
  }

  double signed_area() const {
    double a = 0;
    for (std::size_t i = 0; i < v_.size(); ++i) a += cross(v_[i], v_[(i + 1) % v_.size()]);
    return 0.5 * a;
  }
  double area() const { return std::abs(signed_area()); }
  double perimeter() const {
    double p = 0;
    for (std::size_t i = 0; i < v_.size(); ++i) p += distance(v_[i], v_[(i + 1) % v_.size()]);
    return p;
  }

  /// Interior angle at vertex i, in (0, 2 pi).
  double interior_angle(std::size_t i) const {
    const Vec2 v = v_[i];
    const Vec2 a = vertex(static_cast<long>(i) - 1) - v;
    const Vec2 b = vertex(static_cast<long>(i) + 1) - v;
    double ang = std::atan2(cross(b, a), dot(b, a));
    if (ang < 0) ang += 2 * kPi;
    return ang;
  }

  /// Outward unit normal of side i (from vertex i to vertex i+1).
  Vec2 outward_normal(std::size_t i) const {
    const Vec2 e = vertex(static_cast<long>(i) + 1) - v_[i];
    return Vec2{e.y, -e.x} / norm(e);
  }

  /// Winding-number containment; points on the boundary count as inside.
  bool contains(Vec2 p) const {
    int wn = 0;
    const std::size_t n = v_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = v_[i], b = v_[(i + 1) % n];
      const int o = predicates::orient(a, b, p);
      if (o == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
          std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y))
        return true;
      if (a.y <= p.y) {
        if (b.y > p.y && o > 0) ++wn;
      } else if (b.y <= p.y && o < 0) {
        --wn;
      }
    }
    return wn != 0;
  }

  Polygon translated(Vec2 d) const {
    auto w = v_;
    for (auto& p : w) p += d;
    return Polygon(std::move(w));
  }

 private:
  std::vector<Vec2> v_;
};

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double l2 = norm2(e);
  if (l2 == 0) return distance(p, a);
  const double s = std::clamp(dot(p - a, e) / l2, 0.0, 1.0);
  return distance(p, a + e * s);
}

inline double distance_to_boundary(const Polygon& poly, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i)
    d = std::min(d, point_segment_distance(p, poly[i], poly.vertex(static_cast<long>(i) + 1)));
  return d;
}

// ---------------------------------------------------------------------------
// Class-A validation

struct ConstraintCheck {
  std::string name;
  bool passed = true;
  double measured = 0;
  double bound = 0;
  std::string detail;
};

struct ClassAReport {
  std::vector<ConstraintCheck> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const ConstraintCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  bool violated(const std::string& name) const {
    const auto* c = find(name);
    return c != nullptr && !c->passed;
  }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks)
      if (!c.passed) os << c.name << " (measured " << c.measured << ", bound " << c.bound << ") ";
    return os.str();
  }
};

inline bool polygon_is_simple(const Polygon& p) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (p[i] == p.vertex(static_cast<long>(i) + 1)) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = p[i], b = p.vertex(static_cast<long>(i) + 1);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 c = p[j], d = p.vertex(static_cast<long>(j) + 1);
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Adjacent sides share exactly one vertex; a fold-back means overlap.
        const Vec2 shared = (j == i + 1) ? b : a;
        const Vec2 other1 = (j == i + 1) ? a : b;
        const Vec2 other2 = (j == i + 1) ? d : c;
        if (predicates::orient(other1, shared, other2) == 0 &&
            dot(other1 - shared, other2 - shared) > 0)
          return false;
        continue;
      }
      if (predicates::segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

/// Checks every admissibility constraint and reports the measured quantity of each.
inline ClassAReport validate_polygon(const Polygon& p, const LayeredBackground& bg, const AprioriData& a) {
  ClassAReport rep;
  const std::size_t n = p.size();
  if (n < 3) throw Error(ErrorCode::InvalidInput, "polygon needs at least 3 vertices");

  const bool simple = polygon_is_simple(p);
  rep.checks.push_back({"Simple", simple, simple ? 1.0 : 0.0, 1.0, simple ? "" : "sides self-intersect"});
  rep.checks.push_back({"SideCount", static_cast<int>(n) <= a.N0, static_cast<double>(n),
                        static_cast<double>(a.N0), ""});

  double min_side = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) min_side = std::min(min_side, distance(p[i], p.vertex(static_cast<long>(i) + 1)));
  const bool sides_ok = min_side >= a.d0 * (1 - 1e-12);
  rep.checks.push_back({"SideTooShort", sides_ok, min_side, a.d0, ""});

  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_angle = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double beta = p.interior_angle(i);
    const double margin = std::min({beta - a.beta0, 2 * kPi - a.beta0 - beta, std::abs(beta - kPi) - a.beta0});
    if (margin < worst_margin) {
      worst_margin = margin;
      worst_angle = beta;
    }
  }
  const bool angles_ok = worst_margin >= -1e-12;
  rep.checks.push_back({"AngleViolation", angles_ok, worst_angle, a.beta0, ""});

  // (lip) follows from the side and angle constraints for simple polygons.
  const bool lip = simple && sides_ok && angles_ok;
  rep.checks.push_back({"Lipschitz", lip, a.K0 * a.r0, a.delta0(), "derived from side and angle constraints"});

  double gap = std::numeric_limits<double>::infinity();
  for (const auto& v : p.vertices()) gap = std::min({gap, bg.L - std::abs(v.x), bg.L - std::abs(v.y)});
  rep.checks.push_back({"BoundaryDistance", gap >= a.d0 * (1 - 1e-12), gap, a.d0, ""});

  double iface = std::numeric_limits<double>::infinity();
  for (double w : bg.interfaces())
    for (const auto& v : p.vertices()) iface = std::min(iface, std::abs(v.y - w));
  const double iface_measured = std::isfinite(iface) ? iface : bg.L;
  rep.checks.push_back({"InterfaceDistance", iface_measured >= 0.5 * a.d0 * (1 - 1e-12), iface_measured, 0.5 * a.d0, ""});

  double min_layer = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < bg.omegas.size(); ++i) min_layer = std::min(min_layer, bg.omegas[i + 1] - bg.omegas[i]);
  rep.checks.push_back({"LayerSpacing", min_layer >= a.d0 * (1 - 1e-12), min_layer, a.d0, ""});

  double contrast = std::numeric_limits<double>::infinity();
  for (double g : bg.gammas) contrast = std::min(contrast, std::abs(a.k - g));
  rep.checks.push_back({"Contrast", contrast >= a.c0 * (1 - 1e-12), contrast, a.c0, ""});
  return rep;
}

// ---------------------------------------------------------------------------
// Hausdorff distance of polygon boundaries

namespace detail {

// Squared distance from x(tau) = p + tau (q - p) to segment [a, b], as a
// piecewise quadratic in tau.
struct DistPiece {
  double lo, hi;     // tau interval
  double c0, c1, c2; // c0 + c1 tau + c2 tau^2
};

inline std::vector<DistPiece> distance_pieces(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 d = q - p, e = b - a;
  const double ee = norm2(e);
  auto quad_point = [&](Vec2 c) {
    const Vec2 w = p - c;
    return DistPiece{0, 1, norm2(w), 2 * dot(w, d), norm2(d)};
  };
  // sigma(tau) = s0 + s1 tau, projection parameter onto [a, b].
  const double s0 = dot(p - a, e) / ee, s1 = dot(d, e) / ee;
  const double k0 = cross(e, p - a), k1 = cross(e, d);
  DistPiece perp_piece{0, 1, k0 * k0 / ee, 2 * k0 * k1 / ee, k1 * k1 / ee};
  DistPiece pa = quad_point(a), pb = quad_point(b);

  std::vector<double> cuts{0.0, 1.0};
  if (s1 != 0) {
    for (double s : {0.0, 1.0}) {
      const double t = (s - s0) / s1;
      if (t > 0 && t < 1) cuts.push_back(t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<DistPiece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (hi <= lo) continue;
    const double sm = s0 + s1 * 0.5 * (lo + hi);
    DistPiece piece = sm <= 0 ? pa : (sm >= 1 ? pb : perp_piece);
    piece.lo = lo;
    piece.hi = hi;
    out.push_back(piece);
  }
  return out;
}

inline double directed_hausdorff(const Polygon& A, const Polygon& B) {
  double best = 0;
  const std::size_t na = A.size(), nb = B.size();
  for (std::size_t i = 0; i < na; ++i) {
    const Vec2 p = A[i], q = A.vertex(static_cast<long>(i) + 1);
    std::vector<DistPiece> pieces;
    for (std::size_t j = 0; j < nb; ++j) {
      auto pc = distance_pieces(p, q, B[j], B.vertex(static_cast<long>(j) + 1));
      pieces.insert(pieces.end(), pc.begin(), pc.end());
    }
    std::vector<double> cand{0.0, 1.0};
    for (const auto& pc : pieces) {
      cand.push_back(pc.lo);
      cand.push_back(pc.hi);
    }
    for (std::size_t u = 0; u < pieces.size(); ++u) {
      for (std::size_t v = u + 1; v < pieces.size(); ++v) {
        const double lo = std::max(pieces[u].lo, pieces[v].lo), hi = std::min(pieces[u].hi, pieces[v].hi);
        if (hi < lo) continue;
        const double c0 = pieces[u].c0 - pieces[v].c0, c1 = pieces[u].c1 - pieces[v].c1,
                     c2 = pieces[u].c2 - pieces[v].c2;
        const double scale = std::abs(c0) + std::abs(c1) + std::abs(c2);
        if (scale == 0) continue;
        if (std::abs(c2) <= 1e-14 * scale) {
          if (c1 != 0) {
            const double t = -c0 / c1;
            if (t >= lo && t <= hi) cand.push_back(t);
          }
          continue;
        }
        const double disc = c1 * c1 - 4 * c2 * c0;
        if (disc < 0) continue;
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (c1 + std::copysign(sq, c1));
        for (double t : {qq / c2, qq != 0 ? c0 / qq : lo}) {
          if (t >= lo && t <= hi) cand.push_back(t);
        }
      }
    }
    for (double t : cand) {
      const Vec2 x = p + (q - p) * t;
      best = std::max(best, distance_to_boundary(B, x));
    }
  }
  return best;
}

}  // namespace detail

/// Exact Hausdorff distance between the boundaries of two polygons.
inline double hausdorff_distance(const Polygon& p0, const Polygon& p1) {
  return std::max(detail::directed_hausdorff(p0, p1), detail::directed_hausdorff(p1, p0));
}

// ---------------------------------------------------------------------------
// Exact areas. Integrals of a layer-wise constant weight over polygonal
// regions are evaluated as boundary integrals of -W(y) dx, W' = weight.

/// Antiderivative in y of a piecewise constant (layered) weight.
class LayerPotential {
 public:
  LayerPotential(std::vector<double> breaks, std::vector<double> weights)
      : breaks_(std::move(breaks)), weights_(std::move(weights)) {}

  static LayerPotential uniform(double w = 1.0) { return LayerPotential({}, {w}); }

  /// Weight w_i on layer i of bg.
  static LayerPotential layered(const LayeredBackground& bg, std::vector<double> w) {
    return LayerPotential(bg.interfaces(), std::move(w));
  }

  /// Integral of -W(y) dx along the directed segment p -> q.
  double segment_integral(Vec2 p, Vec2 q) const {
    std::vector<double> ts{0.0, 1.0};
    const double dy = q.y - p.y;
    if (dy != 0)
      for (double b : breaks_) {
        const double t = (b - p.y) / dy;
        if (t > 0 && t < 1) ts.push_back(t);
      }
    std::sort(ts.begin(), ts.end());
    double acc = 0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      const Vec2 a = p + (q - p) * ts[i], b = p + (q - p) * ts[i + 1];
      acc += -(b.x - a.x) * 0.5 * (potential(a.y) + potential(b.y));
    }
    return acc;
  }

  double potential(double y) const {
    // W(y) = integral_0^y w; breaks sorted.
    double acc = 0;
    auto weight_on = [&](double s) {
      std::size_t i = 0;
      while (i < breaks_.size() && s >= breaks_[i]) ++i;
      return weights_[i];
    };
    std::vector<double> pts{0.0};
    for (double b : breaks_)
      if ((b > 0 && b < y) || (b < 0 && b > y)) pts.push_back(b);
    pts.push_back(y);
    std::sort(pts.begin(), pts.end());
    if (y < 0) std::reverse(pts.begin(), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double a = pts[i], b = pts[i + 1];
      acc += (b - a) * weight_on(0.5 * (a + b));
    }
    return acc;
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> weights_;
};

inline double weighted_area(const Polygon& p, const LayerPotential& w) {
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += w.segment_integral(p[i], p.vertex(static_cast<long>(i) + 1));
  return acc;
}

namespace detail {

// Parameters in (0,1) at which segment p->q meets the boundary of B.
inline std::vector<double> split_params(Vec2 p, Vec2 q, const Polygon& B) {
  std::vector<double> ts{0.0, 1.0};
  const Vec2 d = q - p;
  const double dd = norm2(d);
  for (std::size_t j = 0; j < B.size(); ++j) {
    const Vec2 a = B[j], b = B.vertex(static_cast<long>(j) + 1);
    const Vec2 e = b - a;
    const double den = cross(d, e);
    if (den != 0) {
      const double t = cross(a - p, e) / den;
      const double s = cross(a - p, d) / den;
      if (t > 0 && t < 1 && s >= -1e-14 && s <= 1 + 1e-14) ts.push_back(t);
    } else if (predicates::orient(p, q, a) == 0) {
      for (Vec2 c : {a, b}) {
        const double t = dot(c - p, d) / dd;
        if (t > 0 && t < 1) ts.push_back(t);
      }
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }), ts.end());
  return ts;
}

// Direction of B's side through point m if m lies on the boundary of B.
inline std::optional<Vec2> boundary_direction_at(const Polygon& B, Vec2 m, double tol) {
  for (std::size_t j = 0; j < B.size(); ++j) {
    const Vec2 a = B[j], b = B.vertex(static_cast<long>(j) + 1);
    if (point_segment_distance(m, a, b) <= tol) return b - a;
  }
  return std::nullopt;
}

// Boundary integral over the parts of dA lying inside B. Pieces shared by
// both boundaries count once (from A) when the sides run the same way.
inline double clipped_boundary_integral(const Polygon& A, const Polygon& B, const LayerPotential& w, bool owner) {
  double scale = 0;
  for (const auto& v : A.vertices()) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
  for (const auto& v : B.vertices()) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
  const double tol = 1e-12 * std::max(scale, 1.0);
  double acc = 0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const Vec2 p = A[i], q = A.vertex(static_cast<long>(i) + 1);
    const auto ts = split_params(p, q, B);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      const Vec2 a = p + (q - p) * ts[k], b = p + (q - p) * ts[k + 1];
      const Vec2 m = 0.5 * (a + b);
      bool include;
      if (auto dir = boundary_direction_at(B, m, tol)) {
        include = owner && dot(*dir, q - p) > 0;
      } else {
        include = B.contains(m);
      }
      if (include) acc += w.segment_integral(a, b);
    }
  }
  return acc;
}

}  // namespace detail

/// Integral of the weight over the intersection of A and B.
inline double weighted_intersection_area(const Polygon& A, const Polygon& B, const LayerPotential& w) {
  return detail::clipped_boundary_integral(A, B, w, true) + detail::clipped_boundary_integral(B, A, w, false);
}

inline double intersection_area(const Polygon& A, const Polygon& B) {
  return weighted_intersection_area(A, B, LayerPotential::uniform());
}

/// |P0 \Delta P1| from exact boundary clipping.
inline double symmetric_difference_area(const Polygon& p0, const Polygon& p1) {
  const double v = p0.area() + p1.area() - 2.0 * intersection_area(p0, p1);
  return std::max(0.0, v);
}

/// Integral over P0 \Delta P1 of a layer-wise constant weight.
inline double weighted_symmetric_difference(const Polygon& p0, const Polygon& p1, const LayerPotential& w) {
  return weighted_area(p0, w) + weighted_area(p1, w) - 2.0 * weighted_intersection_area(p0, p1, w);
}

struct ConductivityDistances {
  double l1 = 0;        // ||gamma_P0 - gamma_P1||_{L1}
  double l2_squared = 0; // ||gamma_P0 - gamma_P1||^2_{L2}
  double sym_diff = 0;   // |P0 \Delta P1|
};

inline ConductivityDistances conductivity_distances(const Polygon& p0, const Polygon& p1, const LayeredBackground& bg,
                                                    double k) {
  std::vector<double> w1, w2;
  for (double g : bg.gammas) {
    w1.push_back(std::abs(k - g));
    w2.push_back((k - g) * (k - g));
  }
  ConductivityDistances d;
  d.l1 = weighted_symmetric_difference(p0, p1, LayerPotential::layered(bg, w1));
  d.l2_squared = weighted_symmetric_difference(p0, p1, LayerPotential::layered(bg, w2));
  d.sym_diff = symmetric_difference_area(p0, p1);
  return d;
}

// ---------------------------------------------------------------------------
// Interface crossings and correspondences

struct Crossing {
  Vec2 point;
  int side = 0;        // side index (vertex side -> side+1)
  int interface = 0;   // 1-based interface index into bg.omegas
  double tau = 0;      // parameter along the side
};

/// Intersections of the polygon boundary with the interior interfaces, in traversal order.
inline std::vector<Crossing> interface_crossings(const Polygon& p, const LayeredBackground& bg) {
  std::vector<Crossing> out;
  const int m = bg.layers();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int s = 1; s < m; ++s) {
      const double w = bg.omegas[s];
      if (std::abs(p[i].y - w) <= 1e-12)
        throw Error(ErrorCode::VertexOnInterface, "vertex " + std::to_string(i) + " lies on interface " + std::to_string(s));
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2 a = p[i], b = p.vertex(static_cast<long>(i) + 1);
    std::vector<Crossing> side;
    for (int s = 1; s < m; ++s) {
      const double w = bg.omegas[s];
      if ((a.y - w) * (b.y - w) < 0) {
        const double tau = (w - a.y) / (b.y - a.y);
        side.push_back({{a.x + tau * (b.x - a.x), w}, static_cast<int>(i), s, tau});
      }
    }
    std::sort(side.begin(), side.end(), [](const Crossing& u, const Crossing& v) { return u.tau < v.tau; });
    out.insert(out.end(), side.begin(), side.end());
  }
  return out;
}

struct MatchedPoint {
  Vec2 p0;
  Vec2 p1;
  bool crossing = false;
  int side = 0;        // side of P0 the point belongs to (vertex index for vertices)
  int interface = 0;   // for crossings
  double tau = 0;      // for crossings: parameter along side of P0
};

/// Matched vertices and interface crossings, ordered along the boundary of P0.
struct VertexCorrespondence {
  Polygon p0;
  Polygon p1;  // vertices re-indexed so that p1[j] matches p0[j]
  std::vector<MatchedPoint> pairs;
  std::vector<double> V;  // (P1_j - P0_j), concatenated
  double normV = 0;
  double dH = 0;

  std::size_t vertex_count() const { return p0.size(); }
  double max_pair_distance() const {
    double d = 0;
    for (const auto& mp : pairs) d = std::max(d, distance(mp.p0, mp.p1));
    return d;
  }
};

/// Correspondence for two polygons whose vertices are already aligned by index.
inline VertexCorrespondence correspond_aligned(const Polygon& p0, const Polygon& p1, const LayeredBackground& bg) {
  if (p0.size() != p1.size()) throw Error(ErrorCode::InvalidInput, "polygons have different vertex counts");
  const auto c0 = interface_crossings(p0, bg);
  const auto c1 = interface_crossings(p1, bg);
  VertexCorrespondence corr;
  corr.p0 = p0;
  corr.p1 = p1;
  for (std::size_t j = 0; j < p0.size(); ++j) {
    corr.pairs.push_back({p0[j], p1[j], false, static_cast<int>(j), 0, 0.0});
    std::vector<const Crossing*> s0, s1;
    for (const auto& c : c0)
      if (c.side == static_cast<int>(j)) s0.push_back(&c);
    for (const auto& c : c1)
      if (c.side == static_cast<int>(j)) s1.push_back(&c);
    if (s0.size() != s1.size())
      throw Error(ErrorCode::CrossingMismatch, "side " + std::to_string(j) + " crosses the interfaces " +
                                                   std::to_string(s0.size()) + " vs " + std::to_string(s1.size()) + " times");
    for (std::size_t k = 0; k < s0.size(); ++k) {
      if (s0[k]->interface != s1[k]->interface)
        throw Error(ErrorCode::CrossingMismatch, "crossing order differs on side " + std::to_string(j));
      corr.pairs.push_back({s0[k]->point, s1[k]->point, true, static_cast<int>(j), s0[k]->interface, s0[k]->tau});
    }
  }
  double s = 0;
  for (const auto& mp : corr.pairs) {
    const Vec2 d = mp.p1 - mp.p0;
    corr.V.push_back(d.x);
    corr.V.push_back(d.y);
    s += norm2(d);
  }
  corr.normV = std::sqrt(s);
  corr.dH = hausdorff_distance(p0, p1);
  return corr;
}

/// Pairs the vertices of two nearby admissible polygons (cyclic order kept,
/// nearest neighbours, ties to the smallest shift) and appends the matched
/// interface crossings.
inline VertexCorrespondence match_vertices(const Polygon& p0, const Polygon& p1, const LayeredBackground& bg,
                                           const AprioriData& a) {
  const double dH = hausdorff_distance(p0, p1);
  if (dH > a.delta0())
    throw Error(ErrorCode::DistanceTooLarge,
                "Hausdorff distance " + std::to_string(dH) + " exceeds delta0 = " + std::to_string(a.delta0()));
  if (p0.size() != p1.size())
    throw Error(ErrorCode::InvalidPolygon, "polygons within delta0 must have the same vertex count");
  const std::size_t n = p0.size();
  std::size_t best_shift = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n; ++s) {
    double cost = 0;
    for (std::size_t j = 0; j < n; ++j) cost = std::max(cost, distance(p0[j], p1[(j + s) % n]));
    if (cost < best_cost) {
      best_cost = cost;
      best_shift = s;
    }
  }
  std::vector<Vec2> aligned(n);
  for (std::size_t j = 0; j < n; ++j) aligned[j] = p1[(j + best_shift) % n];
  return correspond_aligned(p0, Polygon(std::move(aligned)), bg);
}

/// Polygon with vertices P0_j + s (P1_j - P0_j).
inline Polygon interpolate_polygon(const Polygon& p0, const Polygon& p1, double s) {
  std::vector<Vec2> v(p0.size());
  for (std::size_t j = 0; j < p0.size(); ++j) v[j] = p0[j] + (p1[j] - p0[j]) * s;
  return Polygon(std::move(v));
}

}  // namespace polyinc
