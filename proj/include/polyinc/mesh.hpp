#pragma once

// Conforming triangulations of the square (optionally with the probe
// chimney on top) that resolve the inclusion boundary and every interface,
// plus the P1 trace space on the outer boundary.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "polyinc/core.hpp"
#include "polyinc/delaunay.hpp"
#include "polyinc/geometry.hpp"

namespace polyinc {

struct TriangleTag {
  int layer = 0;
  bool inclusion = false;
  bool extension = false;  // lies in the chimney above the top side
};

enum class EdgeKind { OuterBoundary = 0, PolygonSide = 1, Interface = 2, ExtensionBase = 3, ExtensionBoundary = 4 };

struct ConstraintEdge {
  int a = 0, b = 0;
  EdgeKind kind = EdgeKind::OuterBoundary;
  int index = 0;  // polygon side or interface number
};

struct MeshOptions {
  double min_angle_deg = 20.0;
  /// Adds the chimney (-d0, d0) x [L, L + 2 d0] when positive.
  double extension_d0 = 0.0;
  /// Optional local size; the effective target is min(h, sizing(x)).
  std::function<double(Vec2)> sizing;
};

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<TriangleTag> tags;
  std::vector<int> boundary_nodes;        // cycle on the square boundary, CCW from (-L, -L)
  std::vector<int> outer_boundary_nodes;  // Dirichlet nodes of the whole meshed domain
  std::vector<ConstraintEdge> constraint_edges;
  double h = 0;
  double L = 1;
  double achieved_min_angle = 0;
  bool has_extension = false;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double signed_area(std::size_t t) const {
    const auto& tr = triangles[t];
    return 0.5 * cross(nodes[tr[1]] - nodes[tr[0]], nodes[tr[2]] - nodes[tr[0]]);
  }
  double area(std::size_t t) const { return std::abs(signed_area(t)); }
  Vec2 centroid(std::size_t t) const {
    const auto& tr = triangles[t];
    return (nodes[tr[0]] + nodes[tr[1]] + nodes[tr[2]]) / 3.0;
  }
  /// Gradients of the three P1 hat functions on triangle t.
  std::array<Vec2, 3> gradients(std::size_t t) const {
    const auto& tr = triangles[t];
    const Vec2 p0 = nodes[tr[0]], p1 = nodes[tr[1]], p2 = nodes[tr[2]];
    const double twice = cross(p1 - p0, p2 - p0);
    return {perp(p2 - p1) / twice, perp(p0 - p2) / twice, perp(p1 - p0) / twice};
  }
  /// Gradient of a nodal field on triangle t.
  Vec2 gradient(std::size_t t, const Eigen::VectorXd& u) const {
    const auto g = gradients(t);
    const auto& tr = triangles[t];
    return g[0] * u[tr[0]] + g[1] * u[tr[1]] + g[2] * u[tr[2]];
  }
  double max_edge() const {
    double m = 0;
    for (const auto& tr : triangles)
      for (int i = 0; i < 3; ++i) m = std::max(m, distance(nodes[tr[i]], nodes[tr[(i + 1) % 3]]));
    return m;
  }
  std::vector<char> node_mask(const std::vector<int>& ids) const {
    std::vector<char> m(nodes.size(), 0);
    for (int i : ids) m[i] = 1;
    return m;
  }
  /// Content hash of nodes and connectivity.
  std::uint64_t id() const {
    std::uint64_t hsh = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t n) {
      const auto* c = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        hsh ^= c[i];
        hsh *= 1099511628211ull;
      }
    };
    for (const auto& p : nodes) mix(&p, sizeof p);
    for (const auto& t : triangles) mix(t.data(), sizeof(int) * 3);
    return hsh;
  }
  /// Same connectivity and tags with relocated nodes.
  Mesh with_nodes(std::vector<Vec2> moved) const {
    Mesh m = *this;
    m.nodes = std::move(moved);
    return m;
  }
};

namespace detail {

inline double perimeter_parameter(Vec2 p, double L) {
  if (p.y == -L) return p.x + L;
  if (p.x == L) return 2 * L + (p.y + L);
  if (p.y == L) return 4 * L + (L - p.x);
  return 6 * L + (L - p.y);
}

inline int edge_tag(EdgeKind k, int index) { return static_cast<int>(k) * 100000 + index; }
inline ConstraintEdge decode_tag(int a, int b, int tag) {
  return {a, b, static_cast<EdgeKind>(tag / 100000), tag % 100000};
}

}  // namespace detail

/// Classifies every triangle by its centroid: layer, inclusion, chimney.
inline void tag_triangles(Mesh& m, const LayeredBackground& bg, const std::optional<Polygon>& p) {
  m.tags.resize(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const Vec2 c = m.centroid(t);
    TriangleTag tag;
    tag.extension = c.y > bg.L;
    tag.layer = bg.layer_of(c.y);
    tag.inclusion = p.has_value() && p->contains(c);
    m.tags[t] = tag;
  }
}

/// Conforming Delaunay triangulation with max edge <= h and min angle >= 20 degrees.
inline Mesh triangulate(const LayeredBackground& bg, const std::optional<Polygon>& poly, double h,
                        const MeshOptions& opts = {}) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidInput, "mesh size h must be positive");
  bg.validate();
  const double L = bg.L;
  const double e = opts.extension_d0;
  if (e < 0 || e >= L) throw Error(ErrorCode::InvalidInput, "extension width out of range");

  std::vector<Vec2> pts;
  std::vector<detail::InputSegment> segs;
  auto add_point = [&](Vec2 p) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (pts[i] == p) return static_cast<int>(i);
    pts.push_back(p);
    return static_cast<int>(pts.size()) - 1;
  };
  auto add_chain = [&](const std::vector<Vec2>& chain, EdgeKind kind, int index) {
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      const int a = add_point(chain[i]), b = add_point(chain[i + 1]);
      if (a != b) segs.push_back({a, b, detail::edge_tag(kind, index)});
    }
  };

  const auto ifaces = bg.interfaces();
  std::vector<Crossing> crossings;
  if (poly) crossings = interface_crossings(*poly, bg);

  // Outer boundary, counter-clockwise.
  {
    add_chain({{-L, -L}, {L, -L}}, EdgeKind::OuterBoundary, 0);
    std::vector<Vec2> right{{L, -L}};
    for (double w : ifaces) right.push_back({L, w});
    right.push_back({L, L});
    add_chain(right, EdgeKind::OuterBoundary, 1);
    if (e > 0) {
      add_chain({{L, L}, {e, L}}, EdgeKind::OuterBoundary, 2);
      add_chain({{e, L}, {-e, L}}, EdgeKind::ExtensionBase, 0);
      add_chain({{-e, L}, {-L, L}}, EdgeKind::OuterBoundary, 2);
      add_chain({{e, L}, {e, L + 2 * e}, {-e, L + 2 * e}, {-e, L}}, EdgeKind::ExtensionBoundary, 0);
    } else {
      add_chain({{L, L}, {-L, L}}, EdgeKind::OuterBoundary, 2);
    }
    std::vector<Vec2> left{{-L, L}};
    for (auto it = ifaces.rbegin(); it != ifaces.rend(); ++it) left.push_back({-L, *it});
    left.push_back({-L, -L});
    add_chain(left, EdgeKind::OuterBoundary, 3);
  }
  // Interfaces, split where the inclusion crosses them.
  for (std::size_t s = 0; s < ifaces.size(); ++s) {
    std::vector<Vec2> chain{{-L, ifaces[s]}};
    std::vector<Vec2> cuts;
    for (const auto& c : crossings)
      if (c.interface == static_cast<int>(s) + 1) cuts.push_back(c.point);
    std::sort(cuts.begin(), cuts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x; });
    chain.insert(chain.end(), cuts.begin(), cuts.end());
    chain.push_back({L, ifaces[s]});
    add_chain(chain, EdgeKind::Interface, static_cast<int>(s) + 1);
  }
  if (poly) {
    const auto& P = *poly;
    for (std::size_t i = 0; i < P.size(); ++i) {
      std::vector<Vec2> chain{P[i]};
      for (const auto& c : crossings)
        if (c.side == static_cast<int>(i)) chain.push_back(c.point);
      chain.push_back(P.vertex(static_cast<long>(i) + 1));
      add_chain(chain, EdgeKind::PolygonSide, static_cast<int>(i));
    }
  }

  detail::RefineOptions ro;
  ro.min_angle_deg = opts.min_angle_deg;
  const auto sizing = opts.sizing;
  ro.size = [h, sizing](Vec2 x) { return sizing ? std::min(h, sizing(x)) : h; };
  ro.inside = [L, e](Vec2 c) {
    if (std::abs(c.x) < L && std::abs(c.y) < L) return true;
    return e > 0 && std::abs(c.x) < e && c.y > L && c.y < L + 2 * e;
  };
  detail::ConformingDelaunay cdt(pts, segs, ro);

  Mesh m;
  m.h = h;
  m.L = L;
  m.has_extension = e > 0;
  m.achieved_min_angle = cdt.achieved_min_angle;
  std::vector<int> remap(cdt.pts.size(), -1);
  for (const auto& t : cdt.tris) {
    if (!t.alive || !cdt.tri_in_domain(t)) continue;
    std::array<int, 3> tri{};
    for (int i = 0; i < 3; ++i) {
      int& r = remap[t.v[i]];
      if (r < 0) {
        r = static_cast<int>(m.nodes.size());
        m.nodes.push_back(cdt.pts[t.v[i]]);
      }
      tri[i] = r;
    }
    m.triangles.push_back(tri);
  }
  for (const auto& [k, tag] : cdt.subsegments) {
    const int a = remap[k.first], b = remap[k.second];
    if (a < 0 || b < 0 || cdt.edge_triangles(k.first, k.second).empty())
      throw Error(ErrorCode::NonConformingMesh, "constraint subsegment missing from the triangulation");
    m.constraint_edges.push_back(detail::decode_tag(a, b, tag));
  }
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    if (!(m.signed_area(t) > 0)) throw Error(ErrorCode::NonConformingMesh, "non-positive triangle");

  std::vector<char> on_square(m.nodes.size(), 0), on_outer(m.nodes.size(), 0);
  for (const auto& ce : m.constraint_edges) {
    if (ce.kind == EdgeKind::OuterBoundary || ce.kind == EdgeKind::ExtensionBase) on_square[ce.a] = on_square[ce.b] = 1;
    if (ce.kind == EdgeKind::OuterBoundary || ce.kind == EdgeKind::ExtensionBoundary) on_outer[ce.a] = on_outer[ce.b] = 1;
  }
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (on_square[i]) m.boundary_nodes.push_back(static_cast<int>(i));
    if (on_outer[i]) m.outer_boundary_nodes.push_back(static_cast<int>(i));
  }
  std::sort(m.boundary_nodes.begin(), m.boundary_nodes.end(), [&](int a, int b) {
    return detail::perimeter_parameter(m.nodes[a], L) < detail::perimeter_parameter(m.nodes[b], L);
  });
  tag_triangles(m, bg, poly);
  return m;
}

// ---------------------------------------------------------------------------
// Point location

class MeshLocator {
 public:
  explicit MeshLocator(const Mesh& m) : m_(&m) {
    lo_ = {1e300, 1e300};
    Vec2 hi{-1e300, -1e300};
    for (const auto& p : m.nodes) {
      lo_.x = std::min(lo_.x, p.x); lo_.y = std::min(lo_.y, p.y);
      hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
    }
    const double n = std::max(1.0, std::sqrt(static_cast<double>(m.triangles.size()) / 2.0));
    nx_ = ny_ = static_cast<int>(n);
    cell_ = {(hi.x - lo_.x) / nx_ * (1 + 1e-12), (hi.y - lo_.y) / ny_ * (1 + 1e-12)};
    buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      const auto& tr = m.triangles[t];
      Vec2 a{1e300, 1e300}, b{-1e300, -1e300};
      for (int i = 0; i < 3; ++i) {
        const Vec2 p = m.nodes[tr[i]];
        a.x = std::min(a.x, p.x); a.y = std::min(a.y, p.y);
        b.x = std::max(b.x, p.x); b.y = std::max(b.y, p.y);
      }
      const auto [i0, j0] = cell(a);
      const auto [i1, j1] = cell(b);
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(j * nx_ + i)].push_back(static_cast<int>(t));
    }
  }

  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };

  /// Triangle containing p (with barycentric coordinates), or triangle = -1.
  Hit locate(Vec2 p, double tol = 1e-12) const {
    const auto [i, j] = cell(p);
    if (p.x < lo_.x - tol || p.y < lo_.y - tol) return {};
    Hit best;
    double best_min = -1e300;
    for (int t : buckets_[static_cast<std::size_t>(j * nx_ + i)]) {
      const auto b = barycentric(t, p);
      const double mn = std::min({b[0], b[1], b[2]});
      if (mn > best_min) {
        best_min = mn;
        best = {t, b};
      }
    }
    if (best.triangle < 0 || best_min < -tol) return {};
    return best;
  }

  std::array<double, 3> barycentric(int t, Vec2 p) const {
    const auto& tr = m_->triangles[t];
    const Vec2 a = m_->nodes[tr[0]], b = m_->nodes[tr[1]], c = m_->nodes[tr[2]];
    const double d = cross(b - a, c - a);
    const double l1 = cross(p - a, c - a) / d;
    const double l2 = cross(b - a, p - a) / d;
    return {1 - l1 - l2, l1, l2};
  }

  double interpolate(const Eigen::VectorXd& u, Vec2 p) const {
    const auto hit = locate(p);
    if (hit.triangle < 0) throw Error(ErrorCode::InvalidInput, "point outside mesh");
    const auto& tr = m_->triangles[hit.triangle];
    return hit.bary[0] * u[tr[0]] + hit.bary[1] * u[tr[1]] + hit.bary[2] * u[tr[2]];
  }

 private:
  const Mesh* m_;
  Vec2 lo_, cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;

  std::pair<int, int> cell(Vec2 p) const {
    const int i = std::clamp(static_cast<int>(std::floor((p.x - lo_.x) / cell_.x)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y - lo_.y) / cell_.y)), 0, ny_ - 1);
    return {i, j};
  }
};

// ---------------------------------------------------------------------------
// Boundary trace space

/// P1 functions on a closed boundary polygon, with mass and arclength
/// Laplace-Beltrami stiffness matrices.
struct BoundarySpace {
  std::vector<Vec2> points;
  std::vector<double> s;  // arclength from the first point
  double perimeter = 0;
  std::vector<int> mesh_nodes;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd stiffness;

  std::size_t size() const { return points.size(); }

  static BoundarySpace from_points(std::vector<Vec2> pts) {
    BoundarySpace b;
    const std::size_t n = pts.size();
    if (n < 3) throw Error(ErrorCode::InvalidInput, "boundary needs at least 3 nodes");
    b.points = std::move(pts);
    b.s.resize(n);
    b.mass = Eigen::MatrixXd::Zero(static_cast<long>(n), static_cast<long>(n));
    b.stiffness = Eigen::MatrixXd::Zero(static_cast<long>(n), static_cast<long>(n));
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      b.s[i] = acc;
      const std::size_t j = (i + 1) % n;
      const double l = distance(b.points[i], b.points[j]);
      acc += l;
      const long I = static_cast<long>(i), J = static_cast<long>(j);
      b.mass(I, I) += l / 3;
      b.mass(J, J) += l / 3;
      b.mass(I, J) += l / 6;
      b.mass(J, I) += l / 6;
      b.stiffness(I, I) += 1 / l;
      b.stiffness(J, J) += 1 / l;
      b.stiffness(I, J) -= 1 / l;
      b.stiffness(J, I) -= 1 / l;
    }
    b.perimeter = acc;
    return b;
  }

  bool same_nodes(const BoundarySpace& o, double tol = 1e-12) const {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (distance(points[i], o.points[i]) > tol) return false;
    return true;
  }

  /// Values at arclength t of the nodal function u (periodic, piecewise linear).
  double evaluate(const Eigen::VectorXd& u, double t) const {
    t = std::fmod(t, perimeter);
    if (t < 0) t += perimeter;
    const auto it = std::upper_bound(s.begin(), s.end(), t);
    const std::size_t i = static_cast<std::size_t>(std::distance(s.begin(), it)) - 1;
    const std::size_t j = (i + 1) % size();
    const double len = (j == 0 ? perimeter : s[j]) - s[i];
    const double w = (t - s[i]) / len;
    return (1 - w) * u[static_cast<long>(i)] + w * u[static_cast<long>(j)];
  }
};

inline BoundarySpace boundary_trace_space(const Mesh& m) {
  std::vector<Vec2> pts;
  for (int i : m.boundary_nodes) pts.push_back(m.nodes[i]);
  auto b = BoundarySpace::from_points(std::move(pts));
  b.mesh_nodes = m.boundary_nodes;
  return b;
}

/// Interpolation matrix taking nodal values on `from` to nodal values on
/// `to` (both closed curves parameterized by arclength from the same start).
inline Eigen::MatrixXd boundary_prolongation(const BoundarySpace& from, const BoundarySpace& to) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<long>(to.size()), static_cast<long>(from.size()));
  const double scale = from.perimeter / to.perimeter;
  for (std::size_t r = 0; r < to.size(); ++r) {
    const double t = to.s[r] * scale;
    const auto it = std::upper_bound(from.s.begin(), from.s.end(), t + 1e-13 * from.perimeter);
    const std::size_t i = static_cast<std::size_t>(std::distance(from.s.begin(), it)) - 1;
    const std::size_t j = (i + 1) % from.size();
    const double len = (j == 0 ? from.perimeter : from.s[j]) - from.s[i];
    double w = std::clamp((t - from.s[i]) / len, 0.0, 1.0);
    if (w < 1e-12) w = 0;
    if (w > 1 - 1e-12) w = 1;
    P(static_cast<long>(r), static_cast<long>(i)) += 1 - w;
    P(static_cast<long>(r), static_cast<long>(j)) += w;
  }
  return P;
}

// ---------------------------------------------------------------------------
// Export

inline void write_mesh_text(std::ostream& os, const Mesh& m) {
  os.precision(17);
  os << "nodes " << m.nodes.size() << " triangles " << m.triangles.size() << "\n";
  for (const auto& p : m.nodes) os << p.x << " " << p.y << "\n";
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tr = m.triangles[t];
    os << tr[0] << " " << tr[1] << " " << tr[2] << " " << m.tags[t].layer << " " << (m.tags[t].inclusion ? 1 : 0)
       << "\n";
  }
}

inline Mesh read_mesh_text(std::istream& is) {
  std::string w1, w2;
  std::size_t n = 0, t = 0;
  if (!(is >> w1 >> n >> w2 >> t) || w1 != "nodes" || w2 != "triangles")
    throw Error(ErrorCode::InvalidInput, "mesh header must read 'nodes <n> triangles <m>'");
  Mesh m;
  m.nodes.resize(n);
  for (auto& p : m.nodes)
    if (!(is >> p.x >> p.y)) throw Error(ErrorCode::InvalidInput, "truncated node list");
  m.triangles.resize(t);
  m.tags.resize(t);
  for (std::size_t i = 0; i < t; ++i) {
    int incl = 0;
    auto& tr = m.triangles[i];
    if (!(is >> tr[0] >> tr[1] >> tr[2] >> m.tags[i].layer >> incl))
      throw Error(ErrorCode::InvalidInput, "truncated triangle list");
    m.tags[i].inclusion = incl != 0;
  }
  return m;
}

}  // namespace polyinc
