#pragma once

// The displacement field U that carries P0 onto P1 (piecewise affine along
// the inclusion boundary, horizontal on the interfaces, supported in a thin
// strip around the boundary), the family Phi_t = I + tU and the pullback
// coefficient A(t) with its t-derivative at 0.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "polyinc/forward.hpp"
#include "polyinc/geometry.hpp"
#include "polyinc/mesh.hpp"

namespace polyinc {

/// div(U) I - (DU + DU^T) for a constant gradient B.
inline Mat2 calA(const Mat2& B) { return Mat2::identity() * B.trace() - (B + B.transpose()); }

/// A(t) = (DPhi_t^{-1})(DPhi_t^{-1})^T det DPhi_t for DPhi_t = I + tB.
inline Mat2 pullback_A(const Mat2& B, double t) {
  const Mat2 M = Mat2::identity() + B * t;
  const double det = M.det();
  if (!(det > 0)) throw Error(ErrorCode::SingularJacobian, "det(DPhi_t) is not positive");
  const Mat2 adj = M.adjugate();
  return adj * adj.transpose() * (1.0 / det);
}

/// A(t) - I without cancellation: (t calA + t^2 (C C^T - det(B) I)) / det(I + tB), C = adj(B).
inline Mat2 pullback_A_minus_I(const Mat2& B, double t) {
  const Mat2 M = Mat2::identity() + B * t;
  const double det = M.det();
  if (!(det > 0)) throw Error(ErrorCode::SingularJacobian, "det(DPhi_t) is not positive");
  const Mat2 C = B.adjugate();
  return (calA(B) * t + (C * C.transpose() - Mat2::identity() * B.det()) * (t * t)) * (1.0 / det);
}

struct DisplacementOptions {
  double width = -1;          // strip width; default d0/4
  bool enforce_bound = true;  // a-posteriori sup|U| + d0/8 sup|DU| <= C0 dH
};

class DisplacementField {
 public:
  std::shared_ptr<const Mesh> mesh;
  Polygon p0;
  std::vector<Vec2> values;   // nodal
  std::vector<Mat2> grad;     // DU per triangle
  std::vector<int> support;   // triangles on which U is not identically zero
  double dH = 0;
  double C0 = 0;
  double d0 = 0;
  double width = 0;

  DisplacementField() = default;

  void finalize() {
    grad.assign(mesh->num_triangles(), Mat2::zero());
    support.clear();
    for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
      const auto g = mesh->gradients(t);
      const auto& tr = mesh->triangles[t];
      Mat2 B = Mat2::zero();
      bool nz = false;
      for (int i = 0; i < 3; ++i) {
        const Vec2 u = values[static_cast<std::size_t>(tr[i])];
        B = B + outer(u, g[i]);
        nz = nz || u.x != 0 || u.y != 0;
      }
      grad[t] = B;
      if (nz) support.push_back(static_cast<int>(t));
    }
    locator_ = std::make_shared<MeshLocator>(*mesh);
  }

  double sup_norm() const {
    double s = 0;
    for (const auto& v : values) s = std::max(s, norm(v));
    return s;
  }
  double sup_grad() const {
    double s = 0;
    for (int t : support) s = std::max(s, grad[static_cast<std::size_t>(t)].norm2());
    return s;
  }
  /// sup|U| + (d0/8) sup|DU|.
  double strip_bound_lhs() const { return sup_norm() + d0 / 8.0 * sup_grad(); }

  /// Value and gradient at a point (zero outside the mesh).
  std::pair<Vec2, Mat2> eval(Vec2 x) const {
    const auto hit = locator_->locate(x);
    if (hit.triangle < 0) return {Vec2{}, Mat2::zero()};
    const auto& tr = mesh->triangles[static_cast<std::size_t>(hit.triangle)];
    Vec2 u;
    for (int i = 0; i < 3; ++i) u += values[static_cast<std::size_t>(tr[i])] * hit.bary[i];
    return {u, grad[static_cast<std::size_t>(hit.triangle)]};
  }
  Vec2 at(Vec2 x) const { return eval(x).first; }

  /// Linear combination on the same mesh.
  DisplacementField combined(double a, const DisplacementField& o, double b) const {
    if (o.mesh != mesh && o.mesh->id() != mesh->id())
      throw Error(ErrorCode::DimensionMismatch, "fields live on different meshes");
    DisplacementField r = *this;
    for (std::size_t i = 0; i < values.size(); ++i) r.values[i] = values[i] * a + o.values[i] * b;
    r.finalize();
    return r;
  }

  /// A(t) - I per triangle (zero off the support).
  std::vector<Mat2> A_minus_I(double t) const {
    std::vector<Mat2> A(mesh->num_triangles(), Mat2::zero());
    for (int s : support) A[static_cast<std::size_t>(s)] = pullback_A_minus_I(grad[static_cast<std::size_t>(s)], t);
    return A;
  }
  /// A(t) per triangle.
  std::vector<Mat2> A(double t) const {
    auto a = A_minus_I(t);
    for (auto& m : a) m = m + Mat2::identity();
    return a;
  }
  /// calA per triangle.
  std::vector<Mat2> calA_field() const {
    std::vector<Mat2> a(mesh->num_triangles(), Mat2::zero());
    for (int s : support) a[static_cast<std::size_t>(s)] = calA(grad[static_cast<std::size_t>(s)]);
    return a;
  }

  /// Node positions of the mapped mesh Phi_t(x).
  std::vector<Vec2> mapped_nodes(double t) const {
    std::vector<Vec2> n(mesh->nodes);
    for (std::size_t i = 0; i < n.size(); ++i) n[i] += values[i] * t;
    return n;
  }

 private:
  std::shared_ptr<MeshLocator> locator_;
};

struct FamilyMap {
  const DisplacementField* field = nullptr;
  double t = 0;
};

inline Vec2 phi(const FamilyMap& f, Vec2 x) { return x + f.field->at(x) * f.t; }
inline Mat2 dphi(const FamilyMap& f, Vec2 x) { return Mat2::identity() + f.field->eval(x).second * f.t; }
inline Mat2 pullback_A(const FamilyMap& f, Vec2 x) { return pullback_A(f.field->eval(x).second, f.t); }
inline Mat2 calA(const DisplacementField& u, Vec2 x) { return calA(u.eval(x).second); }

/// Velocity of the point where side a->b meets the horizontal line through
/// it, when a and b move with velocities da and db.
inline Vec2 crossing_velocity(Vec2 a, Vec2 b, Vec2 da, Vec2 db, double tau) {
  const Vec2 d = b - a;
  const double dtau = -(da.y + tau * (db.y - da.y)) / d.y;
  return {da.x + tau * (db.x - da.x) + dtau * d.x, 0.0};
}

namespace detail {

inline double segment_distance(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  if (predicates::segments_intersect(a, b, c, d)) return 0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d), point_segment_distance(c, a, b),
                   point_segment_distance(d, a, b)});
}

// Discrete harmonic extension (unit conductivity) of the values on pinned
// nodes into the nodes closer than `width` to the segments; every other node
// is zero, and interface nodes keep a zero vertical component.
inline std::vector<Vec2> harmonic_fill(const Mesh& m, std::vector<Vec2> values, const std::vector<char>& pinned,
                                       const std::vector<char>& on_interface,
                                       const std::vector<std::pair<Vec2, Vec2>>& segs, double width, double L) {
  std::vector<char> fixed_x(m.num_nodes(), 1), fixed_y(m.num_nodes(), 1);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    if (pinned[i]) continue;
    values[i] = Vec2{};
    if (m.nodes[i].y > L) continue;
    double d = 1e300;
    for (const auto& [a, b] : segs) d = std::min(d, point_segment_distance(m.nodes[i], a, b));
    if (d < width) {
      fixed_x[i] = 0;
      fixed_y[i] = on_interface[i] ? 1 : 0;
    }
  }
  const std::vector<double> ones(m.num_triangles(), 1.0);
  Eigen::VectorXd bx = Eigen::VectorXd::Zero(static_cast<long>(m.num_nodes())), by = bx;
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    if (pinned[i]) {
      bx[static_cast<long>(i)] = values[i].x;
      by[static_cast<long>(i)] = values[i].y;
    }
  const Eigen::VectorXd ux = DirichletProblem(m, ones, fixed_x).solve(bx);
  const Eigen::VectorXd uy = DirichletProblem(m, ones, fixed_y).solve(by);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) values[i] = {ux[static_cast<long>(i)], uy[static_cast<long>(i)]};
  return values;
}

}  // namespace detail

/// Extends prescribed displacements of the vertices and interface crossings
/// of p0 to a P1 field on the mesh: affine along each boundary piece,
/// discrete harmonic in the strip of the given width, zero beyond it, and
/// with zero vertical component on the interfaces.
inline DisplacementField extend_displacement(std::shared_ptr<const Mesh> mesh, const Polygon& p0,
                                             const LayeredBackground& bg, const std::vector<Vec2>& vertex_disp,
                                             const std::vector<Crossing>& crossings,
                                             const std::vector<Vec2>& crossing_disp, double width) {
  const Mesh& m = *mesh;
  const std::size_t n = p0.size();
  if (vertex_disp.size() != n || crossing_disp.size() != crossings.size())
    throw Error(ErrorCode::DimensionMismatch, "displacement count does not match the polygon");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const double d = detail::segment_distance(p0[i], p0.vertex(static_cast<long>(i) + 1), p0[j], p0.vertex(static_cast<long>(j) + 1));
      if (d < 2 * width)
        throw Error(ErrorCode::StripCollision, "strip around sides " + std::to_string(i) + " and " + std::to_string(j) + " overlaps itself");
    }

  DisplacementField U;
  U.mesh = mesh;
  U.p0 = p0;
  U.width = width;
  U.values.assign(m.num_nodes(), Vec2{});

  // Boundary nodes of p0 with the piecewise-affine interpolant.
  std::vector<char> on_boundary(m.num_nodes(), 0), on_interface(m.num_nodes(), 0);
  for (const auto& ce : m.constraint_edges) {
    if (ce.kind == EdgeKind::Interface) on_interface[ce.a] = on_interface[ce.b] = 1;
    if (ce.kind != EdgeKind::PolygonSide) continue;
    const int side = ce.index;
    const Vec2 a = p0[static_cast<std::size_t>(side)], b = p0.vertex(side + 1);
    std::vector<std::pair<double, Vec2>> knots{{0.0, vertex_disp[static_cast<std::size_t>(side)]}};
    for (std::size_t c = 0; c < crossings.size(); ++c)
      if (crossings[c].side == side) knots.emplace_back(crossings[c].tau, crossing_disp[c]);
    knots.emplace_back(1.0, vertex_disp[static_cast<std::size_t>((side + 1) % static_cast<int>(n))]);
    for (int node : {ce.a, ce.b}) {
      const Vec2 x = m.nodes[static_cast<std::size_t>(node)];
      const double tau = std::clamp(dot(x - a, b - a) / norm2(b - a), 0.0, 1.0);
      std::size_t k = 0;
      while (k + 2 < knots.size() && tau > knots[k + 1].first) ++k;
      const double w = (tau - knots[k].first) / (knots[k + 1].first - knots[k].first);
      U.values[static_cast<std::size_t>(node)] = knots[k].second * (1 - w) + knots[k + 1].second * w;
      on_boundary[static_cast<std::size_t>(node)] = 1;
    }
  }
  // Vertices coincide with mesh nodes exactly; pin their values.
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (m.nodes[i] == p0[j]) U.values[i] = vertex_disp[j];

  std::vector<std::pair<Vec2, Vec2>> segs;
  for (std::size_t i = 0; i < n; ++i) segs.emplace_back(p0[i], p0.vertex(static_cast<long>(i) + 1));
  U.values = detail::harmonic_fill(m, std::move(U.values), on_boundary, on_interface, segs, width, bg.L);
  U.finalize();
  return U;
}

/// Builds U from a vertex correspondence on a mesh of p0 (which must
/// resolve p0 and its interface crossings).
inline DisplacementField build_displacement(const VertexCorrespondence& corr, std::shared_ptr<const Mesh> mesh,
                                            const LayeredBackground& bg, const AprioriData& a,
                                            const DisplacementOptions& opt = {}) {
  const double width = opt.width > 0 ? opt.width : a.d0 / 4;
  const auto cr = interface_crossings(corr.p0, bg);
  std::vector<Vec2> vd(corr.p0.size()), cd;
  for (const auto& mp : corr.pairs) {
    if (mp.crossing) cd.push_back(mp.p1 - mp.p0);
    else vd[static_cast<std::size_t>(mp.side)] = mp.p1 - mp.p0;
  }
  if (cd.size() != cr.size()) throw Error(ErrorCode::CrossingMismatch, "correspondence crossings do not match the polygon");
  for (auto& v : cd) v.y = 0;
  auto U = extend_displacement(std::move(mesh), corr.p0, bg, vd, cr, cd, width);
  U.dH = corr.dH;
  U.C0 = a.C0();
  U.d0 = a.d0;
  if (opt.enforce_bound) {
    const double lhs = U.strip_bound_lhs();
    const double rhs = U.C0 * U.dH;
    if (lhs > rhs * (1 + 1e-12) + 1e-300)
      throw Error(ErrorCode::StripBoundViolation,
                  "sup|U| + d0/8 sup|DU| = " + std::to_string(lhs) + " exceeds C0 dH = " + std::to_string(rhs));
  }
  return U;
}

/// The field U transported to the mapped mesh Phi_t0(T): same values on the
/// inclusion boundary, strip re-extended harmonically around the mapped boundary.
inline DisplacementField reextend(const DisplacementField& U, std::shared_ptr<const Mesh> mapped,
                                  const LayeredBackground& bg) {
  const Mesh& m = *mapped;
  if (m.num_nodes() != U.values.size()) throw Error(ErrorCode::DimensionMismatch, "mapped mesh does not match the field");
  std::vector<char> pinned(m.num_nodes(), 0), on_interface(m.num_nodes(), 0);
  std::vector<std::pair<Vec2, Vec2>> segs;
  for (const auto& ce : m.constraint_edges) {
    if (ce.kind == EdgeKind::Interface) on_interface[ce.a] = on_interface[ce.b] = 1;
    if (ce.kind == EdgeKind::PolygonSide) {
      pinned[ce.a] = pinned[ce.b] = 1;
      segs.emplace_back(m.nodes[ce.a], m.nodes[ce.b]);
    }
  }
  DisplacementField R = U;
  R.mesh = std::move(mapped);
  std::vector<Vec2> v(m.num_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = pinned[i] ? U.values[i] : Vec2{};
  R.values = detail::harmonic_fill(m, std::move(v), pinned, on_interface, segs, U.width, bg.L);
  R.finalize();
  return R;
}

/// Field moving vertex j of p0 with unit velocity along `dir` (crossings
/// follow their sides).
inline DisplacementField unit_vertex_field(std::shared_ptr<const Mesh> mesh, const Polygon& p0,
                                           const LayeredBackground& bg, std::size_t j, Vec2 dir, double width) {
  std::vector<Vec2> vd(p0.size(), Vec2{});
  vd[j] = dir;
  const auto cr = interface_crossings(p0, bg);
  std::vector<Vec2> cd;
  for (const auto& c : cr) {
    const std::size_t s = static_cast<std::size_t>(c.side);
    const std::size_t e = (s + 1) % p0.size();
    cd.push_back(crossing_velocity(p0[s], p0[e], vd[s], vd[e], c.tau));
  }
  return extend_displacement(std::move(mesh), p0, bg, vd, cr, cd, width);
}

/// Phi_s of the boundary of p0: matched vertices and interface crossings moved
/// by s times their displacement (crossings move along the interface).
inline Polygon family_polygon(const VertexCorrespondence& corr, double s) {
  std::vector<Vec2> v;
  for (const auto& mp : corr.pairs) {
    Vec2 d = mp.p1 - mp.p0;
    if (mp.crossing) d.y = 0;
    v.push_back(mp.p0 + d * s);
  }
  return Polygon(std::move(v));
}

/// Normal displacement amp * max(0, 1 - |tau - center| / half)^2 * n on one
/// side of p0, zero on all other sides, extended harmonically into the strip.
inline DisplacementField side_bump_field(std::shared_ptr<const Mesh> mesh, const Polygon& p0,
                                         const LayeredBackground& bg, int side, double center, double half,
                                         double amp, double width) {
  const Mesh& m = *mesh;
  DisplacementField U;
  U.mesh = mesh;
  U.p0 = p0;
  U.width = width;
  U.values.assign(m.num_nodes(), Vec2{});
  std::vector<char> pinned(m.num_nodes(), 0), on_interface(m.num_nodes(), 0);
  const Vec2 a = p0[static_cast<std::size_t>(side)], b = p0.vertex(side + 1);
  const Vec2 n = p0.outward_normal(static_cast<std::size_t>(side));
  for (const auto& ce : m.constraint_edges) {
    if (ce.kind == EdgeKind::Interface) on_interface[ce.a] = on_interface[ce.b] = 1;
    if (ce.kind != EdgeKind::PolygonSide) continue;
    for (int node : {ce.a, ce.b}) {
      pinned[static_cast<std::size_t>(node)] = 1;
      if (ce.index != side) continue;
      const double tau = dot(m.nodes[static_cast<std::size_t>(node)] - a, b - a) / norm2(b - a);
      const double s = std::max(0.0, 1 - std::abs(tau - center) / half);
      U.values[static_cast<std::size_t>(node)] = n * (amp * s * s);
    }
  }
  // Nodes shared with other sides keep zero.
  for (const auto& ce : m.constraint_edges)
    if (ce.kind == EdgeKind::PolygonSide && ce.index != side)
      U.values[static_cast<std::size_t>(ce.a)] = U.values[static_cast<std::size_t>(ce.b)] = Vec2{};
  std::vector<std::pair<Vec2, Vec2>> segs;
  for (std::size_t i = 0; i < p0.size(); ++i) segs.emplace_back(p0[i], p0.vertex(static_cast<long>(i) + 1));
  U.values = detail::harmonic_fill(m, std::move(U.values), pinned, on_interface, segs, width, bg.L);
  U.finalize();
  return U;
}

// ---------------------------------------------------------------------------
// Property checks

struct PropertyCheck {
  std::string name;
  bool passed = true;
  double max_ratio = 0;  // worst measured / bound
  double bound = 1;
  std::size_t samples = 0;
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const PropertyCheck* find(const std::string& n) const {
    for (const auto& c : checks)
      if (c.name == n) return &c;
    return nullptr;
  }
};

/// Randomized checks of the map properties: affine on the boundary pieces
/// and the interfaces (f1), invertibility and |DPhi - I| bound (f2), layer
/// preservation (f3), and the t-derivative bounds (f4-f6) using closed-form
/// derivatives. Sample t is drawn uniformly in [0, f.t].
inline PropertyReport verify_phi_properties(const FamilyMap& f, const LayeredBackground& bg, std::size_t samples,
                                            std::uint64_t seed = 1) {
  const DisplacementField& U = *f.field;
  const double tmax = f.t;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double dH = U.dH;
  const double G = 8.0 * U.C0 * dH / U.d0;  // bound on |DU|
  const double scale = std::max(U.sup_norm(), 1e-300);

  PropertyCheck f1{"f1_piecewise_affine", true, 0, 1e-12, 0};
  PropertyCheck f2{"f2_invertible", true, 0, 1, 0};
  PropertyCheck f2b{"f2_below_half", true, 0, 0.5, 0};
  PropertyCheck f3{"f3_layers", true, 0, 1e-14, 0};
  PropertyCheck f4{"f4_velocity", true, 0, 2, 0};
  PropertyCheck f5{"f5_gradient_velocity", true, 0, 4, 0};
  PropertyCheck f6{"f6_inverse_gradient_velocity", true, 0, 10, 0};

  // f1: along every boundary piece and the interfaces inside the strip.
  const Polygon& P = U.p0;
  const auto cr = interface_crossings(P, bg);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const Vec2 a = P[i], b = P.vertex(static_cast<long>(i) + 1);
    std::vector<double> knots{0.0};
    for (const auto& c : cr)
      if (c.side == static_cast<int>(i)) knots.push_back(c.tau);
    knots.push_back(1.0);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      const Vec2 pa = a + (b - a) * knots[k], pb = a + (b - a) * knots[k + 1];
      Vec2 ua = U.at(pa), ub = U.at(pb);
      for (int s = 0; s < 64; ++s) {
        const double w = unif(rng);
        const Vec2 x = pa + (pb - pa) * w;
        const double dev = norm(U.at(x) - (ua * (1 - w) + ub * w)) / scale;
        f1.max_ratio = std::max(f1.max_ratio, dev);
        ++f1.samples;
      }
    }
  }
  for (double w : bg.interfaces()) {
    for (int s = 0; s < 256; ++s) {
      const Vec2 x{(2 * unif(rng) - 1) * bg.L, w};
      const double t = unif(rng) * tmax;
      const double dev = std::abs(phi({&U, t}, x).y - w);
      f3.max_ratio = std::max(f3.max_ratio, dev);
      ++f3.samples;
    }
  }

  // Sample mostly around the inclusion, where U lives.
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& v : P.vertices()) {
    xmin = std::min(xmin, v.x); xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y); ymax = std::max(ymax, v.y);
  }
  const double pad = 2 * U.width;
  for (std::size_t s = 0; s < samples; ++s) {
    Vec2 x;
    if (s % 10 == 0) {
      x = {(2 * unif(rng) - 1) * bg.L, (2 * unif(rng) - 1) * bg.L};
    } else {
      x = {std::clamp(xmin - pad + unif(rng) * (xmax - xmin + 2 * pad), -bg.L, bg.L),
           std::clamp(ymin - pad + unif(rng) * (ymax - ymin + 2 * pad), -bg.L, bg.L)};
    }
    const double t = unif(rng) * tmax;
    const auto [u, B] = U.eval(x);
    const Mat2 M = Mat2::identity() + B * t;
    const double det = M.det();
    const Mat2 Minv = det > 0 ? M.inverse() : Mat2::zero();
    // f2
    if (!(det > 0)) f2.passed = f2b.passed = false;
    const double dev = std::max((M - Mat2::identity()).norm2(), (Minv - Mat2::identity()).norm2());
    if (t > 0 && G > 0) f2.max_ratio = std::max(f2.max_ratio, (B * t).norm2() / (t * G));
    f2b.max_ratio = std::max(f2b.max_ratio, dev);
    ++f2.samples;
    ++f2b.samples;
    // f3: x in layer i outside P0 stays in layer i.
    if (!P.contains(x)) {
      const int layer = bg.layer_of(x.y);
      const Vec2 y = x + u * t;
      const double lo = bg.omegas[static_cast<std::size_t>(layer)], hi = bg.omegas[static_cast<std::size_t>(layer) + 1];
      const double out = std::max({lo - y.y, y.y - hi, std::abs(y.x) - bg.L, 0.0});
      f3.max_ratio = std::max(f3.max_ratio, out);
      ++f3.samples;
    }
    if (dH > 0) {
      // f4: |d/dt Phi_t| = |U|, |d/dt Phi_t^{-1}| = |DPhi_t^{-1} U|.
      const double v4 = std::max(norm(u), norm(Minv * u)) / (U.C0 * dH);
      f4.max_ratio = std::max(f4.max_ratio, v4);
      // f5: |d/dt DPhi_t| = |DU|, |d/dt DPhi_t^{-1}| = |M^{-1} B M^{-1}|.
      const Mat2 dinv = Minv * B * Minv;
      const double v5 = std::max(B.norm2(), dinv.norm2()) / G;
      f5.max_ratio = std::max(f5.max_ratio, v5);
      // f6: |d/dt DPhi_t^{-1} + DU| <= C t |DU|^2.
      if (t > 0) {
        const double v6 = (B - dinv).norm2() / (t * G * G);
        f6.max_ratio = std::max(f6.max_ratio, v6);
      }
      ++f4.samples;
      ++f5.samples;
      ++f6.samples;
    }
  }
  f1.passed = f1.max_ratio <= f1.bound;
  f2.passed = f2.passed && f2.max_ratio <= f2.bound * (1 + 1e-12);
  f2b.passed = f2b.passed && f2b.max_ratio < f2b.bound;
  f3.passed = f3.max_ratio <= f3.bound;
  f4.passed = f4.max_ratio <= f4.bound;
  f5.passed = f5.max_ratio <= f5.bound;
  f6.passed = f6.max_ratio <= f6.bound;
  return {{f1, f2, f2b, f3, f4, f5, f6}};
}

}  // namespace polyinc
