#pragma once

// Fundamental solutions for two conductivities separated by a line, Green
// functions of the extended domain by singularity splitting, and the
// near-boundary probe S0(y, z) = sum_T gamma_T int_T calA~ grad G(., y) . grad G(., z).

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "polyinc/forward.hpp"
#include "polyinc/perturbation.hpp"
#include "polyinc/stats.hpp"

namespace polyinc {

/// Solution of div(gamma grad G) = -delta_s in the plane, gamma = gamma_up on
/// the side of the line the normal points to and gamma_down on the other.
struct BiphaseKernel {
  double gamma_up = 1;
  double gamma_down = 1;
  Vec2 origin{};      // a point on the line
  Vec2 normal{0, 1};  // unit; zero for a single-phase kernel
  Vec2 source{};

  static BiphaseKernel single(double gamma, Vec2 s) { return {gamma, gamma, Vec2{}, Vec2{}, s}; }
  static BiphaseKernel horizontal(double gamma_up, double gamma_down, double a, Vec2 s) {
    return make(gamma_up, gamma_down, {0, a}, {0, 1}, s);
  }
  static BiphaseKernel make(double gamma_up, double gamma_down, Vec2 origin, Vec2 normal, Vec2 s) {
    if (!(gamma_up > 0 && gamma_down > 0)) throw Error(ErrorCode::InvalidInput, "conductivities must be positive");
    BiphaseKernel k{gamma_up, gamma_down, origin, normal / norm(normal), s};
    if (std::abs(k.side_distance(s)) < 1e-12) throw Error(ErrorCode::SourceOnInterface, "source lies on the kernel line");
    return k;
  }

  bool has_line() const { return normal.x != 0 || normal.y != 0; }
  double side_distance(Vec2 x) const { return dot(x - origin, normal); }
  bool source_up() const { return !has_line() || side_distance(source) > 0; }
  double gamma_source() const { return source_up() ? gamma_up : gamma_down; }
  double gamma_other() const { return source_up() ? gamma_down : gamma_up; }
  /// Conductivity of the kernel at x.
  double gamma_at(Vec2 x) const {
    if (!has_line()) return gamma_up;
    return side_distance(x) >= 0 ? gamma_up : gamma_down;
  }
  Vec2 image() const { return source - normal * (2 * side_distance(source)); }
  double reflection() const {
    const double g1 = gamma_source(), g2 = gamma_other();
    return (g1 - g2) / (g1 + g2);
  }
  double transmission() const { return 1 + reflection(); }

  /// Value and gradient of the formula valid on one side of the line,
  /// continued analytically to x.
  std::pair<double, Vec2> eval_branch(Vec2 x, bool source_side) const {
    const double c = -1.0 / (2 * kPi * gamma_source());
    const Vec2 d = x - source;
    const double r2 = norm2(d);
    if (r2 == 0) throw Error(ErrorCode::InvalidInput, "kernel evaluated at its source");
    if (source_side) {
      double v = 0.5 * std::log(r2);
      Vec2 g = d / r2;
      if (has_line()) {
        const double R = reflection();
        const Vec2 di = x - image();
        const double ri2 = norm2(di);
        v += R * 0.5 * std::log(ri2);
        g += di * (R / ri2);
      }
      return {c * v, g * c};
    }
    const double T = transmission();
    return {c * T * 0.5 * std::log(r2), d * (c * T / r2)};
  }

  /// Value and gradient at x (x != source). On the line the source-side
  /// formula is used; both sides agree there.
  std::pair<double, Vec2> eval(Vec2 x) const {
    return eval_branch(x, !has_line() || side_distance(x) * side_distance(source) >= 0);
  }
};

namespace detail {

/// Degree-5 seven-point rule on a triangle.
template <class F>
double triangle_rule(Vec2 a, Vec2 b, Vec2 c, F&& f) {
  static constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115;
  static constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456;
  static constexpr double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
  auto P = [&](double l0, double l1, double l2) { return a * l0 + b * l1 + c * l2; };
  double s = w0 * f(P(1.0 / 3, 1.0 / 3, 1.0 / 3));
  s += w1 * (f(P(a1, b1, b1)) + f(P(b1, a1, b1)) + f(P(b1, b1, a1)));
  s += w2 * (f(P(a2, b2, b2)) + f(P(b2, a2, b2)) + f(P(b2, b2, a2)));
  return s * 0.5 * std::abs(cross(b - a, c - a));
}

template <class F>
double adaptive_triangle(Vec2 a, Vec2 b, Vec2 c, F& f, double whole, double tol, int depth) {
  const Vec2 ab = (a + b) * 0.5, bc = (b + c) * 0.5, ca = (c + a) * 0.5;
  const double q[4] = {triangle_rule(a, ab, ca, f), triangle_rule(ab, b, bc, f), triangle_rule(ca, bc, c, f),
                       triangle_rule(ab, bc, ca, f)};
  const double fine = q[0] + q[1] + q[2] + q[3];
  if (depth <= 0 || std::abs(fine - whole) <= tol) return fine + (fine - whole) / 63.0;
  return adaptive_triangle(a, ab, ca, f, q[0], tol / 2, depth - 1) +
         adaptive_triangle(ab, b, bc, f, q[1], tol / 2, depth - 1) +
         adaptive_triangle(ca, bc, c, f, q[2], tol / 2, depth - 1) +
         adaptive_triangle(ab, bc, ca, f, q[3], tol / 2, depth - 1);
}

/// Splits a convex polygon by the line through o with normal n.
inline std::pair<std::vector<Vec2>, std::vector<Vec2>> clip_convex(const std::vector<Vec2>& poly, Vec2 o, Vec2 n) {
  std::vector<Vec2> lo, hi;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % m];
    const double dp = dot(p - o, n), dq = dot(q - o, n);
    if (dp <= 0) lo.push_back(p);
    if (dp >= 0) hi.push_back(p);
    if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) {
      const Vec2 x = p + (q - p) * (dp / (dp - dq));
      lo.push_back(x);
      hi.push_back(x);
    }
  }
  if (lo.size() < 3) lo.clear();
  if (hi.size() < 3) hi.clear();
  return {lo, hi};
}

/// Convex pieces of a triangle on which every kernel is smooth.
inline std::vector<std::vector<Vec2>> smooth_pieces(std::array<Vec2, 3> tri,
                                                    std::initializer_list<const BiphaseKernel*> kernels) {
  std::vector<std::vector<Vec2>> pieces{{tri[0], tri[1], tri[2]}};
  for (const auto* k : kernels) {
    if (!k->has_line()) continue;
    std::vector<std::vector<Vec2>> next;
    for (const auto& p : pieces) {
      auto [lo, hi] = clip_convex(p, k->origin, k->normal);
      if (!lo.empty()) next.push_back(std::move(lo));
      if (!hi.empty()) next.push_back(std::move(hi));
    }
    pieces = std::move(next);
  }
  return pieces;
}

/// int over a convex polygon of grad G = boundary integral of G n.
inline Vec2 piece_gradient_integral(const std::vector<Vec2>& poly, const BiphaseKernel& k) {
  static constexpr std::array<double, 8> x{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                           -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                           0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> w{0.1012285362903763, 0.2223810344533745, 0.3137066519435957,
                                           0.3626837833783620, 0.3626837833783620, 0.3137066519435957,
                                           0.2223810344533745, 0.1012285362903763};
  double sa = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) sa += cross(poly[i], poly[(i + 1) % poly.size()]);
  const double orient = sa >= 0 ? 1.0 : -1.0;
  Vec2 s{};
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
    const Vec2 e = q - p;
    const Vec2 n = Vec2{e.y, -e.x} * orient;  // outward, scaled by length
    double g = 0;
    for (std::size_t j = 0; j < 8; ++j) g += w[j] * k.eval(p + e * (0.5 * (1 + x[j]))).first;
    s += n * (0.5 * g);
  }
  return s;
}

}  // namespace detail

/// Shared data for Green functions of the extended domain Omega_0.
struct GreenContext {
  std::shared_ptr<const Mesh> mesh;  // meshed with the chimney
  LayeredBackground bg;
  std::optional<Polygon> inclusion;
  double k = 1;
  double d0 = 0;
  double c1 = 8;
  std::vector<double> coef;
  std::shared_ptr<const DirichletProblem> problem;
  Polygon outer;  // boundary of Omega_0

  static GreenContext make(std::shared_ptr<const Mesh> mesh, const LayeredBackground& bg,
                           std::optional<Polygon> inclusion, double k, double d0, double c1 = 8) {
    if (!mesh->has_extension) throw Error(ErrorCode::InvalidInput, "Green functions need a mesh with the chimney");
    GreenContext c;
    c.bg = bg;
    c.inclusion = std::move(inclusion);
    c.k = k;
    c.d0 = d0;
    c.c1 = c1;
    c.coef = ConductivityField{bg, c.inclusion, k}.per_triangle(*mesh);
    c.problem = std::make_shared<const DirichletProblem>(*mesh, c.coef, mesh->node_mask(mesh->outer_boundary_nodes),
                                                         nullptr, Domain::Extended);
    const double L = bg.L;
    c.outer = Polygon({{-L, -L}, {L, -L}, {L, L}, {d0, L}, {d0, L + 2 * d0}, {-d0, L + 2 * d0}, {-d0, L}, {-L, L}});
    c.mesh = std::move(mesh);
    return c;
  }

  double gamma_at(Vec2 x) const {
    if (inclusion && inclusion->contains(x)) return k;
    return bg.gamma_at(x.y);
  }

  /// Points where the local structure is not a single straight line:
  /// vertices and interface crossings of the inclusion.
  std::vector<Vec2> corner_points() const {
    std::vector<Vec2> v;
    if (!inclusion) return v;
    v = inclusion->vertices();
    for (const auto& c : interface_crossings(*inclusion, bg)) v.push_back(c.point);
    return v;
  }

  /// Local kernel for a source: two-phase across the nearest inclusion side
  /// or interface if it passes within the admissible radius, else single-phase.
  BiphaseKernel kernel_for(Vec2 y) const {
    double r = distance_to_boundary(outer, y);
    for (Vec2 p : corner_points()) r = std::min(r, distance(p, y));
    double best = r;
    std::optional<BiphaseKernel> kern;
    if (inclusion) {
      const auto& P = *inclusion;
      for (std::size_t i = 0; i < P.size(); ++i) {
        const double d = point_segment_distance(y, P[i], P.vertex(static_cast<long>(i) + 1));
        if (d < best) {
          best = d;
          const Vec2 n = P.outward_normal(i);
          const Vec2 a = P[i], b = P.vertex(static_cast<long>(i) + 1);
          const double tau = std::clamp(dot(y - a, b - a) / norm2(b - a), 0.0, 1.0);
          const double gout = bg.gamma_at((a + (b - a) * tau).y);
          kern = BiphaseKernel::make(gout, k, P[i], n, y);
        }
      }
    }
    const auto ifs = bg.interfaces();
    for (std::size_t j = 0; j < ifs.size(); ++j) {
      const double d = std::abs(y.y - ifs[j]);
      if (d < best) {
        best = d;
        kern = BiphaseKernel::horizontal(bg.gammas[j + 1], bg.gammas[j], ifs[j], y);
      }
    }
    return kern ? *kern : BiphaseKernel::single(gamma_at(y), y);
  }
};

/// G(., y) = kernel + w with w a P1 field on the extended mesh.
struct GreenState {
  Vec2 source;
  BiphaseKernel kernel;
  Eigen::VectorXd correction;
  const GreenContext* ctx = nullptr;

  Vec2 gradient(std::size_t t, Vec2 x) const { return kernel.eval(x).second + ctx->mesh->gradient(t, correction); }
  double correction_h1() const {
    const Mesh& m = *ctx->mesh;
    double s = 0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tr = m.triangles[t];
      const double a = m.area(t);
      const double u0 = correction[tr[0]], u1 = correction[tr[1]], u2 = correction[tr[2]];
      s += a / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u0 * u2) + a * norm2(m.gradient(t, correction));
    }
    return std::sqrt(s);
  }
};

inline void check_source(const GreenContext& c, Vec2 y) {
  const double lim = c.d0 / c.c1;
  if (!c.outer.contains(y) || distance_to_boundary(c.outer, y) < lim)
    throw Error(ErrorCode::SourceTooCloseToVertex, "source closer than d0/c1 to the outer boundary");
  for (Vec2 p : c.corner_points())
    if (distance(p, y) < lim) throw Error(ErrorCode::SourceTooCloseToVertex, "source closer than d0/c1 to a vertex");
  if (c.inclusion && distance_to_boundary(*c.inclusion, y) == 0)
    throw Error(ErrorCode::SourceTooCloseToVertex, "source lies on the inclusion boundary");
}

/// Solves int gamma grad w . grad psi = -int (gamma - gamma_y) grad K . grad psi
/// with w = -K on the boundary of Omega_0.
inline GreenState green_state(Vec2 y, const GreenContext& c) {
  check_source(c, y);
  const Mesh& m = *c.mesh;
  GreenState g;
  g.source = y;
  g.kernel = c.kernel_for(y);
  g.ctx = &c;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<long>(m.num_nodes()));
  for (int i : m.outer_boundary_nodes) u[i] = -g.kernel.eval(m.nodes[static_cast<std::size_t>(i)]).first;
  const auto& pb = *c.problem;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<long>(pb.free_nodes().size()));
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    const std::array<Vec2, 3> P{m.nodes[tr[0]], m.nodes[tr[1]], m.nodes[tr[2]]};
    Vec2 flux{};
    bool any = false;
    for (const auto& piece : detail::smooth_pieces(P, {&g.kernel})) {
      Vec2 c0{};
      for (Vec2 p : piece) c0 += p / static_cast<double>(piece.size());
      const double dg = c.coef[t] - g.kernel.gamma_at(c0);
      if (dg == 0) continue;
      flux += detail::piece_gradient_integral(piece, g.kernel) * dg;
      any = true;
    }
    if (!any) continue;
    const auto gr = m.gradients(t);
    for (int i = 0; i < 3; ++i) {
      const int r = pb.free_index(tr[i]);
      if (r >= 0) load[r] -= dot(flux, gr[static_cast<std::size_t>(i)]);
    }
  }
  g.correction = pb.solve(u, &load);
  return g;
}

/// sum over the support of gamma_T int_T calA_T grad G(., y) . grad G(., z),
/// with calA scaled by `scale`.
inline double S0(const GreenState& gy, const GreenState& gz, const DisplacementField& U, double scale = 1.0,
                 double rel_tol = 1e-8) {
  const Mesh& m = *U.mesh;
  const auto& coef = gy.ctx->coef;
  for (Vec2 s : {gy.source, gz.source}) {
    const auto hit = MeshLocator(m).locate(s);
    bool inside = false;
    if (hit.triangle >= 0)
      for (int v : m.triangles[static_cast<std::size_t>(hit.triangle)]) inside = inside || norm(U.values[static_cast<std::size_t>(v)]) > 0;
    if (inside)
      throw Error(ErrorCode::OffsetOutOfRange, "source lies inside the displacement strip");
  }
  double total = 0;
  for (int tri : U.support) {
    const auto t = static_cast<std::size_t>(tri);
    const Mat2 M = calA(U.grad[t]) * (coef[t] * scale);
    if (M.max_abs() == 0) continue;
    const auto& tr = m.triangles[t];
    const std::array<Vec2, 3> P{m.nodes[tr[0]], m.nodes[tr[1]], m.nodes[tr[2]]};
    const Vec2 wy = m.gradient(t, gy.correction), wz = m.gradient(t, gz.correction);
    auto f = [&](Vec2 x) {
      const Vec2 a = gy.kernel.eval(x).second + wy;
      const Vec2 b = gz.kernel.eval(x).second + wz;
      return dot(M * a, b);
    };
    for (const auto& piece : detail::smooth_pieces(P, {&gy.kernel, &gz.kernel}))
      for (std::size_t i = 1; i + 1 < piece.size(); ++i) {
        const double q = detail::triangle_rule(piece[0], piece[i], piece[i + 1], f);
        total += detail::adaptive_triangle(piece[0], piece[i], piece[i + 1], f, q, rel_tol * std::abs(q) + 1e-300, 8);
      }
  }
  return total;
}

/// Boundary form int_{dP} (U.n)(k - gamma) M grad u_i . grad v_i with
/// M = tt^T + (k/gamma) nn^T and interior traces. Tangential derivatives
/// come from the trace, normal fluxes from the average of both sides;
/// 8-point Gauss on each mesh edge of the inclusion boundary.
inline double S0_boundary_form(const GreenState& gy, const GreenState& gz, const DisplacementField& U,
                               double scale = 1.0) {
  static constexpr std::array<double, 4> x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                           0.9602898564975363};
  static constexpr std::array<double, 4> w{0.3626837833783620, 0.3137066519435957, 0.2223810344533745,
                                           0.1012285362903763};
  const Mesh& m = *U.mesh;
  const GreenContext& c = *gy.ctx;
  if (!c.inclusion) return 0;
  const Polygon& P = *c.inclusion;
  std::map<std::pair<int, int>, std::array<int, 2>> sides;  // (inside, outside) triangles
  for (const auto& ce : m.constraint_edges)
    if (ce.kind == EdgeKind::PolygonSide) sides[std::minmax(ce.a, ce.b)] = {-1, -1};
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tr = m.triangles[t];
    for (int e = 0; e < 3; ++e) {
      const auto it = sides.find(std::minmax(tr[e], tr[(e + 1) % 3]));
      if (it != sides.end()) it->second[m.tags[t].inclusion ? 0 : 1] = static_cast<int>(t);
    }
  }
  double total = 0;
  for (const auto& ce : m.constraint_edges) {
    if (ce.kind != EdgeKind::PolygonSide) continue;
    const auto [tin, tout] = sides.at(std::minmax(ce.a, ce.b));
    if (tin < 0 || tout < 0) throw Error(ErrorCode::NonConformingMesh, "inclusion side without triangles on both sides");
    const Vec2 a = m.nodes[static_cast<std::size_t>(ce.a)], b = m.nodes[static_cast<std::size_t>(ce.b)];
    const Vec2 ua = U.values[static_cast<std::size_t>(ce.a)], ub = U.values[static_cast<std::size_t>(ce.b)];
    const Vec2 n = P.outward_normal(static_cast<std::size_t>(ce.index)), tan{-n.y, n.x};
    const auto Ti = static_cast<std::size_t>(tin), To = static_cast<std::size_t>(tout);
    const double len = distance(a, b);
    const double gout = c.coef[To];
    const double gin = c.coef[Ti];
    auto trace = [&](const GreenState& g, Vec2 p) {
      const Vec2 gi = g.kernel.eval(p - n * (1e-9 * len)).second + m.gradient(Ti, g.correction);
      const Vec2 go = g.kernel.eval(p + n * (1e-9 * len)).second + m.gradient(To, g.correction);
      const double flux = 0.5 * (gin * dot(gi, n) + gout * dot(go, n));
      return std::pair<double, double>{0.5 * (dot(gi, tan) + dot(go, tan)), flux / gin};
    };
    double s = 0;
    for (int sgn : {-1, 1})
      for (std::size_t j = 0; j < 4; ++j) {
        const double tau = 0.5 * (1 + sgn * x[j]);
        const Vec2 p = a + (b - a) * tau;
        const auto [ut, un] = trace(gy, p);
        const auto [vt, vn] = trace(gz, p);
        const Vec2 u = ua * (1 - tau) + ub * tau;
        s += w[j] * dot(u, n) * (ut * vt + (gin / gout) * un * vn);
      }
    total += 0.5 * len * s * (gin - gout);
  }
  return total * scale;
}

/// b = (U.grad u) grad v + (U.grad v) grad u - (grad u . grad v) U; on
/// triangles where u, v are affine, calA grad u . grad v = -div b.
inline Vec2 shape_flux_field(Vec2 U, Vec2 gu, Vec2 gv) {
  return gv * dot(U, gu) + gu * dot(U, gv) - U * dot(gu, gv);
}

struct ProbeRow {
  double r = 0;
  double S0 = 0;
};

struct ProbeResult {
  std::vector<ProbeRow> rows;
  double slope = 0;
  double intercept = 0;
  double residual = 0;  // rms of the log-log fit
  Vec2 point, normal;
};

/// S0(y_r, y_r) for y_r = P + r n(P), P the midpoint of the given side of
/// U.p0, with calA normalized by |V|.
inline ProbeResult S0_probe(const VertexCorrespondence& corr, int side, std::vector<double> r_list,
                            const GreenContext& c, const DisplacementField& U, double h_local) {
  const Polygon& p0 = corr.p0;
  if (side < 0 || static_cast<std::size_t>(side) >= p0.size()) throw Error(ErrorCode::InvalidInput, "side index out of range");
  if (r_list.empty()) throw Error(ErrorCode::OffsetOutOfRange, "no offsets given");
  ProbeResult res;
  res.point = (p0[static_cast<std::size_t>(side)] + p0.vertex(side + 1)) * 0.5;
  res.normal = p0.outward_normal(static_cast<std::size_t>(side));
  for (std::size_t j = 0; j < p0.size(); ++j)
    if (distance(p0[j], res.point) < c.d0 / c.c1)
      throw Error(ErrorCode::SourceTooCloseToVertex, "probe point closer than d0/c1 to a vertex");
  std::sort(r_list.begin(), r_list.end());
  const double lo = 10 * h_local, hi = c.d0 / 8;
  for (double r : r_list)
    if (r < lo * (1 - 1e-12) || r > hi * (1 + 1e-12))
      throw Error(ErrorCode::OffsetOutOfRange, "offset " + std::to_string(r) + " outside [10h, d0/8]");
  const double scale = corr.normV > 0 ? 1.0 / corr.normV : 0.0;
  std::vector<double> xs, ys;
  for (double r : r_list) {
    const auto g = green_state(res.point + res.normal * r, c);
    res.rows.push_back({r, S0(g, g, U, scale)});
    xs.push_back(r);
    ys.push_back(res.rows.back().S0);
  }
  bool nonzero = false;
  for (double v : ys) nonzero = nonzero || v != 0;
  if (xs.size() >= 2 && nonzero) {
    const auto f = loglog_fit(xs, ys);
    res.slope = f[0];
    res.intercept = f[1];
    res.residual = f[2];
  }
  return res;
}

/// Probe configuration: mesh graded towards the midpoint of the probed side,
/// with the chimney, and the normal translation of that side by delta.
struct ProbeSetup {
  VertexCorrespondence corr;
  std::shared_ptr<const Mesh> mesh;
  GreenContext ctx;
  DisplacementField U;
  double h_local = 0;
};

inline ProbeSetup make_probe(const Polygon& p0, int side, double delta, const LayeredBackground& bg,
                             const AprioriData& a, double h, double h_local, double grading = 0.15) {
  ProbeSetup s;
  const auto i = static_cast<std::size_t>(side);
  const Vec2 P = (p0[i] + p0.vertex(side + 1)) * 0.5;
  const Vec2 n = p0.outward_normal(i);
  std::vector<Vec2> v = p0.vertices();
  v[i] += n * delta;
  v[(i + 1) % v.size()] += n * delta;
  s.corr = correspond_aligned(p0, Polygon(v), bg);
  MeshOptions mo;
  mo.extension_d0 = a.d0;
  mo.sizing = [P, h_local, grading](Vec2 x) { return std::max(h_local, grading * distance(x, P)); };
  s.mesh = std::make_shared<const Mesh>(triangulate(bg, p0, h, mo));
  s.h_local = h_local;
  s.ctx = GreenContext::make(s.mesh, bg, p0, a.k, a.d0);
  DisplacementOptions dopt;
  dopt.width = 5 * h_local;
  dopt.enforce_bound = false;
  s.U = build_displacement(s.corr, s.mesh, bg, a, dopt);
  return s;
}

}  // namespace polyinc
