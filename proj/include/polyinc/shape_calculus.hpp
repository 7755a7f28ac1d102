#pragma once

// F(t, f, g) = <Lambda_{P^t} f, g> along Phi_t = I + tU, its distributed
// derivative sum_T gamma calA grad u0 . grad v0, the material derivative,
// and the DtN directional derivative.

#include <memory>
#include <vector>

#include "polyinc/dtn.hpp"
#include "polyinc/forward.hpp"
#include "polyinc/perturbation.hpp"
#include "polyinc/stats.hpp"

namespace polyinc {

enum class EvalMode { Pullback, Remesh };

inline EvalMode parse_mode(const std::string& s) {
  if (s == "pullback") return EvalMode::Pullback;
  if (s == "remesh") return EvalMode::Remesh;
  throw Error(ErrorCode::InvalidInput, "mode must be 'pullback' or 'remesh'");
}

/// Everything needed to evaluate F along one perturbation family.
struct ShapeContext {
  LayeredBackground bg;
  double k = 1;
  Polygon p0;
  Polygon p1;  // vertex-aligned with p0
  std::shared_ptr<const Mesh> mesh;
  DisplacementField field;
  std::vector<double> coef;  // gamma_{P0} per triangle
  double h = 0;
  MeshOptions mesh_options;

  ConductivityField gamma0() const { return {bg, p0, k}; }
  std::size_t boundary_size() const { return mesh->boundary_nodes.size(); }

  static ShapeContext build(const VertexCorrespondence& corr, const LayeredBackground& bg, const AprioriData& a,
                            double h, const DisplacementOptions& dopt = {}, const MeshOptions& mopt = {}) {
    ShapeContext c;
    c.bg = bg;
    c.k = a.k;
    c.p0 = corr.p0;
    c.p1 = corr.p1;
    c.h = h;
    c.mesh_options = mopt;
    c.mesh = std::make_shared<const Mesh>(triangulate(bg, corr.p0, h, mopt));
    c.field = build_displacement(corr, c.mesh, bg, a, dopt);
    c.coef = c.gamma0().per_triangle(*c.mesh);
    return c;
  }

  /// Context with a different direction field on the same mesh.
  ShapeContext with_field(DisplacementField u) const {
    ShapeContext c = *this;
    c.field = std::move(u);
    return c;
  }
};

/// Solves the A(t)-weighted problem on the fixed mesh.
inline DiscreteSolution solve_pullback(const Mesh& m, const ConductivityField& gamma0, const FamilyMap& fm,
                                       const Eigen::VectorXd& f) {
  const auto A = fm.field->A(fm.t);
  return solve_dirichlet(m, gamma0, f, fm.t == 0 ? nullptr : &A);
}

namespace detail {

inline Eigen::VectorXd solve_with(const ShapeContext& c, const std::vector<Mat2>* A, const Eigen::VectorXd& f) {
  const DirichletProblem pb(*c.mesh, c.coef, square_boundary_mask(*c.mesh), A);
  return pb.solve(scatter_boundary(*c.mesh, f));
}

inline Polygon polygon_at(const ShapeContext& c, double t) { return interpolate_polygon(c.p0, c.p1, t); }

}  // namespace detail

/// F(t, f, g). Pullback: sum gamma A(t) grad u_t . grad v_t on the fixed
/// mesh. Remesh: <Lambda f, g> on a fresh mesh of P^t.
inline double F_value(double t, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ShapeContext& c,
                      EvalMode mode = EvalMode::Pullback) {
  if (mode == EvalMode::Pullback) {
    const auto A = c.field.A(t);
    const Eigen::VectorXd u = detail::solve_with(c, &A, f);
    const Eigen::VectorXd v = detail::solve_with(c, &A, g);
    return energy_pairing(*c.mesh, c.coef, u, v, &A);
  }
  const Polygon pt = detail::polygon_at(c, t);
  const Mesh mt = triangulate(c.bg, pt, c.h, c.mesh_options);
  const auto op = dtn_matrix(mt, ConductivityField{c.bg, pt, c.k});
  const Eigen::MatrixXd P = boundary_prolongation(boundary_trace_space(*c.mesh), op.space);
  return pairing(op, P * f, P * g);
}

/// F(t) - F(0) in pullback mode, evaluated as sum gamma (A(t) - I) grad u_t . grad v_0
/// so that no cancellation occurs for small t.
inline double F_difference(double t, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ShapeContext& c) {
  const auto A = c.field.A(t);
  const auto D = c.field.A_minus_I(t);
  const Eigen::VectorXd ut = detail::solve_with(c, &A, f);
  const Eigen::VectorXd v0 = detail::solve_with(c, nullptr, g);
  double s = 0;
  for (int tri : c.field.support) {
    const auto T = static_cast<std::size_t>(tri);
    s += c.coef[T] * c.mesh->area(T) * dot(D[T] * c.mesh->gradient(T, ut), c.mesh->gradient(T, v0));
  }
  return s;
}

struct DerivativeAssembly {
  double value = 0;
  std::vector<std::pair<int, double>> per_triangle;  // (triangle, contribution)
  Eigen::VectorXd u0, v0;
};

/// F'(0, f, g) = sum_T gamma_T area_T calA_T grad u0 . grad v0.
inline DerivativeAssembly gateaux(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ShapeContext& c) {
  DerivativeAssembly d;
  d.u0 = detail::solve_with(c, nullptr, f);
  d.v0 = detail::solve_with(c, nullptr, g);
  for (int tri : c.field.support) {
    const auto T = static_cast<std::size_t>(tri);
    const double v = c.coef[T] * c.mesh->area(T) *
                     dot(calA(c.field.grad[T]) * c.mesh->gradient(T, d.u0), c.mesh->gradient(T, d.v0));
    d.per_triangle.emplace_back(tri, v);
    d.value += v;
  }
  return d;
}

/// Material derivative: zero Dirichlet data, load -sum gamma calA grad u0 . grad psi.
inline DiscreteSolution material_derivative(const Eigen::VectorXd& f, const ShapeContext& c) {
  const Mesh& m = *c.mesh;
  const DirichletProblem pb(m, c.coef, square_boundary_mask(m));
  const Eigen::VectorXd u0 = pb.solve(scatter_boundary(m, f));
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<long>(pb.free_nodes().size()));
  for (int tri : c.field.support) {
    const auto T = static_cast<std::size_t>(tri);
    const Vec2 flux = calA(c.field.grad[T]) * m.gradient(T, u0) * (c.coef[T] * m.area(T));
    const auto gr = m.gradients(T);
    for (int i = 0; i < 3; ++i) {
      const int r = pb.free_index(m.triangles[T][static_cast<std::size_t>(i)]);
      if (r >= 0) load[r] -= dot(flux, gr[static_cast<std::size_t>(i)]);
    }
  }
  DiscreteSolution s;
  s.coeffs = pb.solve(Eigen::VectorXd::Zero(static_cast<long>(m.num_nodes())), &load);
  s.dirichlet_data = Eigen::VectorXd::Zero(static_cast<long>(m.boundary_nodes.size()));
  return s;
}

/// Variational conormal derivative <gamma d(udot)/dn, g>: the boundary rows
/// of K udot paired with g.
inline double boundary_flux(const ShapeContext& c, const Eigen::VectorXd& udot, const Eigen::VectorXd& g) {
  const Mesh& m = *c.mesh;
  const auto K = assemble_stiffness(m, c.coef);
  const Eigen::VectorXd r = K * udot;
  double s = 0;
  for (std::size_t i = 0; i < m.boundary_nodes.size(); ++i) s += g[static_cast<long>(i)] * r[m.boundary_nodes[i]];
  return s;
}

/// (u~_t - u0)/t from the exact difference equation K(t) z = -[(A(t)-I) terms] u0.
inline Eigen::VectorXd pullback_difference_quotient(double t, const Eigen::VectorXd& f, const ShapeContext& c) {
  const Mesh& m = *c.mesh;
  const auto A = c.field.A(t);
  const auto D = c.field.A_minus_I(t);
  const DirichletProblem p0(m, c.coef, square_boundary_mask(m));
  const Eigen::VectorXd u0 = p0.solve(scatter_boundary(m, f));
  const DirichletProblem pt(m, c.coef, square_boundary_mask(m), &A);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<long>(pt.free_nodes().size()));
  for (int tri : c.field.support) {
    const auto T = static_cast<std::size_t>(tri);
    const Vec2 flux = D[T] * m.gradient(T, u0) * (c.coef[T] * m.area(T));
    const auto gr = m.gradients(T);
    for (int i = 0; i < 3; ++i) {
      const int r = pt.free_index(m.triangles[T][static_cast<std::size_t>(i)]);
      if (r >= 0) load[r] -= dot(flux, gr[static_cast<std::size_t>(i)]);
    }
  }
  return pt.solve(Eigen::VectorXd::Zero(static_cast<long>(m.num_nodes())), &load) / t;
}

/// Derivative at t0 along the same family. Pullback: on the mapped mesh
/// Phi_t0(T) with the field re-extended around Phi_t0(P0). Remesh: on a
/// fresh mesh of P^t0 with vertex velocities P1 - P0.
inline double gateaux_at(double t0, const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ShapeContext& c,
                         EvalMode mode = EvalMode::Pullback) {
  if (t0 < 0 || t0 > 1) throw Error(ErrorCode::InvalidInput, "t0 must lie in [0, 1]");
  ShapeContext ct = c;
  if (mode == EvalMode::Pullback) {
    if (t0 == 0) return gateaux(f, g, c).value;
    auto mapped = std::make_shared<const Mesh>(c.mesh->with_nodes(c.field.mapped_nodes(t0)));
    ct.field = reextend(c.field, mapped, c.bg);
    ct.mesh = std::move(mapped);
    return gateaux(f, g, ct).value;
  }
  const Polygon pt = detail::polygon_at(c, t0);
  ct.mesh = std::make_shared<const Mesh>(triangulate(c.bg, pt, c.h, c.mesh_options));
  ct.p0 = pt;
  ct.coef = ConductivityField{c.bg, pt, c.k}.per_triangle(*ct.mesh);
  std::vector<Vec2> vd(pt.size());
  for (std::size_t j = 0; j < pt.size(); ++j) vd[j] = c.p1[j] - c.p0[j];
  const auto cr = interface_crossings(pt, c.bg);
  std::vector<Vec2> cd;
  for (const auto& x : cr) {
    const auto s = static_cast<std::size_t>(x.side), e = (s + 1) % pt.size();
    cd.push_back(crossing_velocity(pt[s], pt[e], vd[s], vd[e], x.tau));
  }
  ct.field = extend_displacement(ct.mesh, pt, c.bg, vd, cr, cd, c.field.width);
  const Eigen::MatrixXd P = boundary_prolongation(boundary_trace_space(*c.mesh), boundary_trace_space(*ct.mesh));
  return gateaux(P * f, P * g, ct).value;
}

/// Lambda'[a, b] = F'(e_a, e_b) for one direction field, from the harmonic
/// liftings of all boundary hat functions.
inline Eigen::MatrixXd dtn_derivative(const DisplacementField& u, const Mesh& m, const std::vector<double>& coef,
                                      const Eigen::MatrixXd& Z) {
  const long nb = Z.cols();
  Eigen::MatrixXd Lp = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd G(2, nb);
  for (int tri : u.support) {
    const auto T = static_cast<std::size_t>(tri);
    const auto gr = m.gradients(T);
    const auto& tr = m.triangles[T];
    G.setZero();
    for (int i = 0; i < 3; ++i) {
      G.row(0) += gr[static_cast<std::size_t>(i)].x * Z.row(tr[static_cast<std::size_t>(i)]);
      G.row(1) += gr[static_cast<std::size_t>(i)].y * Z.row(tr[static_cast<std::size_t>(i)]);
    }
    const Mat2 a = calA(u.grad[T]) * (coef[T] * m.area(T));
    Eigen::Matrix2d A;
    A << a.a, a.b, a.c, a.d;
    Lp.noalias() += G.transpose() * A * G;
  }
  return Lp;
}

inline Eigen::MatrixXd dtn_derivative(const ShapeContext& c) {
  const auto lift = boundary_lifting(*c.mesh, c.coef);
  return dtn_derivative(c.field, *c.mesh, c.coef, lift.Z);
}

struct Telescoping {
  double difference = 0;  // F(1) - F(0)
  double quadrature = 0;  // Gauss-Legendre integral of F'(t) over [0, 1]
  double relative_gap() const { return std::abs(difference - quadrature) / std::max(std::abs(difference), 1e-300); }
};

inline Telescoping telescoping(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const ShapeContext& c,
                               EvalMode mode = EvalMode::Pullback, int nodes = 8) {
  Telescoping r;
  r.difference = mode == EvalMode::Pullback ? F_difference(1.0, f, g, c) : F_value(1.0, f, g, c, mode) - F_value(0.0, f, g, c, mode);
  const auto [x, w] = gauss_legendre01(nodes);
  for (std::size_t i = 0; i < x.size(); ++i) r.quadrature += w[i] * gateaux_at(x[i], f, g, c, mode);
  return r;
}

}  // namespace polyinc
