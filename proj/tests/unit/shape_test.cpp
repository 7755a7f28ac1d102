#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "polyinc/shape_calculus.hpp"
#include "polyinc/stats.hpp"

using namespace polyinc;
using fixtures::two_layers;

namespace {

AprioriData shape_apriori() {
  AprioriData a = fixtures::apriori();
  a.c0 = 2;
  return a;
}

Mat2 random_mat(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng), u(rng)};
}

// Translated square, h = 0.05; built once.
struct Translated {
  LayeredBackground bg = two_layers();
  AprioriData a = shape_apriori();
  VertexCorrespondence corr;
  ShapeContext c;
  Eigen::VectorXd f, g;
  double dF = 0;
  Translated() {
    const Polygon p0 = fixtures::square(0.3);
    corr = match_vertices(p0, p0.translated({0.003, 0}), bg, a);
    c = ShapeContext::build(corr, bg, a, 0.05);
    f = boundary_trace(*c.mesh, [](Vec2 p) { return p.x + 0.3 * p.y * p.y; });
    g = boundary_trace(*c.mesh, [](Vec2 p) { return std::sin(2 * p.x) + p.y; });
    dF = gateaux(f, g, c).value;
  }
};

const Translated& translated() {
  static const Translated T;
  return T;
}

// Square straddling the interface, sheared so that both crossings move.
ShapeContext sheared_context(double s, double h) {
  const auto bg = two_layers();
  const Polygon p0 = fixtures::square(0.3);
  const auto corr = match_vertices(p0, fixtures::sheared(p0, s), bg, shape_apriori());
  return ShapeContext::build(corr, bg, shape_apriori(), h);
}

}  // namespace

// --- pullback coefficient ----------------------------------------------------

TEST(Pullback, ClosedFormMatchesDefinition) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat2 B = random_mat(rng, 0.4);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    const Mat2 M = Mat2::identity() + B * t;
    const Mat2 Mi = M.inverse();
    const Mat2 ref = Mi * Mi.transpose() * M.det();
    EXPECT_LE((pullback_A(B, t) - ref).max_abs(), 1e-13);
    EXPECT_LE((pullback_A_minus_I(B, t) + Mat2::identity() - ref).max_abs(), 1e-13);
  }
  EXPECT_EQ(pullback_A(Mat2::zero(), 0.7).max_abs(), 1.0);
}

TEST(Pullback, LinearizationIsTheShapeTensor) {
  std::mt19937_64 rng(5);
  const Mat2 B = random_mat(rng, 1.0);
  const Mat2 calB = calA(B);
  EXPECT_NEAR(calB.a, B.d - B.a, 1e-15);
  EXPECT_NEAR(calB.b, -(B.b + B.c), 1e-15);
  EXPECT_NEAR(calB.trace(), 0.0, 1e-15);
  std::vector<double> ts, errs;
  for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
    ts.push_back(t);
    errs.push_back((pullback_A_minus_I(B, t) * (1 / t) - calB).max_abs());
  }
  EXPECT_GE(loglog_slope(ts, errs), 0.95);
  EXPECT_LE(errs.back(), 1e-3);
}

// --- displacement field ------------------------------------------------------

TEST(Displacement, TranslationField) {
  const auto& T = translated();
  const auto& U = T.c.field;
  for (const auto& mp : T.corr.pairs) EXPECT_LE(norm(U.at(mp.p0) - (mp.p1 - mp.p0)), 1e-15);
  // A translation is reproduced along the sides; the interface keeps it horizontal.
  EXPECT_NEAR(U.sup_norm(), T.corr.dH, 1e-15);
  EXPECT_LE(U.strip_bound_lhs(), U.C0 * U.dH * (1 + 1e-12));
  for (std::size_t i = 0; i < T.c.mesh->num_nodes(); ++i) {
    const Vec2 x = T.c.mesh->nodes[i];
    if (distance_to_boundary(T.corr.p0, x) > U.width + 1e-12) EXPECT_EQ(U.values[i], Vec2{}) << x.x << "," << x.y;
    if (x.y == 0) EXPECT_EQ(U.values[i].y, 0.0);
  }
  for (int t : U.support) {
    bool near = false;
    for (int v : T.c.mesh->triangles[static_cast<std::size_t>(t)])
      near = near || distance_to_boundary(T.corr.p0, T.c.mesh->nodes[static_cast<std::size_t>(v)]) <= U.width + 1e-12;
    EXPECT_TRUE(near);
  }
}

TEST(Displacement, CrossingsSlideAlongTheInterface) {
  const auto c = sheared_context(0.01, 0.08);
  const auto& U = c.field;
  for (const auto& mp : match_vertices(c.p0, c.p1, c.bg, shape_apriori()).pairs) {
    const Vec2 u = U.at(mp.p0);
    if (mp.crossing) {
      EXPECT_EQ(u.y, 0.0);
      EXPECT_NEAR(u.x, mp.p1.x - mp.p0.x, 1e-14);
    } else {
      EXPECT_LE(norm(u - (mp.p1 - mp.p0)), 1e-15);
    }
  }
  // Phi_1 carries the boundary of P0 onto P1 and the layers onto themselves.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const ConductivityField g0{c.bg, c.p0, c.k}, g1{c.bg, c.p1, c.k};
  int checked = 0;
  for (int s = 0; s < 20000; ++s) {
    const Vec2 x{0.5 * u(rng), 0.5 * u(rng)};
    if (distance_to_boundary(c.p0, x) < 1e-9 || std::abs(x.y) < 1e-9) continue;
    const Vec2 y = phi({&U, 1.0}, x);
    EXPECT_EQ(g0.at(x), g1.at(y)) << x.x << "," << x.y;
    ++checked;
  }
  EXPECT_GT(checked, 19000);
}

TEST(Displacement, IdenticalPolygonsGiveTheZeroField) {
  const auto bg = two_layers();
  const Polygon p0 = fixtures::hexagon();
  const auto corr = match_vertices(p0, p0, bg, shape_apriori());
  EXPECT_LE(corr.dH, 1e-15);
  const auto c = ShapeContext::build(corr, bg, shape_apriori(), 0.1);
  EXPECT_EQ(c.field.sup_norm(), 0.0);
  EXPECT_TRUE(c.field.support.empty());
  const auto f = boundary_trace(*c.mesh, [](Vec2 p) { return p.x * p.y; });
  EXPECT_EQ(gateaux(f, f, c).value, 0.0);
}

TEST(Displacement, MapPropertiesHoldOnRandomPairs) {
  std::mt19937_64 rng(11);
  const auto bg = two_layers();
  const auto a = shape_apriori();
  for (int trial = 0; trial < 3; ++trial) {
    const auto [p0, p1] = fixtures::random_pair(rng, bg, a, a.delta0() / 5);
    const auto corr = match_vertices(p0, p1, bg, a);
    auto mesh = std::make_shared<const Mesh>(triangulate(bg, p0, 0.08));
    const auto U = build_displacement(corr, mesh, bg, a);
    const auto rep = verify_phi_properties({&U, 1.0}, bg, 100000, 100 + static_cast<std::uint64_t>(trial));
    for (const auto& ch : rep.checks) EXPECT_TRUE(ch.passed) << ch.name << " ratio " << ch.max_ratio;
  }
}

TEST(Displacement, InverseGradientDefectIsQuadratic) {
  const auto bg = two_layers();
  const auto a = shape_apriori();
  const Polygon p0 = fixtures::square(0.3);
  auto mesh = std::make_shared<const Mesh>(triangulate(bg, p0, 0.08));
  std::vector<double> eps, defect;
  for (double e : {0.01, 0.005, 0.0025}) {
    const auto U = build_displacement(match_vertices(p0, fixtures::vertex_moved(p0, 2, {e, 0.5 * e}), bg, a), mesh, bg, a);
    double worst = 0;
    for (int t : U.support) {
      const Mat2 B = U.grad[static_cast<std::size_t>(t)];
      const Mat2 Mi = (Mat2::identity() + B).inverse();
      worst = std::max(worst, (B - Mi * B * Mi).norm2());
    }
    eps.push_back(e);
    defect.push_back(worst);
  }
  EXPECT_GE(loglog_slope(eps, defect), 1.9);
}

TEST(Displacement, StripBoundViolationIsReported) {
  const auto bg = two_layers();
  const AprioriData a = shape_apriori();
  const Polygon p0 = fixtures::square(0.3);
  // A strip much thinner than d0 on a mesh refined at the moved vertex.
  MeshOptions mo;
  mo.sizing = [v = p0[2]](Vec2 x) { return std::max(0.004, 0.2 * distance(x, v)); };
  auto mesh = std::make_shared<const Mesh>(triangulate(bg, p0, 0.1, mo));
  const auto corr = match_vertices(p0, fixtures::vertex_moved(p0, 2, {0.015, 0}), bg, a);
  DisplacementOptions thin;
  thin.width = 0.01;
  try {
    build_displacement(corr, mesh, bg, a, thin);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StripBoundViolation);
  }
  thin.enforce_bound = false;
  const auto U = build_displacement(corr, mesh, bg, a, thin);
  EXPECT_GT(U.strip_bound_lhs(), U.C0 * U.dH);
  EXPECT_NO_THROW(build_displacement(corr, mesh, bg, a));
}

// --- shape derivative ----------------------------------------------------------

TEST(ShapeDerivative, ValueAtZeroIsTheDtNPairing) {
  const auto& T = translated();
  const auto op = dtn_matrix(*T.c.mesh, T.c.gamma0());
  const double ref = pairing(op, T.f, T.g);
  EXPECT_NEAR(F_value(0, T.f, T.g, T.c), ref, 1e-10 * std::abs(ref));
  EXPECT_NEAR(F_value(0, T.f, T.g, T.c, EvalMode::Remesh), ref, 1e-10 * std::abs(ref));
  EXPECT_EQ(F_difference(0, T.f, T.g, T.c), 0.0);
}

TEST(ShapeDerivative, SymmetricLinearAndLocal) {
  const auto& T = translated();
  const auto fg = gateaux(T.f, T.g, T.c), gf = gateaux(T.g, T.f, T.c);
  EXPECT_NEAR(fg.value, gf.value, 1e-12 * std::abs(fg.value));
  const auto V = unit_vertex_field(T.c.mesh, T.c.p0, T.bg, 1, {0.3, -0.7}, T.c.field.width);
  const double dV = gateaux(T.f, T.g, T.c.with_field(V)).value;
  const double dmix = gateaux(T.f, T.g, T.c.with_field(T.c.field.combined(2.0, V, -0.5))).value;
  EXPECT_NEAR(dmix, 2 * fg.value - 0.5 * dV, 1e-10 * (std::abs(fg.value) + std::abs(dV)));
  std::set<int> support(T.c.field.support.begin(), T.c.field.support.end());
  double sum = 0;
  for (const auto& [t, v] : fg.per_triangle) {
    EXPECT_TRUE(support.count(t));
    sum += v;
  }
  EXPECT_NEAR(sum, fg.value, 1e-12 * std::abs(fg.value));
}

TEST(ShapeDerivative, FiniteDifferencesConvergeAtFirstOrder) {
  const auto& T = translated();
  std::vector<double> ts, errs;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    ts.push_back(t);
    errs.push_back(std::abs(F_difference(t, T.f, T.g, T.c) / t - T.dF));
  }
  EXPECT_GE(loglog_slope(ts, errs), 0.9);
  EXPECT_LE(errs.back(), 1e-3 * std::abs(T.dF));
}

TEST(ShapeDerivative, FiniteDifferencesAcrossTheInterface) {
  const auto c = sheared_context(0.01, 0.06);
  const auto f = boundary_trace(*c.mesh, [](Vec2 p) { return p.y + 0.2 * p.x * p.x; });
  const double dF = gateaux(f, f, c).value;
  std::vector<double> ts, errs;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    ts.push_back(t);
    errs.push_back(std::abs(F_difference(t, f, f, c) / t - dF));
  }
  EXPECT_GE(loglog_slope(ts, errs), 0.9);
}

TEST(ShapeDerivative, MaterialDerivativeFluxIdentity) {
  const auto& T = translated();
  const auto ud = material_derivative(T.f, T.c);
  EXPECT_NEAR(boundary_flux(T.c, ud.coeffs, T.g), T.dF, 1e-9 * std::max(1.0, std::abs(T.dF)));
  for (long b : T.c.mesh->boundary_nodes) EXPECT_EQ(ud.coeffs[b], 0.0);
  std::vector<double> ts, errs;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    ts.push_back(t);
    errs.push_back(h1_norm(*T.c.mesh, pullback_difference_quotient(t, T.f, T.c) - ud.coeffs));
  }
  EXPECT_GE(loglog_slope(ts, errs), 0.95);
}

TEST(ShapeDerivative, DerivativeAlongTheFamily) {
  const auto& T = translated();
  EXPECT_NEAR(gateaux_at(0.0, T.f, T.g, T.c), T.dF, 1e-12 * std::abs(T.dF));
  EXPECT_NEAR(gateaux_at(0.0, T.f, T.g, T.c, EvalMode::Remesh), T.dF, 1e-10 * std::abs(T.dF));
  EXPECT_THROW(gateaux_at(1.5, T.f, T.g, T.c), Error);
  // |F'(t) - F'(0)| <= C t^beta with some beta > 0.
  std::vector<double> ts, gaps;
  for (double t : {0.5, 0.25, 0.125}) {
    ts.push_back(t);
    gaps.push_back(std::abs(gateaux_at(t, T.f, T.g, T.c) - T.dF) + 1e-300);
  }
  const double beta = loglog_slope(ts, gaps);
  RecordProperty("beta", std::to_string(beta));
  EXPECT_GT(beta, 0.0);
}

TEST(ShapeDerivative, TelescopingIdentity) {
  const auto& T = translated();
  const auto tel = telescoping(T.f, T.g, T.c);
  EXPECT_LE(tel.relative_gap(), 2e-2);
}

TEST(ShapeDerivative, OperatorDerivativeMatchesTransportedMeshes) {
  const auto bg = two_layers();
  const auto a = shape_apriori();
  const Polygon p0 = fixtures::square(0.3);
  const auto c = ShapeContext::build(match_vertices(p0, p0.translated({0.01, 0.004}), bg, a), bg, a, 0.05);
  const Eigen::MatrixXd Lp = dtn_derivative(c);
  EXPECT_LE((Lp - Lp.transpose()).norm(), 1e-12 * Lp.norm());
  EXPECT_LE((Lp * Eigen::VectorXd::Ones(Lp.cols())).cwiseAbs().maxCoeff(), 1e-10 * Lp.norm());
  // Finite differences of the operator on meshes transported by Phi_t, which
  // are meshes of the intermediate polygons.
  const auto L0 = dtn_matrix(*c.mesh, c.gamma0());
  std::vector<double> ts, errs;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    const auto At = c.field.A(t);
    const auto Lt = dtn_matrix(*c.mesh, c.gamma0(), &At);
    ts.push_back(t);
    errs.push_back(((Lt.matrix - L0.matrix) / t - Lp).norm() / Lp.norm());
  }
  EXPECT_GE(loglog_slope(ts, errs), 0.8);
  // Same quantity assembled on the moved node positions directly.
  const double t = 1e-3;
  const Mesh moved = c.mesh->with_nodes(c.field.mapped_nodes(t));
  const auto Lm = dtn_matrix(moved, ConductivityField{c.bg, interpolate_polygon(c.p0, c.p1, t), c.k});
  const auto At = c.field.A(t);
  EXPECT_LE((Lm.matrix - dtn_matrix(*c.mesh, c.gamma0(), &At).matrix).norm(), 1e-9 * L0.matrix.norm());
}
