// Acceptance run: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "polyinc/greens.hpp"
#include "polyinc/reconstruction.hpp"
#include "polyinc/stats.hpp"

using namespace polyinc;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream note;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

AprioriData base_apriori() {
  AprioriData a = fixtures::apriori();
  a.c0 = 2;
  return a;
}

double max_nodal_error(const Mesh& m, const Eigen::VectorXd& u, const std::function<double(Vec2)>& exact) {
  double e = 0;
  for (std::size_t i = 0; i < m.num_nodes(); ++i) e = std::max(e, std::abs(u[static_cast<long>(i)] - exact(m.nodes[i])));
  return e;
}

// 1 -------------------------------------------------------------------------------
void dtn_structure(Outcome& o) {
  struct Case {
    LayeredBackground bg;
    std::optional<Polygon> p;
    double k, h;
  };
  std::mt19937_64 rng(101);
  const LayeredBackground three{1, {-1, -0.5, 0.6, 1}, {1, 3, 0.5}};
  const std::vector<Case> cases{{LayeredBackground::homogeneous(1, 1), std::nullopt, 1, 0.05},
                                {fixtures::two_layers(), fixtures::square(0.3), 4, 0.05},
                                {fixtures::two_layers(), fixtures::hexagon(), 6, 0.035},
                                {three, fixtures::square(0.25, {0.1, 0.05}), 8, 0.05}};
  double worst_sym = 0, worst_row = 0, worst_energy = 0, worst_time = 0;
  for (const auto& c : cases) {
    const auto t0 = Clock::now();
    const Mesh m = triangulate(c.bg, c.p, c.h);
    const ConductivityField gamma{c.bg, c.p, c.k};
    const auto op = dtn_matrix(m, gamma);
    worst_sym = std::max(worst_sym, (op.matrix - op.matrix.transpose()).norm() / op.matrix.norm());
    worst_row = std::max(worst_row, (op.matrix * Eigen::VectorXd::Ones(op.matrix.cols())).cwiseAbs().maxCoeff());
    const auto coef = gamma.per_triangle(m);
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::VectorXd f = random_boundary_data(op.space, rng);
      const auto u = solve_dirichlet(m, gamma, f);
      const double en = energy_pairing(m, coef, u.coeffs, u.coeffs);
      worst_energy = std::max(worst_energy, std::abs(pairing(op, f, f) - en) / en);
    }
    worst_time = std::max(worst_time, seconds_since(t0));
  }
  o.note << "symmetry " << worst_sym << ", row sum " << worst_row << ", energy " << worst_energy << ", slowest case "
         << worst_time << " s";
  o.require(worst_sym <= 1e-12, "symmetry");
  o.require(worst_row <= 1e-10, "row sums");
  o.require(worst_energy <= 1e-10, "energy identity");
  o.require(worst_time < 10, "runtime");
}

// 2 -------------------------------------------------------------------------------
void exact_solutions(Outcome& o) {
  const auto homog = LayeredBackground::homogeneous(1, 1);
  const Mesh m1 = triangulate(homog, std::nullopt, 0.05);
  const auto lin = [](Vec2 p) { return p.x; };
  const double e1 = max_nodal_error(m1, solve_dirichlet(m1, {homog, std::nullopt, 1}, boundary_trace(m1, lin)).coeffs, lin);

  const auto bg = fixtures::two_layers(1, 3);
  const auto layered = [](Vec2 p) { return p.y >= 0 ? p.y / 3 : p.y; };
  double e2 = 0;
  MeshOptions graded;
  graded.sizing = [](Vec2 x) { return std::max(0.01, 0.3 * std::abs(x.y)); };
  const Polygon upper = fixtures::square(0.2, {-0.3, 0.5}), lower = fixtures::hexagon(0.3, {0.2, -0.5});
  for (const auto& [poly, k, opts] : {std::tuple{std::optional<Polygon>{}, 1.0, MeshOptions{}},
                                     std::tuple{std::optional<Polygon>{upper}, 3.0, MeshOptions{}},
                                     std::tuple{std::optional<Polygon>{lower}, 1.0, graded}}) {
    const Mesh m = triangulate(bg, poly, 0.05, opts);
    e2 = std::max(e2, max_nodal_error(m, solve_dirichlet(m, {bg, poly, k}, boundary_trace(m, layered)).coeffs, layered));
  }
  o.note << "linear " << e1 << ", layered " << e2;
  o.require(e1 <= 1e-10, "linear");
  o.require(e2 <= 1e-10, "layered");
}

// 3 -------------------------------------------------------------------------------
void shape_derivative(Outcome& o) {
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  const Polygon sq = fixtures::square(0.3), hex = fixtures::hexagon();
  const std::vector<std::pair<std::string, std::pair<Polygon, Polygon>>> geos{
      {"translation", {sq, sq.translated({0.003, 0.001})}},
      {"vertex move", {hex, fixtures::vertex_moved(hex, 1, {0.004, -0.003})}},
      {"shear", {sq, fixtures::sheared(sq, 0.004)}}};
  std::mt19937_64 rng(303);
  double worst = 1e300, slowest = 0;
  for (const auto& [name, pr] : geos) {
    const auto t0 = Clock::now();
    const auto c = ShapeContext::build(match_vertices(pr.first, pr.second, bg, a), bg, a, 0.05);
    const auto sp = boundary_trace_space(*c.mesh);
    double gw = 1e300;
    for (int pair = 0; pair < 5; ++pair) {
      const Eigen::VectorXd f = random_boundary_data(sp, rng), g = random_boundary_data(sp, rng);
      const double dF = gateaux(f, g, c).value;
      std::vector<double> ts, errs;
      for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
        ts.push_back(t);
        errs.push_back(std::abs(dF - F_difference(t, f, g, c) / t));
      }
      gw = std::min(gw, loglog_slope(ts, errs));
    }
    const double dt = seconds_since(t0);
    o.note << name << " slope " << gw << " (" << dt << " s); ";
    worst = std::min(worst, gw);
    slowest = std::max(slowest, dt);
  }
  o.require(worst >= 0.9, "slope");
  o.require(slowest < 120, "runtime");
}

// 4 -------------------------------------------------------------------------------
void pullback_calculus(Outcome& o) {
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  std::mt19937_64 rng(404);
  double worst_slope = 1e300;
  int failed_props = 0;
  std::string failed_names;
  for (int pair = 0; pair < 10; ++pair) {
    const auto [p0, p1] = fixtures::random_pair(rng, bg, a, a.delta0() / 5);
    const auto corr = match_vertices(p0, p1, bg, a);
    const auto mesh = std::make_shared<const Mesh>(triangulate(bg, p0, 0.08));
    const auto U = build_displacement(corr, mesh, bg, a);
    const auto calA0 = U.calA_field();
    std::vector<double> ts, errs;
    for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
      const auto Am = U.A_minus_I(t);
      double e = 0;
      for (int s : U.support) e = std::max(e, (Am[static_cast<std::size_t>(s)] * (1 / t) - calA0[static_cast<std::size_t>(s)]).max_abs());
      ts.push_back(t);
      errs.push_back(e);
    }
    worst_slope = std::min(worst_slope, loglog_slope(ts, errs));
    const auto rep = verify_phi_properties({&U, 1.0}, bg, 1000000, 4000 + static_cast<std::uint64_t>(pair));
    for (const auto& ch : rep.checks)
      if (!ch.passed) {
        ++failed_props;
        failed_names += " " + ch.name;
      }
  }
  o.note << "A(t) slope " << worst_slope << ", property failures " << failed_props << failed_names;
  o.require(worst_slope >= 0.9, "A(t) slope");
  o.require(failed_props == 0, "map properties");
}

// 5 -------------------------------------------------------------------------------
void material_derivative_check(Outcome& o) {
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  const Polygon sq = fixtures::square(0.3);
  double worst_flux = 0, worst_slope = 1e300;
  for (const Polygon& p1 : {sq.translated({0.003, 0.0}), fixtures::sheared(sq, 0.004)}) {
    const auto c = ShapeContext::build(match_vertices(sq, p1, bg, a), bg, a, 0.05);
    const auto f = boundary_trace(*c.mesh, [](Vec2 p) { return p.x + 0.3 * p.y * p.y; });
    const auto g = boundary_trace(*c.mesh, [](Vec2 p) { return std::sin(2 * p.x) + p.y; });
    const double dF = gateaux(f, g, c).value;
    const auto ud = material_derivative(f, c);
    worst_flux = std::max(worst_flux, std::abs(boundary_flux(c, ud.coeffs, g) - dF) / std::abs(dF));
    std::vector<double> ts, errs;
    for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
      ts.push_back(t);
      errs.push_back(h1_norm(*c.mesh, pullback_difference_quotient(t, f, c) - ud.coeffs));
    }
    worst_slope = std::min(worst_slope, loglog_slope(ts, errs));
  }
  o.note << "flux relative gap " << worst_flux << ", H1 slope " << worst_slope;
  o.require(worst_flux <= 1e-9, "flux identity");
  o.require(worst_slope >= 0.9, "H1 slope");
}

// 6 -------------------------------------------------------------------------------
void geometry_identities(Outcome& o) {
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  std::mt19937_64 rng(606);
  // L2 identity along sweep families.
  double worst_gap = 1e300;
  for (int pair = 0; pair < 5; ++pair) {
    const auto [p0, p1] = fixtures::random_pair(rng, bg, a, a.delta0() / 2);
    const auto corr = match_vertices(p0, p1, bg, a);
    for (int i = 0; i <= 10; ++i) {
      const Polygon ps = family_polygon(corr, i / 10.0);
      const auto cd = conductivity_distances(p0, ps, bg, a.k);
      worst_gap = std::min(worst_gap, cd.l2_squared - a.c0 * a.c0 * cd.sym_diff);
    }
  }
  // Matching bound and area-to-distance ratio.
  const double C0 = std::sqrt(1 + 16 / std::pow(std::sin(a.beta0), 2));
  double worst_match = 0, area_ratio = 0;
  int n = 0;
  for (; n < 1000; ++n) {
    const auto [p0, p1] = fixtures::random_pair(rng, bg, a, a.delta0() / 2);
    const auto corr = match_vertices(p0, p1, bg, a);
    worst_match = std::max(worst_match, corr.max_pair_distance() / (C0 * corr.dH));
    area_ratio = std::max(area_ratio, corr.dH / std::sqrt(symmetric_difference_area(p0, p1)));
  }
  o.note << "min(l2 - c0^2 |diff|) " << worst_gap << ", max match/(C0 dH) " << worst_match << " over " << n
         << " pairs, max dH/sqrt|diff| " << area_ratio;
  o.require(worst_gap >= -1e-8, "L2 identity");
  o.require(worst_match <= 1 + 1e-12, "matching bound");
  o.require(std::isfinite(area_ratio), "area ratio");
  o.require(std::abs(C0 - a.C0()) <= 1e-12, "C0 formula");
}

// 7 -------------------------------------------------------------------------------
void greens_probe(Outcome& o) {
  const auto t0 = Clock::now();
  const auto K = BiphaseKernel::horizontal(2, 1, 0.1, {0.3, 0.5});
  double jump = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p{-1 + 2 * i / 999.0, 0.1};
    const double e = 1e-6;
    const double up = (K.eval_branch(p + Vec2{0, e}, true).first - K.eval_branch(p - Vec2{0, e}, true).first) / (2 * e);
    const double dn = (K.eval_branch(p + Vec2{0, e}, false).first - K.eval_branch(p - Vec2{0, e}, false).first) / (2 * e);
    jump = std::max(jump, std::abs(K.gamma_up * up - K.gamma_down * dn));
  }
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  const Polygon sq({{-0.25, 0.2}, {0.25, 0.2}, {0.25, 0.6}, {-0.25, 0.6}});
  const double h_local = 5e-4;
  const auto ps = make_probe(sq, 1, 0.005, bg, a, 0.1, h_local);
  std::vector<double> rs;
  for (int i = 0; i < 6; ++i) rs.push_back(10 * h_local * std::pow(10.0, i / 5.0));
  const auto pr = S0_probe(ps.corr, 1, rs, ps.ctx, ps.U, ps.h_local);
  const double dt = seconds_since(t0);
  o.note << "flux jump " << jump << ", probe slope " << pr.slope << " (fit rms " << pr.residual << "), " << dt << " s";
  o.require(jump <= 1e-6, "flux jump");
  o.require(std::abs(pr.slope + 1) <= 0.15, "probe slope");
  o.require(dt < 300, "runtime");
}

// 8 -------------------------------------------------------------------------------
void stability_sweep(Outcome& o) {
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  std::mt19937_64 rng(808);
  double worst = 0, worst_l1 = 0;
  for (int pair = 0; pair < 5; ++pair) {
    const auto [p0, p1] = fixtures::random_pair(rng, bg, a, a.delta0() / 5);
    const auto corr = match_vertices(p0, p1, bg, a);
    const auto c = ShapeContext::build(corr, bg, a, 0.05);
    const auto L0 = dtn_matrix(*c.mesh, c.gamma0());
    std::vector<double> r, r1;
    for (int i = 1; i <= 10; ++i) {
      const double s = i / 10.0;
      const auto A = c.field.A(s);
      const double star = star_norm(dtn_matrix(*c.mesh, c.gamma0(), &A, L0.gram).matrix - L0.matrix, *L0.gram);
      const Polygon ps = family_polygon(corr, s);
      r.push_back(hausdorff_distance(p0, ps) / star);
      r1.push_back(conductivity_distances(p0, ps, bg, a.k).l1 / star);
    }
    const auto spread = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
    };
    worst = std::max(worst, spread(r));
    worst_l1 = std::max(worst_l1, spread(r1));
  }
  o.note << "worst ratio spread " << worst << ", worst L1 ratio spread " << worst_l1;
  o.require(std::isfinite(worst) && worst <= 10, "ratio spread");
  o.require(std::isfinite(worst_l1) && worst_l1 <= 10, "L1 ratio spread");
}

// 9 -------------------------------------------------------------------------------
void reconstruction(Outcome& o) {
  const auto t0 = Clock::now();
  const auto bg = fixtures::two_layers();
  const auto a = base_apriori();
  const Polygon truth = fixtures::square(0.3);
  const double h = 0.05;
  const Mesh fine = triangulate(bg, truth, h / 2);
  ReconstructionOptions opts;
  opts.h = h;
  auto pr = ReconstructionProblem::make(dtn_matrix(fine, ConductivityField{bg, truth, a.k}), bg, a, opts);
  pr.truth = truth;
  const auto st = gauss_newton(truth.translated({0.3 * a.d0, 0}), pr);
  double err = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) err = std::max(err, distance(st.current[j], truth[j]));
  bool monotone = true;
  for (std::size_t i = 1; i < st.history.size(); ++i) monotone = monotone && st.history[i].misfit < st.history[i - 1].misfit;
  const double dt = seconds_since(t0);
  o.note << "max vertex error " << err << " (2h = " << 2 * h << "), " << st.iterations << " iterations, stop: " << st.stop_reason
         << ", " << dt << " s";
  o.require(err <= 2 * h, "vertex error");
  o.require(monotone, "monotone misfit");
  o.require(st.iterations <= 30, "iterations");
  o.require(dt < 600, "runtime");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 DtN structure", dtn_structure},
      {"2 exact solutions", exact_solutions},
      {"3 shape derivative finite differences", shape_derivative},
      {"4 pullback coefficient and map properties", pullback_calculus},
      {"5 material derivative", material_derivative_check},
      {"6 geometry identities", geometry_identities},
      {"7 kernel flux jump and probe slope", greens_probe},
      {"8 stability sweep", stability_sweep},
      {"9 reconstruction", reconstruction}};
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.note.str() << " (" << seconds_since(t0) << " s)" << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
