// polyinc: forward solves, DtN export, derivative checks, stability sweeps,
// Green-function probes and reconstructions driven by key-value configs.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "polyinc/greens.hpp"
#include "polyinc/io.hpp"
#include "polyinc/reconstruction.hpp"
#include "polyinc/shape_calculus.hpp"
#include "polyinc/svg.hpp"

namespace fs = std::filesystem;
using namespace polyinc;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::SolverBreakdown:
    case ErrorCode::RefinementStall:
    case ErrorCode::NonConformingMesh:
    case ErrorCode::SingularJacobian:
    case ErrorCode::InfeasibleProjection:
      return kExitSolver;
    default:
      return kExitValidation;
  }
}

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<double> h;
  std::optional<long> seed;
  std::optional<std::string> mode;
};

/// One experiment: config, output directory and the files written so far.
struct Run {
  std::string command;
  Config cfg;
  fs::path out;
  json meshes = json::object();
  json outputs = json::array();

  Run(std::string cmd, const Flags& f) : command(std::move(cmd)), cfg(Config::load(f.config)), out(f.out) {
    if (f.h) cfg.set("h", std::to_string(*f.h));
    if (f.seed) cfg.set("seed", std::to_string(*f.seed));
    if (f.mode) cfg.set("mode", "\"" + *f.mode + "\"");
    if (h() <= 0) throw Error(ErrorCode::InvalidInput, "config: key 'h' must be positive");
  }

  double h() const { return cfg.number("h", 0.05); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.integer("seed", 1)); }
  EvalMode mode() const { return parse_mode(cfg.string("mode", "pullback")); }

  Geometry geometry(const std::string& key) const { return read_geometry(cfg.path(key)); }
  AprioriData apriori(const Geometry& g) const { return cfg.apriori(g.k, g.bg.L); }

  void write(const std::string& name, const std::string& content) {
    atomic_write(out / name, content);
    outputs.push_back(name);
  }
  void add_mesh(const std::string& name, const Mesh& m) { meshes[name] = mesh_stats(m); }
  void finish() { atomic_write(out / "manifest.json", manifest(command, cfg, meshes, outputs).dump(2) + "\n"); }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Polygon require_polygon(const Geometry& g, const std::string& key) {
  if (!g.polygon) throw Error(ErrorCode::InvalidInput, "geometry '" + key + "': field 'vertices' must not be empty");
  return *g.polygon;
}

void require_valid(const Polygon& p, const Geometry& g, const AprioriData& a, const std::string& key) {
  const auto rep = validate_polygon(p, g.bg, a);
  if (!rep.ok()) throw Error(ErrorCode::InvalidPolygon, "geometry '" + key + "' is not admissible: " + rep.summary());
}

// --- forward -----------------------------------------------------------------

/// u(y) = int_0^y ds / gamma(s): continuous, with unit flux through every layer.
double layered_exact(const LayeredBackground& bg, double y) {
  const auto ifs = bg.interfaces();
  double u = 0, pos = 0;
  const double dir = y >= 0 ? 1 : -1;
  while ((y - pos) * dir > 0) {
    double next = y;
    for (double w : ifs)
      if ((w - pos) * dir > 1e-15 && (w - next) * dir < 0) next = w;
    u += (next - pos) / bg.gamma_at(0.5 * (pos + next));
    pos = next;
  }
  return u;
}

int cmd_forward(const Flags& f) {
  Run run("forward", f);
  const Geometry g = run.geometry("geometry");
  const std::string data = run.cfg.string("boundary_data", "x");
  const Mesh m = triangulate(g.bg, g.polygon, run.h());
  run.add_mesh("omega", m);
  const ConductivityField gamma{g.bg, g.polygon, g.k};

  std::function<double(Vec2)> fn;
  bool exact = false;
  bool homogeneous = true;
  for (double v : g.bg.gammas) homogeneous = homogeneous && v == g.bg.gammas[0];
  const bool no_inclusion = !g.polygon || g.k == g.bg.gammas[0];
  if (data == "x") {
    fn = [](Vec2 p) { return p.x; };
    exact = homogeneous && no_inclusion;
  } else if (data == "y") {
    fn = [](Vec2 p) { return p.y; };
    exact = homogeneous && no_inclusion;
  } else if (data == "xy") {
    fn = [](Vec2 p) { return p.x * p.y; };
  } else if (data == "layered") {
    fn = [&](Vec2 p) { return layered_exact(g.bg, p.y); };
    exact = !g.polygon;
  } else {
    throw Error(ErrorCode::InvalidInput, "config: key 'boundary_data' must be x, y, xy or layered");
  }
  const auto sol = solve_dirichlet(m, gamma, boundary_trace(m, fn), nullptr);

  std::ostringstream csv;
  csv << "node,x,y,u\n";
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    csv << i << ',' << fmt(m.nodes[i].x) << ',' << fmt(m.nodes[i].y) << ',' << fmt(sol.coeffs[static_cast<long>(i)]) << '\n';
  run.write("solution.csv", csv.str());

  SvgCanvas svg = SvgCanvas::around(m);
  svg.field(m, sol.coeffs);
  if (g.polygon) svg.polygon(g.polygon->vertices(), "black");
  run.write("forward.svg", svg.str());

  json summary = {{"nodes", m.num_nodes()}, {"galerkin_residual", sol.residual}, {"boundary_data", data}};
  if (exact) {
    double err = 0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) err = std::max(err, std::abs(sol.coeffs[static_cast<long>(i)] - fn(m.nodes[i])));
    summary["nodal_max_error"] = err;
    std::cout << "nodal max error " << err << "\n";
  }
  run.write("summary.json", summary.dump(2) + "\n");
  run.finish();
  return 0;
}

// --- dtn ---------------------------------------------------------------------

int cmd_dtn(const Flags& f) {
  Run run("dtn", f);
  const Geometry g = run.geometry("geometry");
  const Mesh m = triangulate(g.bg, g.polygon, run.h());
  run.add_mesh("omega", m);
  const auto op = dtn_matrix(m, ConductivityField{g.bg, g.polygon, g.k});
  run.write("dtn.json", to_json(op).dump() + "\n");
  const double asym = (op.matrix - op.matrix.transpose()).norm() / op.matrix.norm();
  const double rowsum = (op.matrix * Eigen::VectorXd::Ones(static_cast<long>(op.size()))).cwiseAbs().maxCoeff();
  run.write("summary.json", json{{"size", op.size()}, {"relative_asymmetry", asym}, {"max_row_sum", rowsum}}.dump(2) + "\n");
  std::cout << "DtN size " << op.size() << ", asymmetry " << asym << ", max row sum " << rowsum << "\n";
  run.finish();
  return 0;
}

// --- shared pair setup ---------------------------------------------------------

struct PairSetup {
  Geometry g0;
  AprioriData a;
  VertexCorrespondence corr;
};

PairSetup load_pair(const Run& run) {
  PairSetup s;
  s.g0 = run.geometry("geometry");
  const Geometry g1 = run.geometry("geometry1");
  s.a = run.apriori(s.g0);
  const Polygon p0 = require_polygon(s.g0, "geometry"), p1 = require_polygon(g1, "geometry1");
  require_valid(p0, s.g0, s.a, "geometry");
  require_valid(p1, s.g0, s.a, "geometry1");
  s.corr = match_vertices(p0, p1, s.g0.bg, s.a);
  return s;
}

// --- derivative-check --------------------------------------------------------

int cmd_derivative_check(const Flags& f) {
  Run run("derivative-check", f);
  const PairSetup ps = load_pair(run);
  const auto ts = run.cfg.grid("t_grid", std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1});
  const long pairs = run.cfg.integer("pairs", 5);
  const EvalMode mode = run.mode();
  const auto ctx = ShapeContext::build(ps.corr, ps.g0.bg, ps.a, run.h());
  run.add_mesh("omega", *ctx.mesh);
  std::mt19937_64 rng(run.seed());

  std::ostringstream csv;
  csv << "pair,t,F,fd_quotient,dF,abs_error,slope\n";
  double worst = std::numeric_limits<double>::infinity();
  for (long p = 0; p < pairs; ++p) {
    const Eigen::VectorXd fv = random_boundary_data(boundary_trace_space(*ctx.mesh), rng), gv = random_boundary_data(boundary_trace_space(*ctx.mesh), rng);
    const double F0 = F_value(0, fv, gv, ctx, mode);
    const double dF = gateaux(fv, gv, ctx).value;
    std::vector<double> errs, Fs, qs;
    for (double t : ts) {
      const double diff = mode == EvalMode::Pullback ? F_difference(t, fv, gv, ctx) : F_value(t, fv, gv, ctx, mode) - F0;
      Fs.push_back(F0 + diff);
      qs.push_back(diff / t);
      errs.push_back(std::abs(diff / t - dF));
    }
    const double slope = loglog_slope(ts, errs);
    worst = std::min(worst, slope);
    for (std::size_t i = 0; i < ts.size(); ++i)
      csv << p << ',' << fmt(ts[i]) << ',' << fmt(Fs[i]) << ',' << fmt(qs[i]) << ',' << fmt(dF) << ',' << fmt(errs[i]) << ','
          << fmt(slope) << '\n';
  }
  run.write("derivative.csv", csv.str());
  run.write("summary.json", json{{"min_slope", worst}, {"pairs", pairs}, {"mode", run.cfg.string("mode", "pullback")}}.dump(2) + "\n");
  std::cout << "minimum fitted slope " << worst << "\n";
  run.finish();
  return 0;
}

// --- stability-sweep ---------------------------------------------------------

int cmd_stability_sweep(const Flags& f) {
  Run run("stability-sweep", f);
  const PairSetup ps = load_pair(run);
  const long steps = run.cfg.integer("steps", 10);
  if (steps < 1) throw Error(ErrorCode::InvalidInput, "config: key 'steps' must be positive");
  const auto ctx = ShapeContext::build(ps.corr, ps.g0.bg, ps.a, run.h());
  run.add_mesh("omega", *ctx.mesh);
  const auto gamma0 = ctx.gamma0();
  const auto L0 = dtn_matrix(*ctx.mesh, gamma0);

  std::ostringstream csv;
  csv << "s,dH,star_norm,ratio,normV,L1,L2_squared,sym_diff,L1_ratio,l2_identity_ok\n";
  std::vector<double> ratios, l1ratios;
  bool identity_ok = true;
  for (long i = 0; i <= steps; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(steps);
    const auto A = ctx.field.A(s);
    const auto Ls = dtn_matrix(*ctx.mesh, gamma0, &A, L0.gram);
    const double star = star_norm(Ls.matrix - L0.matrix, *L0.gram);
    const Polygon pss = family_polygon(ps.corr, s);
    const double dH = hausdorff_distance(ps.corr.p0, pss);
    const auto cd = conductivity_distances(ps.corr.p0, pss, ps.g0.bg, ps.a.k);
    const bool ok = cd.l2_squared >= ps.a.c0 * ps.a.c0 * cd.sym_diff - 1e-8;
    identity_ok = identity_ok && ok;
    const double ratio = star > 0 ? dH / star : std::numeric_limits<double>::quiet_NaN();
    const double l1r = star > 0 ? cd.l1 / star : std::numeric_limits<double>::quiet_NaN();
    if (s >= 0.1 - 1e-12) {
      ratios.push_back(ratio);
      l1ratios.push_back(l1r);
    }
    csv << fmt(s) << ',' << fmt(dH) << ',' << fmt(star) << ',' << (i ? fmt(ratio) : "nan") << ',' << fmt(s * ps.corr.normV)
        << ',' << fmt(cd.l1) << ',' << fmt(cd.l2_squared) << ',' << fmt(cd.sym_diff) << ',' << (i ? fmt(l1r) : "nan") << ','
        << (ok ? 1 : 0) << '\n';
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return std::pair<double, double>{*hi, *hi / *lo};
  };
  const auto [rmax, rspread] = spread(ratios);
  const auto [lmax, lspread] = spread(l1ratios);
  csv << "summary," << fmt(rmax) << ",," << fmt(rspread) << ",,," << ",," << fmt(lspread) << ',' << (identity_ok ? 1 : 0) << '\n';
  run.write("sweep.csv", csv.str());
  run.write("summary.json", json{{"max_ratio", rmax},
                                 {"ratio_spread", rspread},
                                 {"max_L1_ratio", lmax},
                                 {"L1_ratio_spread", lspread},
                                 {"l2_identity_ok", identity_ok}}
                                .dump(2) + "\n");
  std::cout << "empirical Lipschitz constant " << rmax << ", spread " << rspread << ", L1 spread " << lspread << "\n";
  run.finish();
  return 0;
}

// --- greens-probe ------------------------------------------------------------

int cmd_greens_probe(const Flags& f) {
  Run run("greens-probe", f);
  const Geometry g = run.geometry("geometry");
  const AprioriData a = run.apriori(g);
  const Polygon p0 = require_polygon(g, "geometry");
  require_valid(p0, g, a, "geometry");
  const int side = static_cast<int>(run.cfg.integer("side", 1));
  const double h_local = run.cfg.number("h_local", 5e-4);
  const auto setup = make_probe(p0, side, run.cfg.number("delta", 0.005), g.bg, a, run.cfg.number("h", 0.1), h_local,
                                run.cfg.number("grading", 0.15));
  run.add_mesh("omega0", *setup.mesh);
  std::vector<double> rs;
  if (run.cfg.has("r_grid")) {
    rs = run.cfg.grid("r_grid");
  } else {
    const double lo = 10 * h_local, hi = a.d0 / 8;
    for (int i = 0; i < 8; ++i) rs.push_back(lo * std::pow(hi / lo, i / 7.0));
  }
  const auto res = S0_probe(setup.corr, side, rs, setup.ctx, setup.U, h_local);

  std::ostringstream csv;
  csv << "r,S0,slope,residual\n";
  for (const auto& row : res.rows) csv << fmt(row.r) << ',' << fmt(row.S0) << ',' << fmt(res.slope) << ',' << fmt(res.residual) << '\n';
  run.write("probe.csv", csv.str());

  SvgCanvas svg(-g.bg.L, -g.bg.L, g.bg.L, g.bg.L + 2 * a.d0);
  svg.polygon(p0.vertices(), "black");
  svg.polygon(setup.corr.p1.vertices(), "#c33", "none", 0.8);
  std::vector<Vec2> path;
  for (const auto& row : res.rows) path.push_back(res.point + res.normal * row.r);
  svg.polyline(path, "#36c", 2.0);
  for (Vec2 p : path) svg.dot(p, "#36c", 1.5);
  run.write("probe.svg", svg.str());
  run.write("summary.json", json{{"slope", res.slope}, {"fit_residual", res.residual}}.dump(2) + "\n");
  std::cout << "fitted slope " << res.slope << " (rms residual " << res.residual << ")\n";
  run.finish();
  return 0;
}

// --- reconstruct -------------------------------------------------------------

int cmd_reconstruct(const Flags& f) {
  Run run("reconstruct", f);
  const Geometry g = run.geometry("geometry");
  const AprioriData a = run.apriori(g);
  const Polygon truth = require_polygon(g, "geometry");
  require_valid(truth, g, a, "geometry");
  Polygon init = truth;
  if (run.cfg.has("init_geometry")) {
    init = require_polygon(run.geometry("init_geometry"), "init_geometry");
  } else {
    const auto off = run.cfg.grid("init_offset", std::vector<double>{0.3 * a.d0});
    init = truth.translated({off[0], off.size() > 1 ? off[1] : 0.0});
  }
  require_valid(init, g, a, "init");

  ReconstructionOptions opts;
  opts.h = run.h();
  opts.max_iter = static_cast<int>(run.cfg.integer("max_iter", 30));
  const double refine = run.cfg.number("target_refinement", 2);
  if (refine < 2) throw Error(ErrorCode::InvalidInput, "config: key 'target_refinement' must be at least 2");
  const Mesh fine = triangulate(g.bg, truth, opts.h / refine);
  run.add_mesh("target", fine);
  const auto measured = dtn_matrix(fine, ConductivityField{g.bg, truth, g.k});
  auto pr = ReconstructionProblem::make(measured, g.bg, a, opts);
  pr.truth = truth;

  std::ostringstream log, csv;
  csv << "iteration,misfit,dH,damping,step,rejections\n";
  const auto st = gauss_newton(init, pr, [&](const IterationRecord& r) {
    log << json{{"iteration", r.iteration}, {"misfit", r.misfit}, {"dH", r.dH}, {"damping", r.damping}, {"step", r.step},
                {"rejections", r.rejections}}
               .dump()
        << '\n';
    csv << r.iteration << ',' << fmt(r.misfit) << ',' << fmt(r.dH) << ',' << fmt(r.damping) << ',' << fmt(r.step) << ','
        << r.rejections << '\n';
  });
  run.write("log.jsonl", log.str());
  run.write("convergence.csv", csv.str());
  Geometry fin = g;
  fin.polygon = st.current;
  run.write("final.json", to_json(fin).dump(2) + "\n");
  double verr = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) verr = std::max(verr, distance(st.current[j], truth[j]));
  const double dH = hausdorff_distance(st.current, truth);
  run.write("summary.json", json{{"iterations", st.iterations},
                                 {"stop_reason", st.stop_reason},
                                 {"misfit", st.misfit},
                                 {"max_vertex_error", verr},
                                 {"dH", dH},
                                 {"star_residual", st.star_residual},
                                 {"stability_ratio", st.star_residual > 0 ? dH / st.star_residual : 0.0}}
                                .dump(2) + "\n");
  std::cout << "stopped after " << st.iterations << " iterations (" << st.stop_reason << "), max vertex error " << verr << "\n";
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polygonal inclusions in layered conductors: forward solves, shape derivatives, probes, reconstruction"};
  app.require_subcommand(1);
  Flags flags;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value config file (or a run manifest)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--mesh-size", flags.h, "mesh size h (overrides the config)");
    sub->add_option("--seed", flags.seed, "random seed (overrides the config)");
    sub->add_option("--mode", flags.mode, "pullback or remesh (overrides the config)")->check(CLI::IsMember({"pullback", "remesh"}));
  };
  struct Cmd {
    const char* name;
    const char* help;
    const char* footer;
    int (*fn)(const Flags&);
  };
  const Cmd cmds[] = {
      {"forward", "Solve the Dirichlet problem and draw the solution",
       "Keys: geometry, h, boundary_data (x|y|xy|layered).\nsolution.csv columns: node,x,y,u", cmd_forward},
      {"dtn", "Export the discrete DtN operator as JSON", "Keys: geometry, h.", cmd_dtn},
      {"derivative-check", "Compare the distributed shape derivative with difference quotients",
       "Keys: geometry, geometry1, h, t_grid, pairs, seed, mode.\n"
       "derivative.csv columns: pair,t,F,fd_quotient,dF,abs_error,slope",
       cmd_derivative_check},
      {"stability-sweep", "Distances between P0 and P^s against the DtN star norm",
       "Keys: geometry, geometry1, h, steps, a-priori keys.\n"
       "sweep.csv columns: s,dH,star_norm,ratio,normV,L1,L2_squared,sym_diff,L1_ratio,l2_identity_ok",
       cmd_stability_sweep},
      {"greens-probe", "S0(y_r, y_r) along the normal through a side midpoint",
       "Keys: geometry, side, delta, h, h_local, grading, r_grid.\nprobe.csv columns: r,S0,slope,residual",
       cmd_greens_probe},
      {"reconstruct", "Gauss-Newton recovery of the polygon from synthetic DtN data",
       "Keys: geometry, init_geometry or init_offset, h, max_iter, target_refinement.\n"
       "convergence.csv columns: iteration,misfit,dH,damping,step,rejections",
       cmd_reconstruct},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Flags&)>> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->footer(c.footer);
    common(sub);
    subs.emplace_back(sub, c.fn);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  try {
    for (const auto& [sub, fn] : subs)
      if (sub->parsed()) return fn(flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
