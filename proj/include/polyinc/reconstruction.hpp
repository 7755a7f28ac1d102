#pragma once

// Polygon recovery from a measured DtN operator: damped Gauss-Newton on the
// vertex coordinates with the whitened Frobenius misfit.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "polyinc/dtn.hpp"
#include "polyinc/shape_calculus.hpp"

namespace polyinc {

struct ReconstructionOptions {
  int max_iter = 30;
  double tol = 1e-14;         // stop when misfit <= tol
  double h = 0.05;            // reconstruction mesh size
  double width = -1;          // strip width for the direction fields; default d0/4
  double step_tol = 1e-9;     // stop when the accepted step is shorter
  int max_rejections = 12;    // per iteration
  double damping_scale = 1e-3;
};

struct IterationRecord {
  int iteration = 0;
  double misfit = 0;
  double dH = std::numeric_limits<double>::quiet_NaN();  // to the truth, when known
  double damping = 0;
  double step = 0;
  int rejections = 0;
};

struct ReconstructionState {
  Polygon current;
  double misfit = 0;
  double damping = 0;
  std::vector<IterationRecord> history;
  int iterations = 0;
  std::string stop_reason;
  double star_residual = 0;  // star norm of Lambda_current - Lambda_target
};

/// Target operator and measurement space shared by all iterates.
struct ReconstructionProblem {
  LayeredBackground bg;
  AprioriData a;
  BoundarySpace space;
  std::shared_ptr<const BoundaryGram> gram;
  Eigen::MatrixXd target;  // on `space`
  ReconstructionOptions opts;
  std::optional<Polygon> truth;

  static ReconstructionProblem make(const DtNOperator& measured, const LayeredBackground& bg, const AprioriData& a,
                                    const ReconstructionOptions& opts) {
    ReconstructionProblem p;
    p.bg = bg;
    p.a = a;
    p.opts = opts;
    p.space = boundary_trace_space(triangulate(bg, std::nullopt, opts.h));
    p.gram = std::make_shared<const BoundaryGram>(BoundaryGram::from(p.space));
    p.target = measured.projected(p.space, p.gram).matrix;
    return p;
  }

  double width() const { return opts.width > 0 ? opts.width : a.d0 / 4; }
};

/// Forward quantities at one polygon: whitened residual and, optionally,
/// the whitened derivative of Lambda along each vertex-axis direction.
struct Linearization {
  Eigen::MatrixXd residual;  // B^T (Lambda_p - Lambda_t) B
  std::vector<Eigen::MatrixXd> columns;  // B^T Lambda'_c B, c = 2 j + axis
  double misfit = 0;
  Eigen::MatrixXd lambda;  // Lambda_p on the measurement space
};

inline Linearization linearize(const Polygon& p, std::shared_ptr<const Mesh> mesh, const ReconstructionProblem& pr,
                               bool with_jacobian) {
  const auto coef = ConductivityField{pr.bg, p, pr.a.k}.per_triangle(*mesh);
  const auto lift = boundary_lifting(*mesh, coef, nullptr, with_jacobian);
  const Eigen::MatrixXd P = boundary_prolongation(pr.space, boundary_trace_space(*mesh));
  const Eigen::MatrixXd& B = pr.gram->whitening;
  Linearization lin;
  lin.lambda = P.transpose() * lift.schur * P;
  lin.residual = B.transpose() * (lin.lambda - pr.target) * B;
  lin.misfit = 0.5 * lin.residual.squaredNorm();
  if (!with_jacobian) return lin;
  const Eigen::MatrixXd PB = P * B;
  for (std::size_t j = 0; j < p.size(); ++j)
    for (Vec2 dir : {Vec2{1, 0}, Vec2{0, 1}}) {
      const auto U = unit_vertex_field(mesh, p, pr.bg, j, dir, pr.width());
      lin.columns.push_back(PB.transpose() * dtn_derivative(U, *mesh, coef, lift.Z) * PB);
    }
  return lin;
}

inline Linearization linearize(const Polygon& p, const ReconstructionProblem& pr, bool with_jacobian) {
  return linearize(p, std::make_shared<const Mesh>(triangulate(pr.bg, p, pr.opts.h)), pr, with_jacobian);
}

/// Misfit and its gradient with respect to each vertex.
inline std::pair<double, std::vector<Vec2>> misfit_and_gradient(const Polygon& p, const ReconstructionProblem& pr) {
  const auto lin = linearize(p, pr, true);
  std::vector<Vec2> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    g[j] = {(lin.residual.array() * lin.columns[2 * j].array()).sum(),
            (lin.residual.array() * lin.columns[2 * j + 1].array()).sum()};
  return {lin.misfit, g};
}

/// Moves vertices into the admissible box and out of the interface bands.
inline Polygon project_vertices(std::vector<Vec2> v, const LayeredBackground& bg, const AprioriData& a) {
  const double lim = bg.L - a.d0;
  for (auto& x : v) {
    x.x = std::clamp(x.x, -lim, lim);
    x.y = std::clamp(x.y, -lim, lim);
    for (double w : bg.interfaces())
      if (std::abs(x.y - w) < 0.5 * a.d0) x.y = w + (x.y >= w ? 0.5 : -0.5) * a.d0;
  }
  return Polygon(std::move(v));
}

inline std::size_t crossing_count(const Polygon& p, const LayeredBackground& bg) {
  return interface_crossings(p, bg).size();
}

inline ReconstructionState gauss_newton(const Polygon& init, const ReconstructionProblem& pr,
                                        const std::function<void(const IterationRecord&)>& log = nullptr) {
  const auto check = validate_polygon(init, pr.bg, pr.a);
  if (!check.ok()) throw Error(ErrorCode::InvalidPolygon, "initial polygon is not admissible: " + check.summary());
  const std::size_t ncross = crossing_count(init, pr.bg);
  const std::size_t n = init.size();

  ReconstructionState st;
  st.current = init;
  auto lin = linearize(init, pr, true);
  st.misfit = lin.misfit;
  auto record = [&](int it, double step, int rej) {
    IterationRecord r{it, st.misfit, std::numeric_limits<double>::quiet_NaN(), st.damping, step, rej};
    if (pr.truth) r.dH = hausdorff_distance(st.current, *pr.truth);
    st.history.push_back(r);
    if (log) log(r);
  };
  record(0, 0, 0);

  bool first = true;
  for (int it = 1; it <= pr.opts.max_iter; ++it) {
    if (st.misfit <= pr.opts.tol) {
      st.stop_reason = "tolerance";
      break;
    }
    const long m = static_cast<long>(2 * n);
    Eigen::MatrixXd JtJ(m, m);
    Eigen::VectorXd Jtr(m);
    for (long c = 0; c < m; ++c) {
      Jtr[c] = (lin.columns[static_cast<std::size_t>(c)].array() * lin.residual.array()).sum();
      for (long d = 0; d <= c; ++d)
        JtJ(c, d) = JtJ(d, c) =
            (lin.columns[static_cast<std::size_t>(c)].array() * lin.columns[static_cast<std::size_t>(d)].array()).sum();
    }
    if (first) {
      st.damping = pr.opts.damping_scale * JtJ.trace() / static_cast<double>(m);
      first = false;
    }
    bool accepted = false, any_feasible = false;
    std::string infeasible;
    int rej = 0;
    double step = 0;
    for (; rej <= pr.opts.max_rejections; ++rej) {
      Eigen::MatrixXd H = JtJ;
      H.diagonal().array() += st.damping;
      const Eigen::VectorXd delta = H.ldlt().solve(-Jtr);
      step = delta.norm();
      std::vector<Vec2> v = st.current.vertices();
      for (std::size_t j = 0; j < n; ++j) v[j] += Vec2{delta[2 * static_cast<long>(j)], delta[2 * static_cast<long>(j) + 1]};
      std::optional<Polygon> trial;
      try {
        trial = project_vertices(v, pr.bg, pr.a);
        const auto rep = validate_polygon(*trial, pr.bg, pr.a);
        if (!rep.ok()) {
          infeasible = rep.summary();
          trial.reset();
        } else if (crossing_count(*trial, pr.bg) != ncross || trial->size() != n) {
          infeasible = "interface crossing count changed";
          trial.reset();
        }
      } catch (const Error& e) {
        infeasible = e.what();
        trial.reset();
      }
      if (trial) {
        any_feasible = true;
        auto tl = linearize(*trial, pr, false);
        if (tl.misfit < st.misfit) {
          st.current = *trial;
          st.misfit = tl.misfit;
          st.damping *= 0.3;
          accepted = true;
          break;
        }
      }
      st.damping *= 10;
    }
    st.iterations = it;
    if (!accepted) {
      if (!any_feasible) throw Error(ErrorCode::InfeasibleProjection, "no admissible step: " + infeasible);
      st.stop_reason = "step collapse";
      break;
    }
    record(it, step, rej);
    if (step < pr.opts.step_tol) {
      st.stop_reason = "step below tolerance";
      break;
    }
    lin = linearize(st.current, pr, true);
    if (it == pr.opts.max_iter) st.stop_reason = "max iterations";
  }
  if (st.stop_reason.empty()) st.stop_reason = st.misfit <= pr.opts.tol ? "tolerance" : "max iterations";
  const auto fin = linearize(st.current, pr, false);
  st.star_residual = star_norm(fin.lambda - pr.target, *pr.gram);
  return st;
}

}  // namespace polyinc
