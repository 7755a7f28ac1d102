#pragma once

// P1 finite elements for div(gamma A grad u) = 0 with Dirichlet data:
// piecewise-constant conductivities, optional per-triangle matrix
// coefficients, and a reusable factorization of the interior block.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <optional>
#include <vector>

#include "polyinc/geometry.hpp"
#include "polyinc/mesh.hpp"

namespace polyinc {

/// gamma_P = gamma_b + (k - gamma_b) chi_P.
struct ConductivityField {
  LayeredBackground bg;
  std::optional<Polygon> inclusion;
  double k = 1.0;

  double on(const TriangleTag& tag) const { return tag.inclusion && inclusion ? k : bg.gammas[static_cast<std::size_t>(tag.layer)]; }
  double at(Vec2 x) const {
    if (inclusion && inclusion->contains(x)) return k;
    return bg.gamma_at(x.y);
  }

  /// Per-triangle values. Throws NonConformingMesh if a triangle straddles
  /// an interface or the inclusion boundary.
  std::vector<double> per_triangle(const Mesh& m, bool check = true) const {
    std::vector<double> g(m.num_triangles());
    const auto ifaces = bg.interfaces();
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tr = m.triangles[t];
      if (check) {
        for (double w : ifaces) {
          double lo = 1e300, hi = -1e300;
          for (int i = 0; i < 3; ++i) {
            lo = std::min(lo, m.nodes[tr[i]].y - w);
            hi = std::max(hi, m.nodes[tr[i]].y - w);
          }
          if (lo < -1e-9 && hi > 1e-9) throw Error(ErrorCode::NonConformingMesh, "triangle straddles an interface");
        }
        if (inclusion) {
          int in = 0, out = 0;
          for (int i = 0; i < 3; ++i) {
            const Vec2 p = m.nodes[tr[i]];
            if (distance_to_boundary(*inclusion, p) < 1e-9) continue;
            (inclusion->contains(p) ? in : out)++;
          }
          if (in > 0 && out > 0) throw Error(ErrorCode::NonConformingMesh, "triangle straddles the inclusion boundary");
        }
      }
      g[t] = on(m.tags[t]);
      if (!(g[t] > 0)) throw Error(ErrorCode::InvalidInput, "conductivity must be positive");
    }
    return g;
  }
};

enum class Domain { Omega, Extended };

inline std::vector<char> active_triangles(const Mesh& m, Domain d) {
  std::vector<char> a(m.num_triangles(), 1);
  if (d == Domain::Omega)
    for (std::size_t t = 0; t < a.size(); ++t) a[t] = m.tags[t].extension ? 0 : 1;
  return a;
}

/// Global stiffness sum_T coef_T area_T (A_T grad phi_j) . grad phi_i.
inline Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& m, const std::vector<double>& coef,
                                                      const std::vector<Mat2>* A = nullptr,
                                                      Domain d = Domain::Omega) {
  const auto act = active_triangles(m, d);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * m.num_triangles());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    if (!act[t]) continue;
    const auto g = m.gradients(t);
    const double w = coef[t] * m.area(t);
    const auto& tr = m.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = A ? dot((*A)[t] * g[j], g[i]) : dot(g[j], g[i]);
        trip.emplace_back(tr[i], tr[j], w * v);
      }
  }
  Eigen::SparseMatrix<double> K(static_cast<long>(m.num_nodes()), static_cast<long>(m.num_nodes()));
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

/// Dirichlet problem with a factorized free-free block. Nodes flagged in
/// `fixed` carry prescribed values; nodes outside the active triangles are
/// fixed at zero.
class DirichletProblem {
 public:
  DirichletProblem(const Mesh& m, const std::vector<double>& coef, const std::vector<char>& fixed,
                   const std::vector<Mat2>* A = nullptr, Domain d = Domain::Omega)
      : n_(static_cast<long>(m.num_nodes())) {
    K_ = assemble_stiffness(m, coef, A, d);
    const auto act = active_triangles(m, d);
    std::vector<char> touched(m.num_nodes(), 0);
    for (std::size_t t = 0; t < m.num_triangles(); ++t)
      if (act[t])
        for (int v : m.triangles[t]) touched[v] = 1;
    index_.assign(m.num_nodes(), -1);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      if (touched[i] && !fixed[i]) {
        index_[i] = static_cast<int>(free_.size());
        free_.push_back(static_cast<int>(i));
      } else {
        fixed_.push_back(static_cast<int>(i));
      }
    }
    std::vector<Eigen::Triplet<double>> tff, tfb;
    for (long c = 0; c < K_.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(K_, c); it; ++it) {
        const int r = index_[it.row()];
        if (r < 0) continue;
        const int cc = index_[it.col()];
        if (cc >= 0) tff.emplace_back(r, cc, it.value());
        else tfb.emplace_back(r, static_cast<int>(it.col()), it.value());
      }
    Kff_.resize(static_cast<long>(free_.size()), static_cast<long>(free_.size()));
    Kff_.setFromTriplets(tff.begin(), tff.end());
    Kfx_.resize(static_cast<long>(free_.size()), n_);
    Kfx_.setFromTriplets(tfb.begin(), tfb.end());
    if (!free_.empty()) {
      ldlt_.compute(Kff_);
      if (ldlt_.info() != Eigen::Success) throw Error(ErrorCode::SolverBreakdown, "stiffness block is not SPD");
    }
  }

  const Eigen::SparseMatrix<double>& stiffness() const { return K_; }
  const std::vector<int>& free_nodes() const { return free_; }
  int free_index(int node) const { return index_[static_cast<std::size_t>(node)]; }

  /// Full nodal solution given values on fixed nodes (entries of `u` at
  /// free nodes are ignored) and an optional load on the free nodes.
  Eigen::VectorXd solve(Eigen::VectorXd u, const Eigen::VectorXd* load = nullptr) const {
    for (int i : free_) u[i] = 0;
    if (free_.empty()) return u;
    Eigen::VectorXd rhs = -(Kfx_ * u);
    if (load) rhs += *load;
    const Eigen::VectorXd x = ldlt_.solve(rhs);
    if (ldlt_.info() != Eigen::Success) throw Error(ErrorCode::SolverBreakdown, "back substitution failed");
    const double res = (Kff_ * x - rhs).norm();
    if (res > 1e-10 * std::max(1.0, rhs.norm())) throw Error(ErrorCode::SolverBreakdown, "residual too large");
    for (std::size_t k = 0; k < free_.size(); ++k) u[free_[k]] = x[static_cast<long>(k)];
    return u;
  }

  /// Solves Kff X = B for many right-hand sides on the free nodes.
  Eigen::MatrixXd solve_free(const Eigen::MatrixXd& B) const {
    if (free_.empty()) return B;
    return ldlt_.solve(B);
  }
  const Eigen::SparseMatrix<double>& free_fixed_block() const { return Kfx_; }
  const Eigen::SparseMatrix<double>& free_block() const { return Kff_; }

 private:
  long n_;
  Eigen::SparseMatrix<double> K_, Kff_, Kfx_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  std::vector<int> free_, fixed_;
  std::vector<int> index_;
};

struct DiscreteSolution {
  Eigen::VectorXd coeffs;
  Eigen::VectorXd dirichlet_data;  // on mesh.boundary_nodes
  double residual = 0;             // relative Galerkin residual on free nodes
};

/// Boundary-node mask of the square boundary.
inline std::vector<char> square_boundary_mask(const Mesh& m) { return m.node_mask(m.boundary_nodes); }

/// Interpolates a function at the square-boundary nodes, in boundary order.
template <class F>
Eigen::VectorXd boundary_trace(const Mesh& m, F&& f) {
  Eigen::VectorXd v(static_cast<long>(m.boundary_nodes.size()));
  for (std::size_t i = 0; i < m.boundary_nodes.size(); ++i) v[static_cast<long>(i)] = f(m.nodes[m.boundary_nodes[i]]);
  return v;
}

inline Eigen::VectorXd scatter_boundary(const Mesh& m, const Eigen::VectorXd& f) {
  if (static_cast<std::size_t>(f.size()) != m.boundary_nodes.size())
    throw Error(ErrorCode::DimensionMismatch, "boundary data has the wrong length");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<long>(m.num_nodes()));
  for (std::size_t i = 0; i < m.boundary_nodes.size(); ++i) u[m.boundary_nodes[i]] = f[static_cast<long>(i)];
  return u;
}

inline double galerkin_residual(const DirichletProblem& pb, const Eigen::VectorXd& u) {
  const Eigen::VectorXd r = pb.stiffness() * u;
  double num = 0, den = 0;
  for (int i : pb.free_nodes()) num += r[i] * r[i];
  const Eigen::VectorXd a = pb.stiffness().cwiseAbs() * u.cwiseAbs();
  for (int i : pb.free_nodes()) den += a[i] * a[i];
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Solves div(gamma grad u) = 0 in Omega, u = f on the square boundary.
inline DiscreteSolution solve_dirichlet(const Mesh& m, const ConductivityField& gamma, const Eigen::VectorXd& f,
                                        const std::vector<Mat2>* A = nullptr) {
  const DirichletProblem pb(m, gamma.per_triangle(m), square_boundary_mask(m), A);
  DiscreteSolution s;
  s.coeffs = pb.solve(scatter_boundary(m, f));
  s.dirichlet_data = f;
  s.residual = galerkin_residual(pb, s.coeffs);
  return s;
}

/// Dirichlet energy sum_T gamma_T area_T (A_T grad u . grad v).
inline double energy_pairing(const Mesh& m, const std::vector<double>& coef, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v, const std::vector<Mat2>* A = nullptr,
                             Domain d = Domain::Omega) {
  const auto act = active_triangles(m, d);
  double e = 0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    if (!act[t]) continue;
    const Vec2 gu = m.gradient(t, u), gv = m.gradient(t, v);
    e += coef[t] * m.area(t) * (A ? dot((*A)[t] * gu, gv) : dot(gu, gv));
  }
  return e;
}

/// H1 norm of a nodal field over Omega.
inline double h1_norm(const Mesh& m, const Eigen::VectorXd& u) {
  double s = 0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    if (m.tags[t].extension) continue;
    const auto& tr = m.triangles[t];
    const double a = m.area(t);
    // Exact P1 mass on the triangle.
    const double u0 = u[tr[0]], u1 = u[tr[1]], u2 = u[tr[2]];
    s += a / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u0 * u2);
    s += a * norm2(m.gradient(t, u));
  }
  return std::sqrt(s);
}

}  // namespace polyinc
