#pragma once

// Discrete Dirichlet-to-Neumann operators (boundary Schur complements),
// the spectral H^{1/2} / H^{-1/2} Gram pair on the boundary, and the
// operator norm between them.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <memory>
#include <random>

#include "polyinc/forward.hpp"
#include "polyinc/mesh.hpp"

namespace polyinc {

/// Fractional Sobolev Gram matrices realized in the (K_b, M_b) generalized eigenbasis.
struct BoundaryGram {
  Eigen::VectorXd eigenvalues;  // lambda_k of K_b v = lambda M_b v
  Eigen::MatrixXd basis;        // V with V^T M_b V = I
  Eigen::MatrixXd gram_half;    // M V diag((1 + lambda)^{1/2}) V^T M
  Eigen::MatrixXd gram_dual;    // V diag((1 + lambda)^{-1/2}) V^T
  Eigen::MatrixXd whitening;    // V diag((1 + lambda)^{-1/4})

  static BoundaryGram from(const BoundarySpace& b) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(b.stiffness, b.mass);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::SolverBreakdown, "boundary eigenproblem failed");
    BoundaryGram g;
    g.eigenvalues = es.eigenvalues().cwiseMax(0.0);
    g.basis = es.eigenvectors();
    const Eigen::VectorXd s = (g.eigenvalues.array() + 1.0).sqrt();
    const Eigen::MatrixXd MV = b.mass * g.basis;
    g.gram_half = MV * s.asDiagonal() * MV.transpose();
    g.gram_dual = g.basis * s.cwiseInverse().asDiagonal() * g.basis.transpose();
    g.whitening = g.basis * s.cwiseSqrt().cwiseInverse().asDiagonal();
    return g;
  }
};

struct DtNOperator {
  Eigen::MatrixXd matrix;
  BoundarySpace space;
  std::shared_ptr<const BoundaryGram> gram;
  std::uint64_t mesh_id = 0;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
  const Eigen::MatrixXd& gram_half() const { return gram->gram_half; }
  const Eigen::MatrixXd& gram_dual() const { return gram->gram_dual; }

  static DtNOperator on_space(Eigen::MatrixXd mat, BoundarySpace space, std::uint64_t id,
                              std::shared_ptr<const BoundaryGram> gram = nullptr) {
    DtNOperator op;
    op.matrix = std::move(mat);
    op.space = std::move(space);
    op.gram = gram ? std::move(gram) : std::make_shared<const BoundaryGram>(BoundaryGram::from(op.space));
    op.mesh_id = id;
    return op;
  }

  /// Same operator restricted to a coarser (or different) boundary space: P^T Lambda P.
  DtNOperator projected(const BoundarySpace& target, std::shared_ptr<const BoundaryGram> g = nullptr) const {
    const Eigen::MatrixXd P = boundary_prolongation(target, space);
    return on_space(P.transpose() * matrix * P, target, mesh_id, std::move(g));
  }
};

inline void require_same_space(const DtNOperator& a, const DtNOperator& b) {
  if (!a.space.same_nodes(b.space)) throw Error(ErrorCode::GramMismatch, "operators live on different boundary spaces");
}

/// Harmonic lifting of every boundary hat function: column j is the discrete
/// solution with Dirichlet data e_j on the square boundary.
struct BoundaryLifting {
  Eigen::MatrixXd Z;  // nodes x boundary
  Eigen::MatrixXd schur;
};

inline BoundaryLifting boundary_lifting(const Mesh& m, const std::vector<double>& coef,
                                        const std::vector<Mat2>* A = nullptr, bool need_lifting = true) {
  const DirichletProblem pb(m, coef, square_boundary_mask(m), A);
  const long nb = static_cast<long>(m.boundary_nodes.size());
  const long nf = static_cast<long>(pb.free_nodes().size());
  std::vector<long> col(m.num_nodes(), -1);
  for (long j = 0; j < nb; ++j) col[static_cast<std::size_t>(m.boundary_nodes[static_cast<std::size_t>(j)])] = j;
  Eigen::MatrixXd Kfb = Eigen::MatrixXd::Zero(nf, nb);
  const Eigen::SparseMatrix<double>& Kfx = pb.free_fixed_block();
  for (long c = 0; c < Kfx.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Kfx, c); it; ++it)
      if (const long j = col[static_cast<std::size_t>(it.col())]; j >= 0) Kfb(it.row(), j) += it.value();
  const Eigen::MatrixXd X = pb.solve_free(Kfb);
  Eigen::MatrixXd Kbb(nb, nb);
  for (long i = 0; i < nb; ++i)
    for (long j = 0; j < nb; ++j) Kbb(i, j) = pb.stiffness().coeff(m.boundary_nodes[i], m.boundary_nodes[j]);
  BoundaryLifting out;
  out.schur = Kbb - Kfb.transpose() * X;
  if (need_lifting) {
    out.Z = Eigen::MatrixXd::Zero(static_cast<long>(m.num_nodes()), nb);
    for (long j = 0; j < nb; ++j) out.Z(m.boundary_nodes[j], j) = 1.0;
    for (long k = 0; k < nf; ++k) out.Z.row(pb.free_nodes()[static_cast<std::size_t>(k)]) = -X.row(k);
  }
  return out;
}

/// Lambda = K_bb - K_bi K_ii^{-1} K_ib on the square-boundary nodes.
inline DtNOperator dtn_matrix(const Mesh& m, const ConductivityField& gamma, const std::vector<Mat2>* A = nullptr,
                              std::shared_ptr<const BoundaryGram> gram = nullptr) {
  auto lift = boundary_lifting(m, gamma.per_triangle(m, A == nullptr), A, false);
  return DtNOperator::on_space(std::move(lift.schur), boundary_trace_space(m), m.id(), std::move(gram));
}

/// <Lambda f, g> = g^T Lambda f.
inline double pairing(const DtNOperator& op, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  if (static_cast<std::size_t>(f.size()) != op.size() || static_cast<std::size_t>(g.size()) != op.size())
    throw Error(ErrorCode::DimensionMismatch, "boundary vector length does not match the operator");
  return g.dot(op.matrix * f);
}

/// Largest singular value of D between the H^{1/2} and H^{-1/2} inner products.
inline double star_norm(const Eigen::MatrixXd& D, const BoundaryGram& g) {
  if (D.rows() != g.whitening.rows() || D.cols() != g.whitening.rows())
    throw Error(ErrorCode::DimensionMismatch, "operator size does not match the Gram matrices");
  const Eigen::MatrixXd W = g.whitening.transpose() * D * g.whitening;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(W);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

inline double star_norm(const DtNOperator& a, const DtNOperator& b) {
  require_same_space(a, b);
  return star_norm(a.matrix - b.matrix, *a.gram);
}

/// Smooth random boundary data: Fourier modes 1..modes in the arclength with
/// normal coefficients decaying like 1/k.
inline Eigen::VectorXd random_boundary_data(const BoundarySpace& sp, std::mt19937_64& rng, int modes = 4) {
  std::normal_distribution<double> nd;
  std::vector<double> a, b;
  for (int k = 0; k < modes; ++k) {
    a.push_back(nd(rng) / (k + 1));
    b.push_back(nd(rng) / (k + 1));
  }
  Eigen::VectorXd v(static_cast<long>(sp.size()));
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const double th = 2 * kPi * sp.s[i] / sp.perimeter;
    double x = 0;
    for (std::size_t k = 0; k < a.size(); ++k) x += a[k] * std::cos((k + 1.0) * th) + b[k] * std::sin((k + 1.0) * th);
    v[static_cast<long>(i)] = x;
  }
  return v;
}

}  // namespace polyinc
