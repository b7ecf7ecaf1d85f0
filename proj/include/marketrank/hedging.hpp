#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "marketrank/linalg.hpp"
#include "marketrank/process.hpp"
#include "marketrank/subspace.hpp"

namespace marketrank {

// One-step martingale measures at a cell: branch weights q > 0 with
// sum q_b = 1 and sum q_b theta delta_b = 0.  The solution set is the slice
// particular + row space of null_basis through the open simplex; its
// dimension (freedom) plus the cell dimension of the market equals m.
struct MeasureCell {
  Eigen::VectorXd particular;   // the reference branch probabilities
  Eigen::MatrixXd null_basis;   // freedom x (m+1), orthonormal rows
  int freedom = 0;
};

inline std::vector<MeasureCell> measure_polytope(const IntegrandField& theta,
                                                 double tol = kDefaultRankTol) {
  validate_shape(theta);
  const FilteredTree& tr = *theta.tree;
  const int br = tr.branching();
  std::vector<MeasureCell> cells(static_cast<std::size_t>(tr.cell_count()));
  parallel_for(tr.cell_count(), [&](std::int64_t c) {
    const Eigen::MatrixXd& th = theta.theta[static_cast<std::size_t>(c)];
    Eigen::MatrixXd constraints(1 + th.rows(), br);
    constraints.row(0).setOnes();
    constraints.bottomRows(th.rows()) = th * tr.increments().transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(constraints, Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();
    int rank = 0;
    const double cut = (s.size() && s(0) > 0.0) ? tol * s(0) : 0.0;
    while (rank < s.size() && s(rank) > cut) ++rank;
    MeasureCell& out = cells[static_cast<std::size_t>(c)];
    out.freedom = br - rank;
    out.particular = tr.branch_probs();
    out.null_basis = svd.matrixV().rightCols(out.freedom).transpose();
    detail::fix_row_signs(out.null_basis);
  });
  return cells;
}

// The unique predictable integrand psi with M = M_0 + psi . W.  Throws when
// M fails the one-step martingale property beyond tol.
inline IntegrandField martingale_representation(const AdaptedProcess& m_proc,
                                                double tol = 1e-10) {
  const FilteredTree& tr = *m_proc.tree;
  const int br = tr.branching();
  const Eigen::VectorXd& p = tr.branch_probs();
  // The increment matrix has full column rank, so one decomposition serves
  // every cell.
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(tr.increments());
  IntegrandField psi = make_integrand(m_proc.tree, m_proc.dim);
  for (NodeId c = 0; c < tr.cell_count(); ++c) {
    Eigen::MatrixXd dm(br, m_proc.dim);
    for (int b = 0; b < br; ++b) {
      dm.row(b) = m_proc.values.row(tr.child(c, b)) - m_proc.values.row(c);
    }
    const Eigen::RowVectorXd drift = p.transpose() * dm;
    if (m_proc.dim > 0 && drift.norm() > tol)
      throw NotAMartingale("process has conditional drift at cell " +
                           std::to_string(c));
    psi.at(c) = qr.solve(dm).transpose();
  }
  return psi;
}

// Generalized orthogonal decomposition of a terminal claim against the
// market X = theta . W:
//
//   h = price + (alpha . X)_T + L_T,
//
// where alpha projects the claim's representation onto the market's space
// cellwise and L = residual . W has zero covariation with X.
struct HedgeDecomposition {
  double price = 0.0;
  std::vector<Eigen::RowVectorXd> alpha;  // hedge ratios per cell, size n
  IntegrandField residual;                // integrand of L, one row
};

inline HedgeDecomposition kw_decompose(const Eigen::VectorXd& claim,
                                       const IntegrandField& theta,
                                       double tol = kDefaultRankTol) {
  validate_shape(theta);
  const FilteredTree& tr = *theta.tree;
  if (claim.size() != tr.level_size(tr.num_steps()))
    throw DimensionMismatch("claim must be a terminal node map");
  if (!claim.allFinite())
    throw DimensionMismatch("claim values must be finite");

  // Conditional expectation process of the claim.
  AdaptedProcess m_proc;
  m_proc.tree = theta.tree;
  m_proc.dim = 1;
  m_proc.values.resize(tr.node_count(), 1);
  m_proc.values.col(0).tail(claim.size()) = claim;
  const Eigen::VectorXd& p = tr.branch_probs();
  for (int t = tr.num_steps(); t-- > 0;) {
    for (NodeId k = 0; k < tr.level_size(t); ++k) {
      const NodeId v = tr.level_offset(t) + k;
      double acc = 0.0;
      for (int b = 0; b < tr.branching(); ++b)
        acc += p(b) * m_proc.values(tr.child(v, b), 0);
      m_proc.values(v, 0) = acc;
    }
  }

  const IntegrandField psi = martingale_representation(m_proc);

  HedgeDecomposition h;
  h.price = m_proc.values(0, 0);
  h.alpha.resize(static_cast<std::size_t>(tr.cell_count()));
  h.residual = make_integrand(theta.tree, 1);
  for (NodeId c = 0; c < tr.cell_count(); ++c) {
    const Eigen::MatrixXd& th = theta.at(c);
    const Eigen::MatrixXd basis = orthonormal_rows(th, tol);
    const Eigen::RowVectorXd proj = (psi.at(c) * basis.transpose()) * basis;
    // Minimal-norm ratios solving alpha theta = proj.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(th.transpose());
    h.alpha[static_cast<std::size_t>(c)] = cod.solve(proj.transpose()).transpose();
    h.residual.at(c) = psi.at(c) - proj;
  }
  return h;
}

// A market X' spanning the complement of X cellwise: stacking X and X'
// spans everything everywhere, so the joint market has a unique one-step
// martingale measure at every cell.
inline IntegrandField orthogonal_completion(const IntegrandField& theta,
                                            double tol = kDefaultRankTol) {
  validate_shape(theta);
  return realize_generator(
      complement_within(full_field(theta.tree), plugin_space(theta, tol)));
}

// Value process price + (alpha . X) + L of a decomposition of a claim
// against the market X = theta . W.  Its terminal slice reproduces the
// claim exactly.
inline AdaptedProcess hedge_value_process(const HedgeDecomposition& h,
                                          const IntegrandField& theta) {
  validate_shape(theta);
  const AdaptedProcess x = integrate(theta);
  const std::vector<Eigen::MatrixXd> ratios(h.alpha.begin(), h.alpha.end());
  const AdaptedProcess gains = integrate(ratios, x);
  const AdaptedProcess orth = integrate(h.residual);
  AdaptedProcess value;
  value.tree = theta.tree;
  value.dim = 1;
  value.values = gains.values + orth.values;
  value.values.array() += h.price;
  return value;
}

}  // namespace marketrank
