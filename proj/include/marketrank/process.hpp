#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "marketrank/linalg.hpp"
#include "marketrank/parallel.hpp"
#include "marketrank/tree.hpp"

namespace marketrank {

// Predictable matrix-valued integrand: one n x m matrix per cell.  The
// market it generates is X = theta . W (componentwise stochastic integral
// against the driver).
struct IntegrandField {
  TreePtr tree;
  int rows = 0;
  std::vector<Eigen::MatrixXd> theta;  // one per cell

  const Eigen::MatrixXd& at(NodeId cell) const {
    return theta[static_cast<std::size_t>(cell)];
  }
  Eigen::MatrixXd& at(NodeId cell) { return theta[static_cast<std::size_t>(cell)]; }
};

// Adapted vector process: one value per node.
struct AdaptedProcess {
  TreePtr tree;
  int dim = 0;
  Eigen::MatrixXd values;  // node_count x dim

  Eigen::RowVectorXd at(NodeId v) const { return values.row(v); }
};

inline void validate_shape(const IntegrandField& f) {
  if (!f.tree) throw DimensionMismatch("integrand has no tree");
  if (f.rows < 0) throw DimensionMismatch("integrand row count is negative");
  if (static_cast<NodeId>(f.theta.size()) != f.tree->cell_count())
    throw DimensionMismatch("integrand is not keyed by the predictable cells");
  const int m = f.tree->num_drivers();
  for (const auto& th : f.theta) {
    if (th.rows() != f.rows || th.cols() != m || !th.allFinite())
      throw DimensionMismatch("integrand entries must be finite n x m matrices");
  }
}

inline IntegrandField make_integrand(TreePtr tree, int n) {
  IntegrandField f;
  f.rows = n;
  f.theta.assign(static_cast<std::size_t>(tree->cell_count()),
                 Eigen::MatrixXd::Zero(n, tree->num_drivers()));
  f.tree = std::move(tree);
  return f;
}

inline IntegrandField constant_integrand(TreePtr tree, const Eigen::MatrixXd& value) {
  if (value.cols() != tree->num_drivers())
    throw DimensionMismatch("integrand must have one column per driver");
  IntegrandField f;
  f.rows = static_cast<int>(value.rows());
  f.theta.assign(static_cast<std::size_t>(tree->cell_count()), value);
  f.tree = std::move(tree);
  return f;
}

// The driver itself as an adapted process.
inline AdaptedProcess driver_process(TreePtr tree) {
  AdaptedProcess w;
  w.dim = tree->num_drivers();
  w.values = tree->driver();
  w.tree = std::move(tree);
  return w;
}

// X = theta . W with X_0 = 0.
inline AdaptedProcess integrate(const IntegrandField& theta) {
  validate_shape(theta);
  const FilteredTree& tr = *theta.tree;
  AdaptedProcess x;
  x.tree = theta.tree;
  x.dim = theta.rows;
  x.values.setZero(tr.node_count(), theta.rows);
  for (NodeId v = 0; v < tr.cell_count(); ++v) {
    for (int b = 0; b < tr.branching(); ++b) {
      const NodeId c = tr.child(v, b);
      x.values.row(c) =
          x.values.row(v) + (theta.at(v) * tr.increments().row(b).transpose()).transpose();
    }
  }
  return x;
}

// alpha . X for a predictable field alpha (one r x dim matrix per cell)
// against an arbitrary adapted process X.  Starts at 0.
inline AdaptedProcess integrate(const std::vector<Eigen::MatrixXd>& alpha,
                                const AdaptedProcess& x) {
  const FilteredTree& tr = *x.tree;
  if (static_cast<NodeId>(alpha.size()) != tr.cell_count())
    throw DimensionMismatch("alpha is not keyed by the predictable cells");
  const int r = alpha.empty() ? 0 : static_cast<int>(alpha.front().rows());
  AdaptedProcess y;
  y.tree = x.tree;
  y.dim = r;
  y.values.setZero(tr.node_count(), r);
  for (NodeId v = 0; v < tr.cell_count(); ++v) {
    const auto& a = alpha[static_cast<std::size_t>(v)];
    if (a.rows() != r || a.cols() != x.dim)
      throw DimensionMismatch("alpha entries must be r x dim(X)");
    for (int b = 0; b < tr.branching(); ++b) {
      const NodeId c = tr.child(v, b);
      y.values.row(c) =
          y.values.row(v) + (a * (x.values.row(c) - x.values.row(v)).transpose()).transpose();
    }
  }
  return y;
}

// Predictable covariation increment per cell: d<X,Y> = theta_A theta_B^T dt,
// because the driver has identity conditional covariance per unit time.
inline std::vector<Eigen::MatrixXd> covariation(const IntegrandField& a,
                                                const IntegrandField& b) {
  validate_shape(a);
  validate_shape(b);
  require_same_tree(*a.tree, *b.tree);
  const double dt = a.tree->step_size();
  std::vector<Eigen::MatrixXd> qv(a.theta.size());
  parallel_for(static_cast<std::int64_t>(qv.size()), [&](std::int64_t i) {
    qv[static_cast<std::size_t>(i)] =
        a.theta[static_cast<std::size_t>(i)] *
        b.theta[static_cast<std::size_t>(i)].transpose() * dt;
  });
  return qv;
}

// One-step conditional drift of every cell stays below tol.
inline bool is_martingale(const AdaptedProcess& x, double tol = 1e-10) {
  const FilteredTree& tr = *x.tree;
  const Eigen::VectorXd& p = tr.branch_probs();
  for (NodeId v = 0; v < tr.cell_count(); ++v) {
    Eigen::RowVectorXd drift = Eigen::RowVectorXd::Zero(x.dim);
    for (int b = 0; b < tr.branching(); ++b) {
      drift += p(b) * (x.values.row(tr.child(v, b)) - x.values.row(v));
    }
    if (drift.size() > 0 && drift.norm() > tol) return false;
  }
  return true;
}

// 1_F theta: the whole matrix is zeroed outside F.
inline IntegrandField section(const IntegrandField& theta, const PredictableSet& f) {
  validate_shape(theta);
  require_same_tree(*theta.tree, *f.tree);
  IntegrandField out = theta;
  for (NodeId c = 0; c < theta.tree->cell_count(); ++c) {
    if (!f.contains_cell(c)) out.at(c).setZero();
  }
  return out;
}

// Row-stack two integrands over the same tree into one joint market.
inline IntegrandField stack_integrands(const IntegrandField& a,
                                       const IntegrandField& b) {
  validate_shape(a);
  validate_shape(b);
  require_same_tree(*a.tree, *b.tree);
  IntegrandField out = make_integrand(a.tree, a.rows + b.rows);
  for (NodeId c = 0; c < a.tree->cell_count(); ++c) {
    out.at(c).topRows(a.rows) = a.at(c);
    out.at(c).bottomRows(b.rows) = b.at(c);
  }
  return out;
}

// Full row rank at every positive-weight cell.
inline bool satisfies_gamma(const IntegrandField& theta,
                            double tol = kDefaultRankTol) {
  validate_shape(theta);
  for (NodeId c = 0; c < theta.tree->cell_count(); ++c) {
    if (!(theta.tree->cell_weight(c) > 0.0)) continue;
    if (numerical_rank(theta.at(c), tol) != theta.rows) return false;
  }
  return true;
}

}  // namespace marketrank
