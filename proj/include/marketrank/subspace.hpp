#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "marketrank/linalg.hpp"
#include "marketrank/parallel.hpp"
#include "marketrank/process.hpp"
#include "marketrank/tree.hpp"

namespace marketrank {

// Predictable field of subspaces of R^m, one per cell, each stored as an
// orthonormal row basis in canonical form (SVD right vectors by descending
// singular value, first significant entry of each row positive).  The field
// attached to a market X = theta . W assigns each cell the row space of
// theta; every lattice operation below is cellwise.
struct SubspaceField {
  TreePtr tree;
  std::vector<Eigen::MatrixXd> basis;  // dim x m per cell

  int dim(NodeId cell) const {
    return static_cast<int>(basis[static_cast<std::size_t>(cell)].rows());
  }
  const Eigen::MatrixXd& at(NodeId cell) const {
    return basis[static_cast<std::size_t>(cell)];
  }
  Eigen::MatrixXd& at(NodeId cell) { return basis[static_cast<std::size_t>(cell)]; }
};

inline SubspaceField zero_field(TreePtr tree) {
  SubspaceField w;
  w.basis.assign(static_cast<std::size_t>(tree->cell_count()),
                 Eigen::MatrixXd(0, tree->num_drivers()));
  w.tree = std::move(tree);
  return w;
}

inline SubspaceField full_field(TreePtr tree) {
  SubspaceField w;
  const int m = tree->num_drivers();
  w.basis.assign(static_cast<std::size_t>(tree->cell_count()),
                 Eigen::MatrixXd::Identity(m, m));
  w.tree = std::move(tree);
  return w;
}

// Row space of theta per cell.  Rank decisions use the relative singular
// value threshold tol.
inline SubspaceField plugin_space(const IntegrandField& theta,
                                  double tol = kDefaultRankTol) {
  validate_shape(theta);
  SubspaceField w;
  w.tree = theta.tree;
  w.basis.resize(theta.theta.size());
  parallel_for(static_cast<std::int64_t>(w.basis.size()), [&](std::int64_t i) {
    w.basis[static_cast<std::size_t>(i)] =
        orthonormal_rows(theta.theta[static_cast<std::size_t>(i)], tol);
  });
  return w;
}

inline Eigen::VectorXd dimension_vector(const SubspaceField& w) {
  Eigen::VectorXd dd(static_cast<Eigen::Index>(w.basis.size()));
  for (Eigen::Index i = 0; i < dd.size(); ++i) dd(i) = w.dim(i);
  return dd;
}

inline SubspaceField sum(const SubspaceField& a, const SubspaceField& b,
                         double tol = kDefaultRankTol) {
  require_same_tree(*a.tree, *b.tree);
  SubspaceField w;
  w.tree = a.tree;
  w.basis.resize(a.basis.size());
  parallel_for(static_cast<std::int64_t>(w.basis.size()), [&](std::int64_t i) {
    const auto& ba = a.basis[static_cast<std::size_t>(i)];
    const auto& bb = b.basis[static_cast<std::size_t>(i)];
    if (ba.rows() == 0) {
      w.basis[static_cast<std::size_t>(i)] = bb;
    } else if (bb.rows() == 0) {
      w.basis[static_cast<std::size_t>(i)] = ba;
    } else {
      Eigen::MatrixXd stacked(ba.rows() + bb.rows(), ba.cols());
      stacked << ba, bb;
      w.basis[static_cast<std::size_t>(i)] = orthonormal_rows(stacked, tol);
    }
  });
  return w;
}

// Cellwise intersection by the principal angle method: directions of b whose
// principal angle against a stays below angle_tol are retained.  Angles are
// computed from projection residuals, which keeps tiny angles accurate where
// cosines saturate.
inline SubspaceField intersect(const SubspaceField& a, const SubspaceField& b,
                               double angle_tol = kDefaultAngleTol) {
  require_same_tree(*a.tree, *b.tree);
  const double sine_cut = std::sin(std::min(angle_tol, 1.5707963267948966));
  SubspaceField w;
  w.tree = a.tree;
  w.basis.resize(a.basis.size());
  parallel_for(static_cast<std::int64_t>(w.basis.size()), [&](std::int64_t i) {
    const auto& ba = a.basis[static_cast<std::size_t>(i)];
    const auto& bb = b.basis[static_cast<std::size_t>(i)];
    if (ba.rows() == 0 || bb.rows() == 0) {
      w.basis[static_cast<std::size_t>(i)] = Eigen::MatrixXd(0, ba.cols());
      return;
    }
    // Basis rows of b never outnumber the columns, so the thin SVD yields
    // exactly bb.rows() singular values s_k = sin(angle_k), descending.
    Eigen::MatrixXd g = bb - (bb * ba.transpose()) * ba;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    int keep = 0;
    for (Eigen::Index k = s.size(); k-- > 0;) {
      if (s(k) < sine_cut) ++keep;
      else break;
    }
    if (keep == 0) {
      w.basis[static_cast<std::size_t>(i)] = Eigen::MatrixXd(0, ba.cols());
      return;
    }
    Eigen::MatrixXd coeff(keep, bb.rows());
    for (int r = 0; r < keep; ++r) {
      coeff.row(r) = svd.matrixU().col(s.size() - 1 - r).transpose();
    }
    w.basis[static_cast<std::size_t>(i)] =
        orthonormal_rows_fixed(coeff * bb, keep);
  });
  return w;
}

// True when b lies inside a at every cell: the largest principal angle of
// b against a stays below tol (radians).
inline bool contains(const SubspaceField& a, const SubspaceField& b,
                     double tol = kDefaultAngleTol) {
  require_same_tree(*a.tree, *b.tree);
  const double sine_cut = std::sin(std::min(tol, 1.5707963267948966));
  for (std::size_t i = 0; i < a.basis.size(); ++i) {
    if (b.basis[i].rows() == 0) continue;
    if (b.basis[i].rows() > a.basis[i].rows()) return false;
    if (max_principal_sine(b.basis[i], a.basis[i]) >= sine_cut) return false;
  }
  return true;
}

inline bool equals(const SubspaceField& a, const SubspaceField& b,
                   double tol = kDefaultAngleTol) {
  return contains(a, b, tol) && contains(b, a, tol);
}

// Cellwise orthogonal complement of b inside a; requires contains(a, b).
// The dimension of the result is dim a - dim b exactly, by construction.
inline SubspaceField complement_within(const SubspaceField& a, const SubspaceField& b,
                                       double tol = kDefaultAngleTol) {
  require_same_tree(*a.tree, *b.tree);
  if (!contains(a, b, tol))
    throw NotContained("complement_within requires the second field inside the first");
  SubspaceField w;
  w.tree = a.tree;
  w.basis.resize(a.basis.size());
  parallel_for(static_cast<std::int64_t>(w.basis.size()), [&](std::int64_t i) {
    const auto& ba = a.basis[static_cast<std::size_t>(i)];
    const auto& bb = b.basis[static_cast<std::size_t>(i)];
    const int k = static_cast<int>(ba.rows() - bb.rows());
    if (k <= 0) {
      w.basis[static_cast<std::size_t>(i)] = Eigen::MatrixXd(0, ba.cols());
      return;
    }
    if (bb.rows() == 0) {
      w.basis[static_cast<std::size_t>(i)] = ba;
      return;
    }
    Eigen::MatrixXd g = ba - (ba * bb.transpose()) * bb;
    w.basis[static_cast<std::size_t>(i)] = orthonormal_rows_fixed(g, k);
  });
  return w;
}

// Integrand with m rows whose row space reproduces the field: the first
// dim(cell) rows are the basis rows under the bounded-generator scaling
// f / (1 + |f|), the rest are zero.
inline IntegrandField realize_generator(const SubspaceField& w) {
  const int m = w.tree->num_drivers();
  IntegrandField f = make_integrand(w.tree, m);
  for (NodeId c = 0; c < w.tree->cell_count(); ++c) {
    const auto& b = w.at(c);
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      f.at(c).row(r) = b.row(r) / (1.0 + b.row(r).norm());
    }
  }
  return f;
}

}  // namespace marketrank
