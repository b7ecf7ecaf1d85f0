#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "marketrank/linalg.hpp"
#include "marketrank/process.hpp"
#include "marketrank/subspace.hpp"

namespace marketrank {

// Cellwise rank labels of a market integrand.  Label k marks the cells on
// which the acceptance set of the market has dimension k; the partition
// cell {label = k} is predictable by construction.
struct RankPartition {
  TreePtr tree;
  std::vector<int> label;  // one per cell
  int max_label = 0;
};

inline RankPartition ranking_partition(const IntegrandField& theta,
                                       double tol = kDefaultRankTol) {
  validate_shape(theta);
  RankPartition p;
  p.tree = theta.tree;
  p.label.resize(static_cast<std::size_t>(theta.tree->cell_count()));
  parallel_for(static_cast<std::int64_t>(p.label.size()), [&](std::int64_t i) {
    p.label[static_cast<std::size_t>(i)] =
        numerical_rank(theta.theta[static_cast<std::size_t>(i)], tol);
  });
  p.max_label = 0;
  for (NodeId c = 0; c < theta.tree->cell_count(); ++c) {
    if (theta.tree->cell_weight(c) > 0.0)
      p.max_label = std::max(p.max_label, p.label[static_cast<std::size_t>(c)]);
  }
  return p;
}

// Rank of the market: the essential supremum of the cellwise dimension.
inline int rank(const IntegrandField& theta, double tol = kDefaultRankTol) {
  return ranking_partition(theta, tol).max_label;
}

inline PredictableSet partition_cell(const RankPartition& p, int k) {
  return PredictableSet::where(p.tree, [&](NodeId c) {
    return p.label[static_cast<std::size_t>(c)] == k;
  });
}

// The arrangement of a market: an m-row integrand U whose first k rows on a
// label-k cell are the canonical basis of the market's space there, the
// remaining rows zero.  Row spaces agree with the market cellwise.
inline IntegrandField arrangement(const IntegrandField& theta,
                                  double tol = kDefaultRankTol) {
  validate_shape(theta);
  const int m = theta.tree->num_drivers();
  SubspaceField w = plugin_space(theta, tol);
  IntegrandField u = make_integrand(theta.tree, m);
  for (NodeId c = 0; c < theta.tree->cell_count(); ++c) {
    const auto& b = w.at(c);
    u.at(c).topRows(b.rows()) = b;
  }
  return u;
}

// Extends b inside a to cellwise dimension min(r, dim a): all of a on cells
// where a has dimension at most r, and b plus leading canonical complement
// directions elsewhere.  Any field strictly between the result and a must
// exceed dimension r somewhere.
inline SubspaceField maximal_extension(const SubspaceField& a, const SubspaceField& b,
                                       int r, double tol = kDefaultAngleTol) {
  require_same_tree(*a.tree, *b.tree);
  if (!contains(a, b, tol))
    throw NotContained("maximal_extension requires the second field inside the first");
  int max_dim_b = 0;
  for (NodeId c = 0; c < b.tree->cell_count(); ++c)
    max_dim_b = std::max(max_dim_b, b.dim(c));
  if (r < max_dim_b || r > a.tree->num_drivers())
    throw RankOutOfRange("target rank must lie between max dim of the field and m");
  SubspaceField comp = complement_within(a, b, tol);
  SubspaceField out;
  out.tree = a.tree;
  out.basis.resize(a.basis.size());
  for (std::size_t i = 0; i < a.basis.size(); ++i) {
    const int target = std::min(r, static_cast<int>(a.basis[i].rows()));
    const int extra = target - static_cast<int>(b.basis[i].rows());
    if (extra <= 0) {
      out.basis[i] = b.basis[i];
      continue;
    }
    Eigen::MatrixXd stacked(target, a.basis[i].cols());
    stacked.topRows(b.basis[i].rows()) = b.basis[i];
    stacked.bottomRows(extra) = comp.basis[i].topRows(extra);
    out.basis[i] = orthonormal_rows_fixed(stacked, target);
  }
  return out;
}

// Strict complement condition for a submarket b of a: writing n and r for
// the two global ranks, no positive-weight cell may carry a label pair
// (i, j) with i - j > n - r.
inline bool strict_complement_condition(const IntegrandField& theta_a,
                                        const IntegrandField& theta_b,
                                        double tol = kDefaultRankTol) {
  validate_shape(theta_a);
  validate_shape(theta_b);
  require_same_tree(*theta_a.tree, *theta_b.tree);
  if (!contains(plugin_space(theta_a, tol), plugin_space(theta_b, tol)))
    throw NotContained("strict complement condition needs a submarket");
  const RankPartition pa = ranking_partition(theta_a, tol);
  const RankPartition pb = ranking_partition(theta_b, tol);
  const int n = pa.max_label;
  const int r = pb.max_label;
  for (NodeId c = 0; c < theta_a.tree->cell_count(); ++c) {
    if (!(theta_a.tree->cell_weight(c) > 0.0)) continue;
    const int i = pa.label[static_cast<std::size_t>(c)];
    const int j = pb.label[static_cast<std::size_t>(c)];
    if (i - j > n - r) return false;
  }
  return true;
}

}  // namespace marketrank
