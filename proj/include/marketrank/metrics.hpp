#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "marketrank/ranking.hpp"
#include "marketrank/subspace.hpp"
#include "marketrank/tree.hpp"

namespace marketrank {

// Cellwise dimension of a subspace field together with its expectation mu
// under the predictable measure.
struct DimensionProfile {
  TreePtr tree;
  Eigen::VectorXd dd;  // one integer-valued entry per cell
  double mu = 0.0;
};

inline DimensionProfile dimension_profile(const SubspaceField& w) {
  DimensionProfile p;
  p.tree = w.tree;
  p.dd = dimension_vector(w);
  p.mu = predictable_expectation(p.dd, uniform_time_measure(w.tree));
  return p;
}

// phi(b, c) = E~ |dd(b) - dd(c)|, the expected cellwise dimension gap.
inline double phi_metric(const SubspaceField& b, const SubspaceField& c) {
  require_same_tree(*b.tree, *c.tree);
  const PredictableMeasure mu = uniform_time_measure(b.tree);
  double acc = 0.0;
  for (NodeId cell = 0; cell < b.tree->cell_count(); ++cell) {
    acc += mu.weight(cell) * std::abs(b.dim(cell) - c.dim(cell));
  }
  return acc;
}

// eta(b, c) = mu(b + c) - mu(b ^ c), the measure gap between join and meet.
inline double eta_metric(const SubspaceField& b, const SubspaceField& c,
                         double tol = kDefaultRankTol,
                         double angle_tol = kDefaultAngleTol) {
  require_same_tree(*b.tree, *c.tree);
  return dimension_profile(sum(b, c, tol)).mu -
         dimension_profile(intersect(b, c, angle_tol)).mu;
}

// Corr(b, c) = mu(b ^ c) / mu(b + c), zero when the join has measure zero.
inline double correlation(const SubspaceField& b, const SubspaceField& c,
                          double tol = kDefaultRankTol,
                          double angle_tol = kDefaultAngleTol) {
  require_same_tree(*b.tree, *c.tree);
  const double denom = dimension_profile(sum(b, c, tol)).mu;
  if (denom == 0.0) return 0.0;
  return dimension_profile(intersect(b, c, angle_tol)).mu / denom;
}

// Degree of completeness: the expected fraction of the driver's dimensions
// that the market spans, delta_c = E~(dd / m).  Equals 1 exactly when the
// market spans everything everywhere.
inline double delta_c(const IntegrandField& theta, double tol = kDefaultRankTol) {
  const RankPartition p = ranking_partition(theta, tol);
  const PredictableMeasure mu = uniform_time_measure(theta.tree);
  double acc = 0.0;
  for (NodeId cell = 0; cell < theta.tree->cell_count(); ++cell) {
    acc += mu.weight(cell) * p.label[static_cast<std::size_t>(cell)];
  }
  return acc / theta.tree->num_drivers();
}

// Degree of incompleteness.
inline double delta_i(const IntegrandField& theta, double tol = kDefaultRankTol) {
  return 1.0 - delta_c(theta, tol);
}

}  // namespace marketrank
