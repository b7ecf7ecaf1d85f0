#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "marketrank/errors.hpp"

namespace marketrank {

using NodeId = std::int64_t;

// Finite filtered probability space on an (m+1)-ary recombining-free tree
// with T steps of size dt.  Each node branches into m+1 children; the
// one-step driver increments delta_1..delta_{m+1} satisfy
//
//   sum_b p_b delta_b = 0        and   sum_b p_b delta_b delta_b^T = dt I_m,
//
// so the m-dimensional driver W is an exact martingale with conditional
// covariance dt per step.  Increments are the canonical solution of the two
// moment constraints: the orthonormal completion of sqrt(p) by the
// coordinate directions, scaled back by sqrt(dt/p_b).  With uniform
// probabilities this is the regular simplex of radius sqrt(m dt) with the
// first vertex along axis 1.
//
// Nodes are indexed breadth first; children are contiguous in branch order.
// Predictable cells are the nodes at times 0..T-1.
class FilteredTree {
 public:
  FilteredTree(int m, int T, double dt, Eigen::VectorXd probs,
               Eigen::MatrixXd increments)
      : m_(m), T_(T), dt_(dt), probs_(std::move(probs)),
        increments_(std::move(increments)) {
    level_offset_.resize(static_cast<std::size_t>(T_) + 2);
    level_offset_[0] = 0;
    NodeId width = 1;
    for (int t = 0; t <= T_; ++t) {
      level_offset_[static_cast<std::size_t>(t) + 1] =
          level_offset_[static_cast<std::size_t>(t)] + width;
      width *= branching();
    }
    node_prob_.resize(node_count());
    driver_.resize(node_count(), m_);
    node_prob_(0) = 1.0;
    driver_.row(0).setZero();
    for (NodeId v = 0; v < cell_count(); ++v) {
      for (int b = 0; b < branching(); ++b) {
        const NodeId c = child(v, b);
        node_prob_(c) = node_prob_(v) * probs_(b);
        driver_.row(c) = driver_.row(v) + increments_.row(b);
      }
    }
  }

  int num_drivers() const { return m_; }
  int num_steps() const { return T_; }
  double step_size() const { return dt_; }
  int branching() const { return m_ + 1; }

  NodeId node_count() const { return level_offset_[static_cast<std::size_t>(T_) + 1]; }
  // Nodes with children, i.e. the predictable cells.
  NodeId cell_count() const { return level_offset_[static_cast<std::size_t>(T_)]; }
  NodeId level_offset(int t) const { return level_offset_[static_cast<std::size_t>(t)]; }
  NodeId level_size(int t) const {
    return level_offset_[static_cast<std::size_t>(t) + 1] -
           level_offset_[static_cast<std::size_t>(t)];
  }

  int time_of(NodeId v) const {
    int t = 0;
    while (level_offset_[static_cast<std::size_t>(t) + 1] <= v) ++t;
    return t;
  }

  NodeId child(NodeId v, int branch) const {
    const int t = time_of(v);
    return level_offset(t + 1) + (v - level_offset(t)) * branching() + branch;
  }

  NodeId parent(NodeId v) const {
    const int t = time_of(v);
    return level_offset(t - 1) + (v - level_offset(t)) / branching();
  }

  const Eigen::VectorXd& branch_probs() const { return probs_; }
  // Row b is delta_b, shape (m+1) x m.
  const Eigen::MatrixXd& increments() const { return increments_; }
  double node_prob(NodeId v) const { return node_prob_(v); }
  // Weight of a predictable cell under the product of P with the uniform
  // distribution over the T trading times.
  double cell_weight(NodeId cell) const { return node_prob_(cell) / T_; }
  // Driver value W per node, shape node_count x m.
  const Eigen::MatrixXd& driver() const { return driver_; }

 private:
  int m_;
  int T_;
  double dt_;
  Eigen::VectorXd probs_;
  Eigen::MatrixXd increments_;
  std::vector<NodeId> level_offset_;
  Eigen::VectorXd node_prob_;
  Eigen::MatrixXd driver_;
};

using TreePtr = std::shared_ptr<const FilteredTree>;

namespace detail {

// Orthonormal completion of sqrt(p) by e_1..e_m, columns of the result.
inline Eigen::MatrixXd complete_sqrt_probs(const Eigen::VectorXd& p) {
  const Eigen::Index n = p.size();        // m + 1
  const Eigen::Index m = n - 1;
  Eigen::MatrixXd cols(n, m + 1);
  cols.col(0) = p.array().sqrt();
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v(j) = 1.0;
    for (Eigen::Index k = 0; k <= j; ++k) {
      v -= (v.dot(cols.col(k))) * cols.col(k);
    }
    // Repeat once; plain Gram-Schmidt loses orthogonality otherwise.
    for (Eigen::Index k = 0; k <= j; ++k) {
      v -= (v.dot(cols.col(k))) * cols.col(k);
    }
    cols.col(j + 1) = v / v.norm();
  }
  return cols.rightCols(m);
}

}  // namespace detail

inline TreePtr build_tree(int m, int T, double dt,
                          std::optional<Eigen::VectorXd> probs = std::nullopt) {
  if (m < 1) throw NonPositiveDimension("driver dimension must be at least 1");
  if (T < 1) throw NonPositiveDimension("number of steps must be at least 1");
  if (!(dt > 0.0)) throw NonPositiveDimension("step size must be positive");
  Eigen::VectorXd p;
  if (probs) {
    p = *probs;
    if (p.size() != m + 1)
      throw DegenerateProbability("branch probabilities must have m+1 entries");
    if ((p.array() <= 0.0).any())
      throw DegenerateProbability("branch probabilities must be strictly positive");
    if (std::abs(p.sum() - 1.0) > 1e-12)
      throw DegenerateProbability("branch probabilities must sum to 1");
  } else {
    p = Eigen::VectorXd::Constant(m + 1, 1.0 / (m + 1));
  }
  const Eigen::MatrixXd v = detail::complete_sqrt_probs(p);
  Eigen::MatrixXd increments(m + 1, m);
  for (int b = 0; b <= m; ++b) {
    increments.row(b) = std::sqrt(dt) / std::sqrt(p(b)) * v.row(b);
  }
  return std::make_shared<const FilteredTree>(m, T, dt, std::move(p),
                                              std::move(increments));
}

inline bool same_tree(const FilteredTree& a, const FilteredTree& b) {
  if (&a == &b) return true;
  return a.num_drivers() == b.num_drivers() && a.num_steps() == b.num_steps() &&
         a.step_size() == b.step_size() && a.branch_probs() == b.branch_probs();
}

inline void require_same_tree(const FilteredTree& a, const FilteredTree& b) {
  if (!same_tree(a, b)) throw TreeMismatch("fields live on different trees");
}

// Indicator over the predictable cells, closed under complement, union and
// intersection.
struct PredictableSet {
  TreePtr tree;
  std::vector<std::uint8_t> mask;  // one flag per cell

  static PredictableSet none(TreePtr t) {
    PredictableSet s;
    s.mask.assign(static_cast<std::size_t>(t->cell_count()), 0);
    s.tree = std::move(t);
    return s;
  }
  static PredictableSet all(TreePtr t) {
    PredictableSet s;
    s.mask.assign(static_cast<std::size_t>(t->cell_count()), 1);
    s.tree = std::move(t);
    return s;
  }
  static PredictableSet where(TreePtr t, const std::function<bool(NodeId)>& pred) {
    PredictableSet s = none(std::move(t));
    for (NodeId c = 0; c < s.tree->cell_count(); ++c) {
      s.mask[static_cast<std::size_t>(c)] = pred(c) ? 1 : 0;
    }
    return s;
  }
  bool contains_cell(NodeId c) const { return mask[static_cast<std::size_t>(c)] != 0; }

  PredictableSet complemented() const {
    PredictableSet s = *this;
    for (auto& b : s.mask) b = b ? 0 : 1;
    return s;
  }
  friend PredictableSet set_union(const PredictableSet& a, const PredictableSet& b) {
    require_same_tree(*a.tree, *b.tree);
    PredictableSet s = a;
    for (std::size_t i = 0; i < s.mask.size(); ++i) s.mask[i] = s.mask[i] | b.mask[i];
    return s;
  }
  friend PredictableSet set_intersection(const PredictableSet& a,
                                         const PredictableSet& b) {
    require_same_tree(*a.tree, *b.tree);
    PredictableSet s = a;
    for (std::size_t i = 0; i < s.mask.size(); ++i) s.mask[i] = s.mask[i] & b.mask[i];
    return s;
  }
};

// Measure on the predictable cells: P(node) spread uniformly over the T
// trading times.  Total mass 1.
struct PredictableMeasure {
  TreePtr tree;
  Eigen::VectorXd weight;  // one weight per cell
};

inline PredictableMeasure uniform_time_measure(TreePtr tree) {
  PredictableMeasure mu;
  mu.weight.resize(tree->cell_count());
  for (NodeId c = 0; c < tree->cell_count(); ++c) mu.weight(c) = tree->cell_weight(c);
  mu.tree = std::move(tree);
  return mu;
}

inline double predictable_expectation(const Eigen::VectorXd& f,
                                      const PredictableMeasure& mu) {
  if (f.size() != mu.weight.size())
    throw DimensionMismatch("cell function has wrong length");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += mu.weight(i) * f(i);
  return acc;
}

inline double measure_of(const PredictableSet& f, const PredictableMeasure& mu) {
  require_same_tree(*f.tree, *mu.tree);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.weight.size(); ++i) {
    if (f.mask[static_cast<std::size_t>(i)]) acc += mu.weight(i);
  }
  return acc;
}

// E[f | F_t] for a function given on one time slice (rows in node order of
// that slice, one column per component).  The source time is recovered from
// the row count.  Returns the slice at time t.
inline Eigen::MatrixXd conditional_expectation(const FilteredTree& tree,
                                               const Eigen::MatrixXd& values,
                                               int t) {
  int s = -1;
  for (int u = 0; u <= tree.num_steps(); ++u) {
    if (tree.level_size(u) == values.rows()) {
      s = u;
      break;
    }
  }
  if (s < 0) throw DimensionMismatch("values do not match any time slice");
  if (t < 0 || t > s)
    throw TimeOrderViolation("conditioning time must lie in [0, source time]");
  Eigen::MatrixXd cur = values;
  const int br = tree.branching();
  const Eigen::VectorXd& p = tree.branch_probs();
  for (int u = s; u > t; --u) {
    Eigen::MatrixXd next(tree.level_size(u - 1), cur.cols());
    for (NodeId k = 0; k < next.rows(); ++k) {
      next.row(k).setZero();
      for (int b = 0; b < br; ++b) next.row(k) += p(b) * cur.row(k * br + b);
    }
    cur = std::move(next);
  }
  return cur;
}

inline double expectation(const FilteredTree& tree, const Eigen::VectorXd& values) {
  return conditional_expectation(tree, values, 0)(0, 0);
}

}  // namespace marketrank
