#include "marketrank/tree.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace marketrank {
namespace {

TEST(TreeBuild, RejectsBadShapes) {
  EXPECT_THROW(build_tree(0, 2, 1.0), NonPositiveDimension);
  EXPECT_THROW(build_tree(-1, 2, 1.0), NonPositiveDimension);
  EXPECT_THROW(build_tree(2, 0, 1.0), NonPositiveDimension);
  EXPECT_THROW(build_tree(2, 2, 0.0), NonPositiveDimension);
  EXPECT_THROW(build_tree(2, 2, -0.5), NonPositiveDimension);

  const Eigen::VectorXd wrong_size = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  EXPECT_THROW(build_tree(1, 1, 1.0, wrong_size), DegenerateProbability);
  Eigen::VectorXd negative(2);
  negative << 1.2, -0.2;
  EXPECT_THROW(build_tree(1, 1, 1.0, negative), DegenerateProbability);
  Eigen::VectorXd off_mass(2);
  off_mass << 0.6, 0.5;
  EXPECT_THROW(build_tree(1, 1, 1.0, off_mass), DegenerateProbability);
}

TEST(TreeBuild, BinaryIncrementsAreUnitSteps) {
  const TreePtr tree = build_tree(1, 1, 1.0);
  const Eigen::MatrixXd& d = tree->increments();
  ASSERT_EQ(d.rows(), 2);
  ASSERT_EQ(d.cols(), 1);
  EXPECT_NEAR(d(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(d(1, 0), -1.0, 1e-12);
}

TEST(TreeBuild, SkewedBinaryMatchesClosedForm) {
  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  const TreePtr tree = build_tree(1, 1, 1.0, p);
  // Centering and normalisation force sqrt(q/p) and -sqrt(p/q).
  EXPECT_NEAR(tree->increments()(0, 0), std::sqrt(3.0 / 7.0), 1e-12);
  EXPECT_NEAR(tree->increments()(1, 0), -std::sqrt(7.0 / 3.0), 1e-12);
}

TEST(TreeBuild, UniformIncrementsFormRegularSimplex) {
  const TreePtr tree = build_tree(2, 1, 1.0);
  const Eigen::MatrixXd& d = tree->increments();
  ASSERT_EQ(d.rows(), 3);
  for (int b = 0; b < 3; ++b)
    EXPECT_NEAR(d.row(b).norm(), std::sqrt(2.0), 1e-12);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      EXPECT_NEAR(d.row(a).dot(d.row(b)), -1.0, 1e-12);
  // First vertex points along the first axis.
  EXPECT_GT(d(0, 0), 0.0);
  EXPECT_NEAR(d(0, 1), 0.0, 1e-12);
}

TEST(TreeBuild, MomentIdentitiesAcrossShapes) {
  Eigen::VectorXd skew4(4);
  skew4 << 0.4, 0.3, 0.2, 0.1;
  struct Case {
    int m;
    double dt;
    Eigen::VectorXd probs;  // empty = uniform
  };
  std::vector<Case> cases;
  for (int m = 1; m <= 4; ++m) {
    cases.push_back({m, 1.0, {}});
    cases.push_back({m, 0.25, {}});
  }
  cases.push_back({3, 0.5, skew4});

  for (const Case& cs : cases) {
    const TreePtr tree =
        cs.probs.size() > 0
            ? build_tree(cs.m, 1, cs.dt, cs.probs)
            : build_tree(cs.m, 1, cs.dt);
    const Eigen::VectorXd& p = tree->branch_probs();
    const Eigen::MatrixXd& d = tree->increments();
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(cs.m);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(cs.m, cs.m);
    for (int b = 0; b <= cs.m; ++b) {
      mean += p(b) * d.row(b);
      cov += p(b) * d.row(b).transpose() * d.row(b);
    }
    EXPECT_LE(mean.norm(), 1e-12) << "m=" << cs.m;
    EXPECT_LE((cov - cs.dt * Eigen::MatrixXd::Identity(cs.m, cs.m)).norm(),
              1e-12)
        << "m=" << cs.m << " dt=" << cs.dt;
  }
}

TEST(TreeIndexing, LevelLayoutAndChildLinks) {
  const TreePtr tree = build_tree(2, 3, 1.0);
  EXPECT_EQ(tree->branching(), 3);
  EXPECT_EQ(tree->level_offset(0), 0);
  EXPECT_EQ(tree->level_offset(1), 1);
  EXPECT_EQ(tree->level_offset(2), 4);
  EXPECT_EQ(tree->level_offset(3), 13);
  EXPECT_EQ(tree->node_count(), 40);
  EXPECT_EQ(tree->cell_count(), 13);
  EXPECT_EQ(tree->level_size(3), 27);

  for (NodeId v = 0; v < tree->cell_count(); ++v) {
    for (int b = 0; b < 3; ++b) {
      const NodeId ch = tree->child(v, b);
      EXPECT_EQ(tree->parent(ch), v);
      EXPECT_EQ(tree->time_of(ch), tree->time_of(v) + 1);
    }
  }
  EXPECT_EQ(tree->time_of(0), 0);
}

TEST(TreeIndexing, PathProbabilitiesMultiply) {
  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  const TreePtr tree = build_tree(1, 3, 1.0, p);
  // Node reached by branches (1, 0, 1) carries probability 0.3*0.7*0.3.
  NodeId v = 0;
  v = tree->child(v, 1);
  v = tree->child(v, 0);
  v = tree->child(v, 1);
  EXPECT_NEAR(tree->node_prob(v), 0.3 * 0.7 * 0.3, 1e-15);

  for (int t = 0; t <= 3; ++t) {
    double mass = 0.0;
    for (NodeId k = 0; k < tree->level_size(t); ++k)
      mass += tree->node_prob(tree->level_offset(t) + k);
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(TreeDriver, AccumulatesIncrementsAlongEdges) {
  const TreePtr tree = build_tree(2, 2, 0.25);
  const Eigen::MatrixXd& d = tree->increments();
  for (NodeId v = 0; v < tree->cell_count(); ++v) {
    for (int b = 0; b < tree->branching(); ++b) {
      const Eigen::RowVectorXd step =
          tree->driver().row(tree->child(v, b)) - tree->driver().row(v);
      EXPECT_LE((step - d.row(b)).norm(), 1e-12);
    }
  }
  EXPECT_EQ(tree->driver().row(0).norm(), 0.0);
}

TEST(Conditioning, SquaredDriverHasVarianceTimesSteps) {
  const TreePtr tree = build_tree(1, 2, 1.0);
  const Eigen::Index terminal = tree->level_size(2);
  Eigen::MatrixXd squares(terminal, 1);
  for (Eigen::Index k = 0; k < terminal; ++k) {
    const double w = tree->driver()(tree->level_offset(2) + k, 0);
    squares(k, 0) = w * w;
  }
  EXPECT_NEAR(expectation(*tree, squares.col(0)), 2.0, 1e-12);
}

TEST(Conditioning, TowerAndIdentity) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  Eigen::MatrixXd f(tree->level_size(2), 2);
  for (Eigen::Index k = 0; k < f.rows(); ++k) {
    f(k, 0) = static_cast<double>(k) * 0.5 - 1.0;
    f(k, 1) = static_cast<double>((k * 7) % 5);
  }
  const Eigen::MatrixXd at1 = conditional_expectation(*tree, f, 1);
  const Eigen::MatrixXd at0_direct = conditional_expectation(*tree, f, 0);
  const Eigen::MatrixXd at0_tower = conditional_expectation(*tree, at1, 0);
  test::expect_matrix_near(at0_direct, at0_tower, 1e-12);

  const Eigen::MatrixXd identity = conditional_expectation(*tree, f, 2);
  test::expect_matrix_near(identity, f, 0.0);

  EXPECT_THROW(conditional_expectation(*tree, at1, 2), TimeOrderViolation);
  EXPECT_THROW(conditional_expectation(*tree, f, -1), TimeOrderViolation);
  Eigen::MatrixXd bad(5, 1);
  bad.setZero();
  EXPECT_THROW(conditional_expectation(*tree, bad, 0), DimensionMismatch);
}

TEST(PredictableMeasureTest, UniformTimeWeights) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const PredictableMeasure mu = uniform_time_measure(tree);
  EXPECT_NEAR(mu.weight.sum(), 1.0, 1e-12);

  const PredictableSet at0 = PredictableSet::where(
      tree, [&](NodeId c) { return tree->time_of(c) == 0; });
  EXPECT_NEAR(measure_of(at0, mu), 0.5, 1e-12);
  EXPECT_NEAR(measure_of(at0.complemented(), mu), 0.5, 1e-12);
}

TEST(PredictableSetTest, MaskAlgebra) {
  const TreePtr tree = build_tree(1, 2, 1.0);
  const PredictableSet all = PredictableSet::all(tree);
  const PredictableSet none = PredictableSet::none(tree);
  const PredictableSet even = PredictableSet::where(
      tree, [](NodeId c) { return c % 2 == 0; });

  EXPECT_TRUE(all.contains_cell(0));
  EXPECT_FALSE(none.contains_cell(0));
  const PredictableSet odd = even.complemented();
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    EXPECT_NE(even.contains_cell(c), odd.contains_cell(c));
    EXPECT_TRUE(set_union(even, odd).contains_cell(c));
    EXPECT_FALSE(set_intersection(even, odd).contains_cell(c));
  }
}

TEST(TreeCompare, StructuralEquality) {
  const TreePtr a = build_tree(2, 2, 1.0);
  const TreePtr b = build_tree(2, 2, 1.0);
  const TreePtr c = build_tree(2, 3, 1.0);
  EXPECT_TRUE(same_tree(*a, *b));
  EXPECT_FALSE(same_tree(*a, *c));
  EXPECT_THROW(require_same_tree(*a, *c), TreeMismatch);
}

}  // namespace
}  // namespace marketrank
