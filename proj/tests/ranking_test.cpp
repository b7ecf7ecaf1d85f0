#include "marketrank/ranking.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_util.hpp"

namespace marketrank {
namespace {

TEST(RankingPartition, MaskedPairLabels) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const IntegrandField theta = test::masked_pair_integrand(tree);
  const RankPartition part = ranking_partition(theta);

  ASSERT_EQ(part.label.size(), 4u);
  EXPECT_EQ(part.label[0], 2);
  EXPECT_EQ(part.label[1], 1);
  EXPECT_EQ(part.label[2], 1);
  EXPECT_EQ(part.label[3], 1);
  EXPECT_EQ(part.max_label, 2);
  EXPECT_EQ(rank(theta), 2);

  const PredictableMeasure mu = uniform_time_measure(tree);
  EXPECT_EQ(measure_of(partition_cell(part, 0), mu), 0.0);
  EXPECT_NEAR(measure_of(partition_cell(part, 1), mu), 0.5, 1e-12);
  EXPECT_NEAR(measure_of(partition_cell(part, 2), mu), 0.5, 1e-12);
}

TEST(RankingPartition, ZeroCellsGetLabelZero) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  IntegrandField theta = test::constant_market(tree, Eigen::MatrixXd::Ones(1, 2));
  theta.at(2).setZero();
  const RankPartition part = ranking_partition(theta);
  EXPECT_EQ(part.label[2], 0);
  EXPECT_EQ(part.label[0], 1);
  EXPECT_EQ(rank(theta), 1);
}

TEST(Arrangement, SpansAndPadsWithZeros) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const IntegrandField theta = test::masked_pair_integrand(tree);
  const IntegrandField u = arrangement(theta);
  ASSERT_EQ(u.rows, 2);
  EXPECT_TRUE(equals(plugin_space(u), plugin_space(theta)));

  const RankPartition part = ranking_partition(theta);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int k = part.label[static_cast<std::size_t>(c)];
    const Eigen::MatrixXd top = u.at(c).topRows(k);
    test::expect_matrix_near(top * top.transpose(),
                             Eigen::MatrixXd::Identity(k, k), 1e-12);
    EXPECT_EQ(u.at(c).bottomRows(2 - k).norm(), 0.0);
    // Row 1 spans on every cell of this market: the label never drops to 0.
    EXPECT_NEAR(u.at(c).row(0).norm(), 1.0, 1e-12);
  }
}

TEST(Sections, LabelsRestrictExactly) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const IntegrandField theta = test::masked_pair_integrand(tree);
  const PredictableSet f = PredictableSet::where(
      tree, [](NodeId c) { return c != 1; });
  const RankPartition whole = ranking_partition(theta);
  const RankPartition cut = ranking_partition(section(theta, f));
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const std::size_t i = static_cast<std::size_t>(c);
    EXPECT_EQ(cut.label[i], f.contains_cell(c) ? whole.label[i] : 0);
  }
}

TEST(MaximalExtension, SandwichedWithExactDims) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const SubspaceField a = full_field(tree);
  Eigen::MatrixXd row(1, 2);
  row << 1, 0;
  const SubspaceField b = plugin_space(test::constant_market(tree, row));

  const SubspaceField ext = maximal_extension(a, b, 2);
  EXPECT_TRUE(equals(ext, a));
  const SubspaceField same = maximal_extension(a, b, 1);
  EXPECT_TRUE(equals(same, b));

  EXPECT_THROW(maximal_extension(a, b, 0), RankOutOfRange);
  EXPECT_THROW(maximal_extension(a, b, 3), RankOutOfRange);
  EXPECT_THROW(maximal_extension(b, a, 2), NotContained);
}

TEST(StrictComplement, GapBoundIsEnforced) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const IntegrandField theta_a =
      test::constant_market(tree, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd row(1, 2);
  row << 1, 0;
  const IntegrandField theta_b = test::constant_market(tree, row);

  // n = 2, r = 1: a constant one-dimensional submarket keeps the gap at 1.
  EXPECT_TRUE(strict_complement_condition(theta_a, theta_b));

  // Masking the submarket after time 0 opens a (2, 0) gap on F^c.
  const PredictableSet f = PredictableSet::where(
      tree, [&](NodeId c) { return tree->time_of(c) == 0; });
  EXPECT_FALSE(strict_complement_condition(theta_a, section(theta_b, f)));

  // The whole market against itself has no gap at all.
  EXPECT_TRUE(strict_complement_condition(theta_a, theta_a));

  Eigen::MatrixXd outside(1, 2);
  outside << 1, 1;
  const TreePtr small = build_tree(2, 2, 1.0);
  const IntegrandField theta_c = test::constant_market(small, outside);
  const IntegrandField narrow = test::constant_market(small, row);
  EXPECT_THROW(strict_complement_condition(narrow, theta_c), NotContained);
}

}  // namespace
}  // namespace marketrank
