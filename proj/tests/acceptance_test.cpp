// Acceptance checks of the library contract, one test per criterion.  The
// binary prints a PASS/FAIL line per criterion; tolerances are pinned here
// and nowhere else.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <string>

#include "marketrank/complement.hpp"
#include "marketrank/hedging.hpp"
#include "marketrank/market.hpp"
#include "marketrank/metrics.hpp"
#include "marketrank/ranking.hpp"
#include "marketrank/verify.hpp"

namespace marketrank {
namespace {

constexpr double kMetricTol = 1e-12;  // metric and correlation identities
constexpr double kAngleTol = 1e-8;    // subspace equality via principal angles
constexpr double kHedgeTol = 1e-10;   // reconstruction and covariation bounds

IntegrandField constant_rows(const TreePtr& tree, const Eigen::MatrixXd& rows) {
  IntegrandField theta = make_integrand(tree, static_cast<int>(rows.rows()));
  for (NodeId c = 0; c < tree->cell_count(); ++c) theta.at(c) = rows;
  return theta;
}

Eigen::MatrixXd row2(double x, double y) {
  Eigen::MatrixXd r(1, 2);
  r << x, y;
  return r;
}

TEST(Acceptance, Criterion01MaskedPairPartitionIsExact) {
  const MarketSpec spec = parse_market(
      "m = 2\nT = 2\ndt = 1\nlet F = ind(t == 0)\n"
      "asset S1 = [F, 0]\nasset S2 = [0, 1]\n");
  const TreePtr tree = build_market_tree(spec);
  const IntegrandField theta = build_integrand(spec, tree);

  const RankPartition part = ranking_partition(theta);
  ASSERT_EQ(part.max_label, 2);
  const PredictableSet f = PredictableSet::where(
      tree, [&](NodeId c) { return tree->time_of(c) == 0; });
  const PredictableSet rank0 = partition_cell(part, 0);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    EXPECT_EQ(part.label[static_cast<std::size_t>(c)],
              f.contains_cell(c) ? 2 : 1);
    EXPECT_FALSE(rank0.contains_cell(c));
  }

  const IntegrandField u = arrangement(theta);
  EXPECT_TRUE(equals(plugin_space(u), plugin_space(theta), kAngleTol));
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    EXPECT_NEAR(u.at(c).row(0).norm(), 1.0, kMetricTol);  // first row never dies
  }
}

TEST(Acceptance, Criterion02DriverGatedRanksFollowTheIndicator) {
  const MarketSpec spec = parse_market(
      "m = 2\nT = 2\ndt = 1\nlet delta = ind(W[1] > 0)\n"
      "asset S1 = [delta, 1]\nasset S2 = [1, 1]\n");
  const TreePtr tree = build_market_tree(spec);
  const IntegrandField theta = build_integrand(spec, tree);

  const RankPartition part = ranking_partition(theta);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const bool gated = tree->driver()(c, 0) > 0.0;  // rows collapse when delta = 1
    EXPECT_EQ(part.label[static_cast<std::size_t>(c)], gated ? 1 : 2) << c;
  }
}

TEST(Acceptance, Criterion03ComplementOfTheFirstDriverIsTheSecond) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  Eigen::MatrixXd tri(2, 2);
  tri << 1, 0, 1, 1;  // W1 and W1 + W2
  const IntegrandField theta_a = constant_rows(tree, tri);
  const IntegrandField theta_b = constant_rows(tree, row2(1, 0));

  const SubspaceField w = plugin_space(orthogonal_complement(theta_a, theta_b));
  const Eigen::MatrixXd e2 = row2(0, 1);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    ASSERT_EQ(w.dim(c), 1);
    EXPECT_LE(max_principal_sine(w.at(c), e2), kAngleTol);
    EXPECT_LE(max_principal_sine(e2, w.at(c)), kAngleTol);
  }
}

TEST(Acceptance, Criterion04DistributivityFailsWithoutTheStar) {
  const TreePtr tree = build_tree(2, 2, 1.0);
  const SubspaceField a = full_field(tree);
  const SubspaceField b = plugin_space(constant_rows(tree, row2(1, 1)));
  const SubspaceField c = plugin_space(constant_rows(tree, row2(1, 2)));
  const SubspaceField d = plugin_space(constant_rows(tree, row2(1, 0)));

  EXPECT_FALSE(star_property(d, b));

  const SubspaceField lhs = sum(d, intersect(b, c));
  const SubspaceField rhs = intersect(sum(d, b), sum(d, c));
  for (NodeId cell = 0; cell < tree->cell_count(); ++cell) {
    EXPECT_EQ(lhs.dim(cell), 1);
    EXPECT_EQ(rhs.dim(cell), 2);
  }

  const LatticeReport report = verify_lattice_laws(a, b, c, d);
  const LawResult* dist = nullptr;
  for (const LawResult& law : report.laws)
    if (law.name == "distributive_sum_over_intersection") dist = &law;
  ASSERT_NE(dist, nullptr);
  EXPECT_EQ(dist->status, LawStatus::ExpectedFail);
  EXPECT_EQ(dist->lhs_dim, 1);
  EXPECT_EQ(dist->rhs_dim, 2);
}

TEST(Acceptance, Criterion05DimensionFormulaIsIntegerExact) {
  for (int i = 0; i < 200; ++i) {
    Rng rng(detail::mix_seed(0xA5, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const SubspaceField a = detail::random_subspace_field(rng, tree);
    const detail::OverlapPair pair = detail::overlapping_subfields(rng, a);
    const SubspaceField s = sum(pair.b, pair.d);
    const SubspaceField meet = intersect(pair.b, pair.d);
    for (NodeId c = 0; c < tree->cell_count(); ++c) {
      const std::size_t k = static_cast<std::size_t>(c);
      ASSERT_EQ(meet.dim(c), pair.common[k]) << "case " << i << " cell " << c;
      ASSERT_EQ(s.dim(c), pair.joint[k]) << "case " << i << " cell " << c;
      ASSERT_EQ(s.dim(c) + meet.dim(c), pair.b.dim(c) + pair.d.dim(c))
          << "case " << i << " cell " << c;
    }
  }
}

TEST(Acceptance, Criterion06ComplementLawsOnRandomNestedTriples) {
  for (int i = 0; i < 200; ++i) {
    Rng rng(detail::mix_seed(0xA6, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const SubspaceField a = detail::random_subspace_field(rng, tree);
    const SubspaceField b = detail::random_subfield(rng, a);
    const SubspaceField c = detail::random_subfield(rng, b);

    const SubspaceField cb = complement_within(a, b);
    const SubspaceField cc = complement_within(a, c);
    ASSERT_TRUE(equals(complement_within(a, cb), b, kAngleTol)) << "case " << i;
    ASSERT_TRUE(equals(cc, sum(cb, complement_within(b, c)), kAngleTol))
        << "case " << i;
    ASSERT_TRUE(equals(complement_within(a, intersect(b, c)), sum(cb, cc),
                       kAngleTol))
        << "case " << i;
    ASSERT_TRUE(equals(complement_within(a, sum(b, c)), intersect(cb, cc),
                       kAngleTol))
        << "case " << i;
    ASSERT_TRUE(contains(cc, cb, kAngleTol)) << "case " << i;
  }
}

TEST(Acceptance, Criterion07OrthogonalComplementContract) {
  for (int i = 0; i < 200; ++i) {
    Rng rng(detail::mix_seed(0xA7, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const SubspaceField wa = detail::random_subspace_field(rng, tree);
    const SubspaceField wb = detail::random_subfield(rng, wa);
    const IntegrandField theta_a = realize_generator(wa);
    const IntegrandField theta_b = realize_generator(wb);

    const IntegrandField comp = orthogonal_complement(theta_a, theta_b);
    const SubspaceField wc = plugin_space(comp);
    for (NodeId c = 0; c < tree->cell_count(); ++c)
      ASSERT_EQ(wb.dim(c) + wc.dim(c), wa.dim(c)) << "case " << i;
    for (const Eigen::MatrixXd& g : covariation(theta_b, comp))
      ASSERT_LE(g.lpNorm<Eigen::Infinity>(), kHedgeTol) << "case " << i;

    // The complement depends on the spanned spaces, not on the generators.
    IntegrandField ta2 = theta_a;
    IntegrandField tb2 = theta_b;
    const int m = tree->num_drivers();
    for (NodeId c = 0; c < tree->cell_count(); ++c) {
      ta2.at(c) = detail::random_invertible(rng, m) * theta_a.at(c);
      tb2.at(c) = detail::random_invertible(rng, m) * theta_b.at(c);
    }
    ASSERT_TRUE(equals(plugin_space(orthogonal_complement(ta2, tb2)), wc,
                       kAngleTol))
        << "case " << i;
  }
}

TEST(Acceptance, Criterion08HedgingReconstructsEveryClaim) {
  for (int i = 0; i < 100; ++i) {
    Rng rng(detail::mix_seed(0xA8, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const int m = tree->num_drivers();
    const int rows = rng.uniform_int(1, 3);
    const IntegrandField theta =
        detail::random_integrand(rng, tree, rows, true).theta;

    const int terminal = tree->level_size(tree->num_steps());
    Eigen::VectorXd claim(terminal);
    for (int k = 0; k < terminal; ++k) claim(k) = rng.normal();

    const HedgeDecomposition h = kw_decompose(claim, theta);
    ASSERT_NEAR(h.price, expectation(*tree, claim), kHedgeTol) << "case " << i;
    const AdaptedProcess value = hedge_value_process(h, theta);
    for (int k = 0; k < terminal; ++k) {
      ASSERT_NEAR(value.values(tree->level_offset(tree->num_steps()) + k, 0),
                  claim(k), kHedgeTol)
          << "case " << i;
    }
    for (const Eigen::MatrixXd& g : covariation(theta, h.residual))
      ASSERT_LE(g.lpNorm<Eigen::Infinity>(), kHedgeTol) << "case " << i;

    // A spanning market absorbs the whole claim.
    const IntegrandField full =
        detail::random_integrand(rng, tree, m, false).theta;
    const HedgeDecomposition h2 = kw_decompose(claim, full);
    for (NodeId c = 0; c < tree->cell_count(); ++c)
      ASSERT_LE(h2.residual.at(c).norm(), kHedgeTol) << "case " << i;
  }
}

TEST(Acceptance, Criterion09FreedomAndRankAreDual) {
  for (int i = 0; i < 200; ++i) {
    Rng rng(detail::mix_seed(0xA9, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const int m = tree->num_drivers();
    const int rows = rng.uniform_int(1, 4);
    const IntegrandField theta =
        detail::random_integrand(rng, tree, rows, true).theta;

    const SubspaceField w = plugin_space(theta);
    const std::vector<MeasureCell> cells = measure_polytope(theta);
    bool all_pinned = true;
    for (NodeId c = 0; c < tree->cell_count(); ++c) {
      const int freedom = cells[static_cast<std::size_t>(c)].freedom;
      ASSERT_EQ(freedom, m - w.dim(c)) << "case " << i << " cell " << c;
      all_pinned = all_pinned && freedom == 0;
    }
    const bool complete = delta_c(theta) > 1.0 - kMetricTol;
    ASSERT_EQ(complete, all_pinned) << "case " << i;
  }
}

TEST(Acceptance, Criterion10EtaIsAMetricAndDominatesPhi) {
  for (int i = 0; i < 500; ++i) {
    Rng rng(detail::mix_seed(0xB0, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const SubspaceField a = detail::random_subspace_field(rng, tree);
    const SubspaceField b = detail::random_subspace_field(rng, tree);
    const SubspaceField c = detail::random_subspace_field(rng, tree);

    ASSERT_NEAR(eta_metric(a, b), eta_metric(b, a), kMetricTol) << "case " << i;
    ASSERT_LE(eta_metric(a, a), kMetricTol) << "case " << i;
    ASSERT_EQ(eta_metric(a, b) <= kMetricTol, equals(a, b, kAngleTol))
        << "case " << i;
    ASSERT_LE(eta_metric(a, c),
              eta_metric(a, b) + eta_metric(b, c) + kMetricTol)
        << "case " << i;
    ASSERT_GE(eta_metric(a, b), phi_metric(a, b) - kMetricTol) << "case " << i;

    const SubspaceField d = detail::random_subfield(rng, a);
    ASSERT_NEAR(eta_metric(a, d), phi_metric(a, d), kMetricTol) << "case " << i;
  }
}

TEST(Acceptance, Criterion11CorrelationCharacterisations) {
  for (int i = 0; i < 500; ++i) {
    Rng rng(detail::mix_seed(0xB1, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const SubspaceField b = detail::random_subspace_field(rng, tree);
    const SubspaceField e = detail::random_subspace_field(rng, tree);

    const double r = correlation(b, e);
    ASSERT_GE(r, -kMetricTol) << "case " << i;
    ASSERT_LE(r, 1.0 + kMetricTol) << "case " << i;
    const double mu_meet = dimension_profile(intersect(b, e)).mu;
    const double mu_join = dimension_profile(sum(b, e)).mu;
    ASSERT_EQ(r <= kMetricTol, mu_meet <= kMetricTol) << "case " << i;
    if (mu_join > kMetricTol) {
      ASSERT_EQ(r >= 1.0 - kMetricTol, equals(b, e, kAngleTol)) << "case " << i;
    }

    const SubspaceField c = detail::random_subfield(rng, b);
    const SubspaceField d = detail::random_subfield(rng, c);
    ASSERT_NEAR(correlation(b, d), correlation(b, c) * correlation(c, d),
                kMetricTol)
        << "case " << i;
  }
}

TEST(Acceptance, Criterion12GramSchmidtOrthogonalisesEveryCell) {
  for (int i = 0; i < 200; ++i) {
    Rng rng(detail::mix_seed(0xB2, static_cast<std::uint64_t>(i)));
    const TreePtr tree = detail::random_tree(rng, 4, 4);
    const int rows = rng.uniform_int(1, 4);
    const IntegrandField theta =
        detail::random_integrand(rng, tree, rows, true).theta;

    const IntegrandField g = gram_schmidt(theta);
    const std::vector<Eigen::MatrixXd> cov = covariation(g, g);
    for (NodeId c = 0; c < tree->cell_count(); ++c) {
      Eigen::MatrixXd off = cov[static_cast<std::size_t>(c)];
      off.diagonal().setZero();
      ASSERT_LE(off.lpNorm<Eigen::Infinity>(), kHedgeTol)
          << "case " << i << " cell " << c;
    }
    ASSERT_TRUE(equals(plugin_space(g), plugin_space(theta), kAngleTol))
        << "case " << i;
  }
}

TEST(Acceptance, Criterion13DeskValueOfTheMaskedPair) {
  const MarketSpec spec = parse_market(
      "m = 2\nT = 2\ndt = 1\nlet F = ind(t == 0)\n"
      "asset S1 = [F, 0]\nasset S2 = [0, 1]\n");
  const IntegrandField theta = build_integrand(spec, build_market_tree(spec));
  EXPECT_NEAR(delta_c(theta), 0.75, kMetricTol);
}

}  // namespace
}  // namespace marketrank

namespace {

class CriterionLine : public ::testing::EmptyTestEventListener {
  void OnTestEnd(const ::testing::TestInfo& info) override {
    std::printf("[%s] %s\n", info.name(),
                info.result()->Passed() ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionLine);
  return RUN_ALL_TESTS();
}
