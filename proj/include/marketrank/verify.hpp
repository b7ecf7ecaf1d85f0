#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "marketrank/complement.hpp"
#include "marketrank/hedging.hpp"
#include "marketrank/metrics.hpp"
#include "marketrank/process.hpp"
#include "marketrank/ranking.hpp"
#include "marketrank/subspace.hpp"
#include "marketrank/tree.hpp"

namespace marketrank {

// Deterministic generator for the property suites.  The normal variates are
// produced by an explicit Box-Muller transform so that a seed yields the
// same stream on every platform, independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = uniform();
    while (u <= 0.0) u = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586 * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(eng_() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool flip(double p = 0.5) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

struct CaseCheck {
  bool ok = true;
  std::string first;

  void expect(bool cond, const std::string& msg) {
    if (cond) return;
    if (ok) first = msg;
    ok = false;
  }
};

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Well-conditioned factor: smallest singular value bounded away from zero,
// so planted ranks are unambiguous at the default threshold.
inline Eigen::MatrixXd random_factor(Rng& rng, int rows, int cols) {
  for (;;) {
    Eigen::MatrixXd f = random_matrix(rng, rows, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(f);
    if (svd.singularValues().size() == 0) return f;
    if (svd.singularValues().minCoeff() > 1e-3) return f;
  }
}

inline Eigen::MatrixXd random_rank_matrix(Rng& rng, int rows, int cols,
                                          int rank) {
  if (rank == 0) return Eigen::MatrixXd::Zero(rows, cols);
  return random_factor(rng, rows, rank) * random_factor(rng, rank, cols);
}

inline Eigen::MatrixXd random_invertible(Rng& rng, int n) {
  return random_factor(rng, n, n);
}

inline Eigen::MatrixXd random_frame(Rng& rng, int m) {  // m x m orthonormal
  return orthonormal_rows_fixed(random_factor(rng, m, m), m);
}

inline TreePtr random_tree(Rng& rng, int max_m, int max_t) {
  const int m = rng.uniform_int(1, max_m);
  const int t = rng.uniform_int(1, max_t);
  const std::array<double, 3> steps = {0.25, 0.5, 1.0};
  const double dt = steps[static_cast<std::size_t>(rng.uniform_int(0, 2))];
  if (rng.flip()) return build_tree(m, t, dt);
  Eigen::VectorXd p(m + 1);
  for (int b = 0; b <= m; ++b) p(b) = 0.2 + rng.uniform();
  p /= p.sum();
  return build_tree(m, t, dt, p);
}

struct PlantedIntegrand {
  IntegrandField theta;
  std::vector<int> rank;
};

inline PlantedIntegrand random_integrand(Rng& rng, TreePtr tree, int rows,
                                         bool allow_deficient) {
  PlantedIntegrand out;
  out.theta = make_integrand(tree, rows);
  const int m = tree->num_drivers();
  out.rank.resize(static_cast<std::size_t>(tree->cell_count()));
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int full = std::min(rows, m);
    int k = full;
    if (allow_deficient && rng.flip()) k = rng.uniform_int(0, full);
    out.theta.at(c) = random_rank_matrix(rng, rows, m, k);
    out.rank[static_cast<std::size_t>(c)] = k;
  }
  return out;
}

inline SubspaceField random_subspace_field(Rng& rng, TreePtr tree) {
  const int m = tree->num_drivers();
  SubspaceField w = zero_field(tree);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int d = rng.uniform_int(0, m);
    if (d > 0)
      w.at(c) = orthonormal_rows_fixed(random_factor(rng, d, m), d);
  }
  return w;
}

inline SubspaceField random_subfield(Rng& rng, const SubspaceField& a) {
  SubspaceField w = zero_field(a.tree);
  for (NodeId c = 0; c < a.tree->cell_count(); ++c) {
    const int da = a.dim(c);
    const int d = rng.uniform_int(0, da);
    if (d > 0)
      w.at(c) = orthonormal_rows_fixed(random_factor(rng, d, da) * a.at(c), d);
  }
  return w;
}

// Two subfields of a with a planted intersection: per cell the first
// common[c] directions of a random internal frame are shared, the rest are
// private to each side.  Both bases are then remixed so the overlap is not
// visible coordinatewise.
struct OverlapPair {
  SubspaceField b;
  SubspaceField d;
  std::vector<int> common;
  std::vector<int> joint;  // dim of b + d per cell
};

inline OverlapPair overlapping_subfields(Rng& rng, const SubspaceField& a) {
  OverlapPair out;
  out.b = zero_field(a.tree);
  out.d = zero_field(a.tree);
  const std::size_t cells = static_cast<std::size_t>(a.tree->cell_count());
  out.common.resize(cells);
  out.joint.resize(cells);
  for (NodeId c = 0; c < a.tree->cell_count(); ++c) {
    const int da = a.dim(c);
    const int k = rng.uniform_int(0, da);
    const int nb = rng.uniform_int(0, da - k);
    const int nd = rng.uniform_int(0, da - k - nb);
    out.common[static_cast<std::size_t>(c)] = k;
    out.joint[static_cast<std::size_t>(c)] = k + nb + nd;
    if (da == 0) continue;
    const Eigen::MatrixXd frame = random_frame(rng, da) * a.at(c);
    if (k + nb > 0) {
      const Eigen::MatrixXd rows = frame.topRows(k + nb);
      out.b.at(c) = orthonormal_rows_fixed(
          random_invertible(rng, k + nb) * rows, k + nb);
    }
    if (k + nd > 0) {
      Eigen::MatrixXd rows(k + nd, frame.cols());
      rows.topRows(k) = frame.topRows(k);
      rows.bottomRows(nd) = frame.middleRows(k + nb, nd);
      out.d.at(c) = orthonormal_rows_fixed(
          random_invertible(rng, k + nd) * rows, k + nd);
    }
  }
  return out;
}

// Field spanned by the frame rows named in the index subset, one subset per
// cell.  Any two such fields satisfy the star property.
inline SubspaceField frame_field(const std::vector<Eigen::MatrixXd>& frames,
                                 const std::vector<std::vector<int>>& idx,
                                 TreePtr tree) {
  SubspaceField w = zero_field(tree);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const auto& rows = idx[static_cast<std::size_t>(c)];
    if (rows.empty()) continue;
    Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()),
                      frames[static_cast<std::size_t>(c)].cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      b.row(static_cast<Eigen::Index>(r)) =
          frames[static_cast<std::size_t>(c)].row(rows[r]);
    w.at(c) = orthonormal_rows_fixed(b, static_cast<int>(rows.size()));
  }
  return w;
}

inline std::vector<int> random_subset(Rng& rng, int m) {
  std::vector<int> out;
  for (int i = 0; i < m; ++i)
    if (rng.flip()) out.push_back(i);
  return out;
}

inline AdaptedProcess martingale_from_terminal(TreePtr tree,
                                               const Eigen::MatrixXd& values) {
  AdaptedProcess m;
  m.tree = tree;
  m.dim = static_cast<int>(values.cols());
  m.values.resize(tree->node_count(), values.cols());
  for (int t = 0; t <= tree->num_steps(); ++t) {
    m.values.middleRows(tree->level_offset(t), tree->level_size(t)) =
        conditional_expectation(*tree, values, t);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Suites.  Each case draws a fresh instance and checks the laws the library
// is supposed to satisfy; a case fails when any check inside it fails.

inline void suite_tree_moments(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 4, 3);
  const FilteredTree& tr = *tree;
  const Eigen::VectorXd& p = tr.branch_probs();
  const Eigen::MatrixXd& d = tr.increments();
  const int m = tr.num_drivers();
  const double dt = tr.step_size();

  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (int b = 0; b <= m; ++b) {
    mean += p(b) * d.row(b);
    cov += p(b) * d.row(b).transpose() * d.row(b);
  }
  chk.expect(mean.norm() <= 1e-12, "increments are not centered");
  chk.expect((cov - dt * Eigen::MatrixXd::Identity(m, m)).norm() <= 1e-12,
             "one-step covariance is not dt I");

  for (int t = 0; t <= tr.num_steps(); ++t) {
    double mass = 0.0;
    for (NodeId k = 0; k < tr.level_size(t); ++k)
      mass += tr.node_prob(tr.level_offset(t) + k);
    chk.expect(std::abs(mass - 1.0) <= 1e-12, "level mass is not one");
  }

  const PredictableMeasure mu = uniform_time_measure(tree);
  chk.expect(std::abs(mu.weight.sum() - 1.0) <= 1e-12,
             "predictable measure mass is not one");

  const NodeId v = rng.uniform_int(0, static_cast<int>(tr.cell_count()) - 1);
  const int b = rng.uniform_int(0, m);
  const Eigen::RowVectorXd step =
      tr.driver().row(tr.child(v, b)) - tr.driver().row(v);
  chk.expect((step - d.row(b)).norm() <= 1e-12,
             "driver increment mismatch along an edge");
}

inline void suite_conditional_expectation(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 3);
  const FilteredTree& tr = *tree;
  const int s = tr.num_steps();
  const int dim = rng.uniform_int(1, 2);
  const Eigen::MatrixXd f =
      random_matrix(rng, static_cast<int>(tr.level_size(s)), dim);
  const Eigen::MatrixXd g =
      random_matrix(rng, static_cast<int>(tr.level_size(s)), dim);

  const int t = rng.uniform_int(0, s);
  const int u = rng.uniform_int(0, t);
  const Eigen::MatrixXd once = conditional_expectation(tr, f, u);
  const Eigen::MatrixXd tower =
      conditional_expectation(tr, conditional_expectation(tr, f, t), u);
  chk.expect((once - tower).norm() <= 1e-10, "tower property fails");

  const double a = rng.normal();
  const Eigen::MatrixXd lin = conditional_expectation(tr, a * f + g, t);
  const Eigen::MatrixXd lin2 = a * conditional_expectation(tr, f, t) +
                               conditional_expectation(tr, g, t);
  chk.expect((lin - lin2).norm() <= 1e-10, "conditioning is not linear");

  const Eigen::MatrixXd same = conditional_expectation(tr, f, s);
  chk.expect((same - f).norm() == 0.0, "conditioning on F_s must be identity");
}

inline void suite_stochastic_integration(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const int n = rng.uniform_int(1, 3);
  const IntegrandField theta = random_integrand(rng, tree, n, true).theta;
  const AdaptedProcess x = integrate(theta);
  chk.expect(is_martingale(x), "theta . W is not a martingale");
  chk.expect((x.values.row(0)).norm() == 0.0, "integral does not start at 0");

  const int r = rng.uniform_int(1, 2);
  std::vector<Eigen::MatrixXd> alpha(
      static_cast<std::size_t>(tree->cell_count()));
  IntegrandField composed = make_integrand(tree, r);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    alpha[static_cast<std::size_t>(c)] = random_matrix(rng, r, n);
    composed.at(c) = alpha[static_cast<std::size_t>(c)] * theta.at(c);
  }
  const AdaptedProcess assoc = integrate(alpha, x);
  const AdaptedProcess direct = integrate(composed);
  chk.expect((assoc.values - direct.values).norm() <= 1e-10,
             "alpha . (theta . W) differs from (alpha theta) . W");

  const IntegrandField eta = random_integrand(rng, tree, n, false).theta;
  const auto cab = covariation(theta, eta);
  const auto cba = covariation(eta, theta);
  const auto caa = covariation(theta, theta);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const auto& ab = cab[static_cast<std::size_t>(c)];
    chk.expect((ab - cba[static_cast<std::size_t>(c)].transpose()).norm() <=
                   1e-12,
               "covariation is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        caa[static_cast<std::size_t>(c)]);
    chk.expect(es.eigenvalues().minCoeff() >= -1e-12,
               "quadratic covariation is not positive semidefinite");
  }
}

inline void suite_dimension_formula(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 4, 2);
  const SubspaceField a = random_subspace_field(rng, tree);
  const OverlapPair pair = overlapping_subfields(rng, a);
  const SubspaceField s = sum(pair.b, pair.d);
  const SubspaceField inter = intersect(pair.b, pair.d);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const std::size_t i = static_cast<std::size_t>(c);
    chk.expect(inter.dim(c) == pair.common[i], "planted intersection missed");
    chk.expect(s.dim(c) == pair.joint[i], "planted sum dimension missed");
    chk.expect(s.dim(c) + inter.dim(c) == pair.b.dim(c) + pair.d.dim(c),
               "dimension formula fails");
  }
  chk.expect(contains(s, pair.b) && contains(s, pair.d),
             "sum does not contain its terms");
  chk.expect(contains(pair.b, inter) && contains(pair.d, inter),
             "intersection not inside its terms");
}

inline void suite_complement_laws(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 4, 2);
  const SubspaceField a = random_subspace_field(rng, tree);
  const SubspaceField b = random_subfield(rng, a);
  const SubspaceField c = random_subfield(rng, b);

  const SubspaceField cab = complement_within(a, b);
  chk.expect(equals(complement_within(a, cab), b), "involution fails");
  chk.expect(contains(complement_within(a, c), cab),
             "complements are not anti-monotone");
  chk.expect(
      equals(complement_within(a, c),
             sum(cab, complement_within(b, c))),
      "complement chain rule fails");
  for (NodeId cell = 0; cell < tree->cell_count(); ++cell)
    chk.expect(cab.dim(cell) == a.dim(cell) - b.dim(cell),
               "complement dimension off");

  const OverlapPair pair = overlapping_subfields(rng, a);
  chk.expect(equals(complement_within(a, intersect(pair.b, pair.d)),
                    sum(complement_within(a, pair.b),
                        complement_within(a, pair.d))),
             "De Morgan (intersection) fails");
  chk.expect(equals(complement_within(a, sum(pair.b, pair.d)),
                    intersect(complement_within(a, pair.b),
                              complement_within(a, pair.d))),
             "De Morgan (sum) fails");
}

inline void suite_orthogonal_complement(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const int na = rng.uniform_int(1, 3);
  const int nb = rng.uniform_int(1, na);
  const IntegrandField theta_a = random_integrand(rng, tree, na, true).theta;
  IntegrandField theta_b = make_integrand(tree, nb);
  IntegrandField theta_b2 = make_integrand(tree, nb);
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    theta_b.at(c) = random_matrix(rng, nb, na) * theta_a.at(c);
    theta_b2.at(c) = random_invertible(rng, nb) * theta_b.at(c);
  }

  const IntegrandField comp = orthogonal_complement(theta_a, theta_b);
  const SubspaceField wa = plugin_space(theta_a);
  const SubspaceField wb = plugin_space(theta_b);
  const SubspaceField wc = plugin_space(comp);
  chk.expect(contains(wa, wc), "complement escapes the ambient market");
  for (NodeId c = 0; c < tree->cell_count(); ++c)
    chk.expect(wa.dim(c) == wb.dim(c) + wc.dim(c),
               "complement dimensions are not additive");
  chk.expect(is_complement(wa, wb, wc),
             "is_complement rejects the canonical complement");

  const auto cross = covariation(theta_b, comp);
  for (const Eigen::MatrixXd& g : cross)
    chk.expect(g.norm() <= 1e-10, "complement is not orthogonal");

  const IntegrandField comp2 = orthogonal_complement(theta_a, theta_b2);
  chk.expect(equals(wc, plugin_space(comp2)),
             "complement depends on the generator of the submarket");
}

inline void suite_ranking(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const int n = rng.uniform_int(1, 3);
  const PlantedIntegrand planted = random_integrand(rng, tree, n, true);
  const IntegrandField& theta = planted.theta;

  const RankPartition part = ranking_partition(theta);
  int expected_max = 0;
  bool all_full = true;
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int k = planted.rank[static_cast<std::size_t>(c)];
    chk.expect(part.label[static_cast<std::size_t>(c)] == k,
               "cell label differs from the planted rank");
    if (tree->cell_weight(c) > 0.0) expected_max = std::max(expected_max, k);
    if (k != n) all_full = false;
  }
  chk.expect(rank(theta) == expected_max, "global rank is not the ess-sup");
  chk.expect(satisfies_gamma(theta) == all_full,
             "property (gamma) disagrees with the planted ranks");

  const PredictableSet f = PredictableSet::where(
      tree, [&](NodeId c) { return (c % 2) == 0; });
  const RankPartition masked = ranking_partition(section(theta, f));
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int want = f.contains_cell(c)
                         ? part.label[static_cast<std::size_t>(c)]
                         : 0;
    chk.expect(masked.label[static_cast<std::size_t>(c)] == want,
               "section labels are not 1_F times the labels");
  }

  const IntegrandField u = arrangement(theta);
  chk.expect(equals(plugin_space(u), plugin_space(theta)),
             "arrangement does not span the market's space");
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const int k = part.label[static_cast<std::size_t>(c)];
    const Eigen::MatrixXd top = u.at(c).topRows(k);
    chk.expect((top * top.transpose() -
                Eigen::MatrixXd::Identity(k, k)).norm() <= 1e-10,
               "arrangement rows are not orthonormal");
    chk.expect(u.at(c).bottomRows(u.at(c).rows() - k).norm() == 0.0,
               "arrangement rows beyond the label must vanish");
  }

  const SubspaceField v = random_subspace_field(rng, tree);
  chk.expect(equals(plugin_space(realize_generator(v)), v),
             "realized generator does not reproduce the field");

  const SubspaceField wa = plugin_space(theta);
  const SubspaceField wb = random_subfield(rng, wa);
  int max_b = 0;
  for (NodeId c = 0; c < tree->cell_count(); ++c)
    max_b = std::max(max_b, wb.dim(c));
  const int r = rng.uniform_int(max_b, tree->num_drivers());
  const SubspaceField ext = maximal_extension(wa, wb, r);
  chk.expect(contains(wa, ext) && contains(ext, wb),
             "maximal extension is not sandwiched");
  for (NodeId c = 0; c < tree->cell_count(); ++c)
    chk.expect(ext.dim(c) == std::min(r, wa.dim(c)),
               "maximal extension has the wrong dimension");
}

inline void suite_star_lattice(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const SubspaceField full = full_field(tree);

  const SubspaceField b = random_subspace_field(rng, tree);
  const SubspaceField c = random_subspace_field(rng, tree);
  const auto pair_bc = star_property_pair(b, c, kDefaultAngleTol);
  chk.expect(pair_bc.first == pair_bc.second,
             "the two star characterisations disagree");
  chk.expect(star_property(b, c) == star_property(c, b),
             "star property is not symmetric");

  // A star partner of b assembled from pieces inside b and inside its
  // orthogonal complement.
  const SubspaceField perp = complement_within(full, b);
  const SubspaceField star_c =
      sum(random_subfield(rng, b), random_subfield(rng, perp));
  chk.expect(star_property(b, star_c), "split-built pair is not a star pair");
  chk.expect(star_property(complement_within(full, b),
                           complement_within(full, star_c)),
             "star property is not stable under complements");
  chk.expect(star_property(b, complement_within(full, star_c)),
             "star property lost against the complement partner");

  // Frame-aligned triple: every pair stars, so the distributive laws and the
  // whole lattice report must come out clean.
  std::vector<Eigen::MatrixXd> frames(
      static_cast<std::size_t>(tree->cell_count()));
  for (auto& f : frames) f = random_frame(rng, tree->num_drivers());
  std::vector<std::vector<int>> ib, ic, id;
  for (NodeId cell = 0; cell < tree->cell_count(); ++cell) {
    ib.push_back(random_subset(rng, tree->num_drivers()));
    ic.push_back(random_subset(rng, tree->num_drivers()));
    id.push_back(random_subset(rng, tree->num_drivers()));
  }
  const SubspaceField fb = frame_field(frames, ib, tree);
  const SubspaceField fc = frame_field(frames, ic, tree);
  const SubspaceField fd = frame_field(frames, id, tree);
  chk.expect(star_property(fb, fc), "frame-aligned pair must star");
  chk.expect(equals(sum(fd, intersect(fb, fc)),
                    intersect(sum(fd, fb), sum(fd, fc))),
             "distributivity fails for frame-aligned fields");
  const LatticeReport report = verify_lattice_laws(full, fb, fc, fd);
  chk.expect(report.all_required_passed(),
             "lattice law report rejects a frame-aligned triple");
  for (const LawResult& law : report.laws)
    chk.expect(law.status != LawStatus::ExpectedFail,
               "frame-aligned triple must satisfy the star preconditions");
}

inline void suite_metrics(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 4, 2);
  const SubspaceField a = random_subspace_field(rng, tree);
  const OverlapPair pair = overlapping_subfields(rng, a);
  const SubspaceField& b = pair.b;
  const SubspaceField& d = pair.d;
  const SubspaceField e = random_subspace_field(rng, tree);

  chk.expect(phi_metric(b, b) == 0.0, "phi(b, b) must vanish");
  chk.expect(eta_metric(b, b) == 0.0, "eta(b, b) must vanish");
  chk.expect(phi_metric(b, d) == phi_metric(d, b), "phi is not symmetric");
  chk.expect(std::abs(eta_metric(b, d) - eta_metric(d, b)) <= 1e-12,
             "eta is not symmetric");
  chk.expect(phi_metric(b, d) <= eta_metric(b, d) + 1e-12,
             "phi exceeds eta");
  chk.expect(phi_metric(b, d) <=
                 phi_metric(b, e) + phi_metric(e, d) + 1e-12,
             "phi triangle inequality fails");
  chk.expect(eta_metric(b, d) <=
                 eta_metric(b, e) + eta_metric(e, d) + 1e-12,
             "eta triangle inequality fails");

  const SubspaceField s = sum(b, d);
  const SubspaceField inter = intersect(b, d);
  chk.expect(std::abs(eta_metric(b, d) -
                      (phi_metric(s, b) + phi_metric(s, d))) <= 1e-12,
             "eta does not split over the sum");
  chk.expect(std::abs(eta_metric(b, d) -
                      (phi_metric(b, inter) + phi_metric(d, inter))) <= 1e-12,
             "eta does not split over the intersection");

  const SubspaceField sub = random_subfield(rng, b);
  chk.expect(std::abs(eta_metric(b, sub) - phi_metric(b, sub)) <= 1e-12,
             "eta and phi differ on nested fields");
  chk.expect((eta_metric(b, d) == 0.0) == equals(b, d),
             "eta separates exactly the equal fields");
}

inline void suite_correlation(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 4, 2);
  const SubspaceField a = random_subspace_field(rng, tree);
  const SubspaceField b = random_subfield(rng, a);
  const SubspaceField c = random_subfield(rng, b);
  const PredictableMeasure mu = uniform_time_measure(tree);

  const double r_ab = correlation(a, b);
  chk.expect(r_ab >= 0.0 && r_ab <= 1.0 + 1e-12, "correlation out of range");
  if (dimension_profile(a).mu > 0.0)
    chk.expect(correlation(a, a) == 1.0, "self-correlation must be one");

  const double mu_b = dimension_profile(b).mu;
  const double mu_a = dimension_profile(a).mu;
  if (mu_a > 0.0 && mu_b > 0.0) {
    chk.expect(std::abs(correlation(a, c) -
                        correlation(a, b) * correlation(b, c)) <= 1e-12,
               "correlation chain rule fails on nested fields");
  }

  const OverlapPair pair = overlapping_subfields(rng, a);
  double mass_common = 0.0;
  for (NodeId cell = 0; cell < tree->cell_count(); ++cell)
    mass_common += mu.weight(cell) * pair.common[static_cast<std::size_t>(cell)];
  if (mass_common == 0.0)
    chk.expect(correlation(pair.b, pair.d) == 0.0,
               "disjoint fields must be uncorrelated");
}

inline void suite_completeness_duality(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const int m = tree->num_drivers();
  const int n = rng.uniform_int(1, 3);
  const PlantedIntegrand planted = random_integrand(rng, tree, n, true);
  const IntegrandField& theta = planted.theta;

  const std::vector<MeasureCell> cells = measure_polytope(theta);
  const Eigen::MatrixXd& incr = tree->increments();
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const MeasureCell& mc = cells[static_cast<std::size_t>(c)];
    chk.expect(mc.freedom == m - planted.rank[static_cast<std::size_t>(c)],
               "measure freedom is not m - dd");
    chk.expect(std::abs(mc.particular.sum() - 1.0) <= 1e-12,
               "particular measure does not sum to one");
    chk.expect((theta.at(c) * incr.transpose() * mc.particular).norm() <=
                   1e-10,
               "particular measure is not a martingale measure");
    for (Eigen::Index r = 0; r < mc.null_basis.rows(); ++r) {
      const Eigen::VectorXd q =
          mc.particular + 0.01 * mc.null_basis.row(r).transpose();
      chk.expect(std::abs(q.sum() - 1.0) <= 1e-12,
                 "null direction changes the total mass");
      chk.expect((theta.at(c) * incr.transpose() * q).norm() <= 1e-10,
                 "null direction breaks the martingale constraint");
    }
  }

  const double dc = delta_c(theta);
  const PredictableMeasure mu = uniform_time_measure(tree);
  double expect_dc = 0.0;
  for (NodeId c = 0; c < tree->cell_count(); ++c)
    expect_dc += mu.weight(c) * planted.rank[static_cast<std::size_t>(c)];
  expect_dc /= m;
  chk.expect(std::abs(dc - expect_dc) <= 1e-12,
             "degree of completeness mismatch");
  chk.expect(std::abs(delta_i(theta) - (1.0 - dc)) <= 1e-12,
             "degrees of completeness and incompleteness must sum to one");
  chk.expect(std::abs(dc - correlation(plugin_space(theta),
                                       full_field(tree))) <= 1e-12,
             "delta_c differs from the correlation with the full field");

  const IntegrandField completion = orthogonal_completion(theta);
  const IntegrandField joint = stack_integrands(theta, completion);
  chk.expect(std::abs(delta_c(joint) - 1.0) <= 1e-12,
             "completed market is not complete");
  const std::vector<MeasureCell> joint_cells = measure_polytope(joint);
  for (const MeasureCell& mc : joint_cells)
    chk.expect(mc.freedom == 0, "completed market has residual freedom");
}

inline void suite_hedging(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const FilteredTree& tr = *tree;
  const int n = rng.uniform_int(1, 2);
  const IntegrandField theta = random_integrand(rng, tree, n, true).theta;
  const Eigen::VectorXd claim =
      random_matrix(rng, static_cast<int>(tr.level_size(tr.num_steps())), 1);

  const HedgeDecomposition h = kw_decompose(claim, theta);
  chk.expect(std::abs(h.price - expectation(tr, claim)) <= 1e-10,
             "price differs from the expectation of the claim");

  const AdaptedProcess value = hedge_value_process(h, theta);
  const Eigen::VectorXd terminal =
      value.values.col(0).tail(claim.size());
  chk.expect((terminal - claim).lpNorm<Eigen::Infinity>() <= 1e-10,
             "decomposition does not reproduce the claim");

  for (const Eigen::MatrixXd& g : covariation(h.residual, theta))
    chk.expect(g.norm() <= 1e-10,
               "residual is not orthogonal to the market");

  // Attainable claims leave no residual.
  std::vector<Eigen::MatrixXd> beta(
      static_cast<std::size_t>(tree->cell_count()));
  for (auto& bcell : beta) bcell = random_matrix(rng, 1, n);
  const AdaptedProcess x = integrate(theta);
  const AdaptedProcess gains = integrate(beta, x);
  const double c0 = rng.normal();
  const Eigen::VectorXd attainable =
      (gains.values.col(0).tail(claim.size()).array() + c0).matrix();
  const HedgeDecomposition ha = kw_decompose(attainable, theta);
  chk.expect(std::abs(ha.price - c0) <= 1e-9,
             "price of an attainable claim is not its initial cost");
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    chk.expect(ha.residual.at(c).norm() <= 1e-9,
               "attainable claim leaves a residual");
    chk.expect((ha.alpha[static_cast<std::size_t>(c)] * theta.at(c) -
                beta[static_cast<std::size_t>(c)] * theta.at(c)).norm() <=
                   1e-9,
               "hedge ratios disagree with the generating strategy");
  }

  // Representation round trip for a vector martingale.
  const Eigen::MatrixXd term =
      random_matrix(rng, static_cast<int>(tr.level_size(tr.num_steps())), 2);
  const AdaptedProcess mart = martingale_from_terminal(tree, term);
  const IntegrandField psi = martingale_representation(mart);
  const AdaptedProcess back = integrate(psi);
  Eigen::MatrixXd shifted = mart.values;
  shifted.rowwise() -= mart.values.row(0);
  chk.expect((back.values - shifted).norm() <= 1e-10,
             "martingale representation round trip fails");

  AdaptedProcess drift;
  drift.tree = tree;
  drift.dim = 1;
  drift.values.resize(tr.node_count(), 1);
  for (NodeId v = 0; v < tr.node_count(); ++v)
    drift.values(v, 0) = static_cast<double>(v);
  bool threw = false;
  try {
    (void)martingale_representation(drift);
  } catch (const NotAMartingale&) {
    threw = true;
  }
  chk.expect(threw, "representation must reject a drifting process");
}

inline void suite_gram_schmidt(Rng& rng, CaseCheck& chk) {
  const TreePtr tree = random_tree(rng, 3, 2);
  const int n = rng.uniform_int(1, 3);
  const PlantedIntegrand planted = random_integrand(rng, tree, n, true);
  const IntegrandField g = gram_schmidt(planted.theta);

  chk.expect(equals(plugin_space(g), plugin_space(planted.theta)),
             "orthogonalisation changes the spanned field");
  for (NodeId c = 0; c < tree->cell_count(); ++c) {
    const Eigen::MatrixXd& rows = g.at(c);
    int nonzero = 0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double norm = rows.row(r).norm();
      if (norm > 0.0) {
        ++nonzero;
        chk.expect(std::abs(norm - 1.0) <= 1e-10,
                   "kept rows must have unit length");
      }
      for (Eigen::Index q = 0; q < r; ++q)
        chk.expect(std::abs(rows.row(r).dot(rows.row(q))) <= 1e-10,
                   "orthogonalised rows are not orthogonal");
    }
    chk.expect(nonzero == planted.rank[static_cast<std::size_t>(c)],
               "number of kept rows differs from the rank");
  }
}

}  // namespace detail

inline std::vector<SuiteResult> run_verify(int cases, std::uint64_t seed) {
  using Body = void (*)(Rng&, detail::CaseCheck&);
  const std::pair<const char*, Body> suites[] = {
      {"tree_moments", &detail::suite_tree_moments},
      {"conditional_expectation", &detail::suite_conditional_expectation},
      {"stochastic_integration", &detail::suite_stochastic_integration},
      {"dimension_formula", &detail::suite_dimension_formula},
      {"complement_laws", &detail::suite_complement_laws},
      {"orthogonal_complement", &detail::suite_orthogonal_complement},
      {"ranking", &detail::suite_ranking},
      {"star_lattice", &detail::suite_star_lattice},
      {"metrics", &detail::suite_metrics},
      {"correlation", &detail::suite_correlation},
      {"completeness_duality", &detail::suite_completeness_duality},
      {"hedging", &detail::suite_hedging},
      {"gram_schmidt", &detail::suite_gram_schmidt},
  };

  std::vector<SuiteResult> out;
  std::uint64_t suite_index = 0;
  for (const auto& [name, body] : suites) {
    SuiteResult res;
    res.name = name;
    res.cases = cases;
    const std::uint64_t base = detail::mix_seed(seed, suite_index++);
    for (int i = 0; i < cases; ++i) {
      Rng rng(detail::mix_seed(base, static_cast<std::uint64_t>(i)));
      detail::CaseCheck chk;
      body(rng, chk);
      if (!chk.ok) {
        ++res.failures;
        if (res.first_failure.empty())
          res.first_failure = "case " + std::to_string(i) + ": " + chk.first;
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace marketrank
