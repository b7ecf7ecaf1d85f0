#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace marketrank {

// Relative singular value threshold for numerical rank decisions.
inline constexpr double kDefaultRankTol = 1e-9;

// Principal angle tolerance (radians) for containment and intersection.
inline constexpr double kDefaultAngleTol = 1e-8;

namespace detail {

// Entries smaller than this are skipped when picking the sign pivot of a
// canonical basis row.  Rows are unit length so the scale is absolute.
inline constexpr double kSignEps = 1e-12;

inline void fix_row_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double x = rows(i, j);
      if (std::abs(x) > kSignEps) {
        if (x < 0.0) rows.row(i) = -rows.row(i);
        break;
      }
    }
  }
}

}  // namespace detail

inline int numerical_rank(const Eigen::MatrixXd& a, double tol = kDefaultRankTol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) return 0;
  const double cut = tol * s(0);
  int r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return r;
}

// Canonical orthonormal basis of the row space of `a`: right singular
// vectors ordered by descending singular value, first significant entry of
// each row made positive.  Deterministic for identical input bits.
inline Eigen::MatrixXd orthonormal_rows(const Eigen::MatrixXd& a,
                                        double tol = kDefaultRankTol) {
  const Eigen::Index m = a.cols();
  if (a.rows() == 0 || m == 0) return Eigen::MatrixXd(0, m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) return Eigen::MatrixXd(0, m);
  const double cut = tol * s(0);
  int r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  Eigen::MatrixXd rows = svd.matrixV().leftCols(r).transpose();
  detail::fix_row_signs(rows);
  return rows;
}

// Same basis rule with the rank imposed by the caller.  Used where the
// dimension is known exactly (complements, extensions) so threshold noise
// cannot change it.
inline Eigen::MatrixXd orthonormal_rows_fixed(const Eigen::MatrixXd& a, int k) {
  const Eigen::Index m = a.cols();
  if (k <= 0) return Eigen::MatrixXd(0, m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  Eigen::MatrixXd rows = svd.matrixV().leftCols(k).transpose();
  detail::fix_row_signs(rows);
  return rows;
}

// sin of the largest principal angle between row spaces of orthonormal
// bases b and a, i.e. how far b sticks out of a.  Zero-dimensional b fits
// everywhere.
inline double max_principal_sine(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a) {
  if (b.rows() == 0) return 0.0;
  if (a.rows() == 0) return 1.0;
  Eigen::MatrixXd g = b - (b * a.transpose()) * a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const Eigen::VectorXd& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  return smax > 1.0 ? 1.0 : smax;
}

}  // namespace marketrank
