#pragma once

#include <Eigen/Dense>

#include <vector>

#include "phasemetric/rational.hpp"

namespace phasemetric::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RationalMatrix = std::vector<std::vector<Rational>>;

/// Rank by Gaussian elimination over the rationals.
inline int exact_rank(RationalMatrix a) {
  if (a.empty()) return 0;
  const std::size_t rows = a.size(), cols = a[0].size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t piv = r;
    while (piv < rows && a[piv][c] == 0) ++piv;
    if (piv == rows) continue;
    std::swap(a[piv], a[r]);
    for (std::size_t i = r + 1; i < rows; ++i) {
      if (a[i][c] == 0) continue;
      Rational f = a[i][c] / a[r][c];
      for (std::size_t j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
    }
    ++r;
  }
  return static_cast<int>(r);
}

/// Singular values above `rel_tol * max(1, s_max)` count toward the rank.
inline int numeric_rank(const Matrix& a, double rel_tol = 1e-8) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  double thresh = rel_tol * std::max(1.0, s.size() ? s(0) : 0.0);
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > thresh) ++r;
  return r;
}

/// Orthonormal basis (columns) of the right nullspace of `a`.
inline Matrix nullspace(const Matrix& a, double rel_tol = 1e-8) {
  const auto n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  int r = numeric_rank(a, rel_tol);
  return svd.matrixV().rightCols(n - r);
}

/// Orthonormal basis of the column span of `a`.
inline Matrix column_span(const Matrix& a, double rel_tol = 1e-8) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
  int r = numeric_rank(a, rel_tol);
  return svd.matrixU().leftCols(r);
}

}  // namespace phasemetric::linalg
