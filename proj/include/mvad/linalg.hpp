#pragma once

// Dense kernels used by the online Gaussian model: Cholesky factorization,
// triangular solves, rank-one factor and inverse updates, log-determinants.
// Everything here is a pure function over values.

#include <cstddef>
#include <span>
#include <vector>

namespace mvad {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Throws InvalidInput unless `data.size() == rows * cols`.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t dim);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Square lower-triangular matrix with a strictly positive diagonal.
/// The invariant is checked on construction, so any instance is a valid
/// Cholesky factor.
class LowerTriangular {
 public:
  /// Throws InvalidFactor if `m` is not square, has nonzero strictly-upper
  /// entries, or a non-positive diagonal.
  explicit LowerTriangular(Matrix m);

  static LowerTriangular identity(std::size_t dim) { return LowerTriangular(Matrix::identity(dim)); }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// Weights of the covariance blend C' = alpha * C + beta * v v^T.
struct CovBlend {
  double alpha_cov = 1.0;
  double beta_cov = 0.0;
};

struct CholeskyResult {
  LowerTriangular factor;
  /// Diagonal shift lambda such that factor * factor^T = c + lambda * I.
  double shift = 0.0;
};

/// Maximum number of jitter doublings tried before giving up.
inline constexpr int kMaxJitterEscalations = 40;

CholeskyResult cholesky_factorize(const Matrix& c, double jitter = 1e-10);

/// Forward substitution: returns y with a * y = b.
Vector tri_solve_lower(const LowerTriangular& a, std::span<const double> b);
/// Back substitution against the transpose: returns y with a^T * y = b.
Vector tri_solve_lower_transposed(const LowerTriangular& a, std::span<const double> b);

/// Inverse of a lower-triangular factor (itself lower triangular).
Matrix lower_inverse(const LowerTriangular& a);
/// (a a^T)^{-1}, built column by column from two triangular solves.
Matrix inverse_from_cholesky(const LowerTriangular& a);

/// Rank-one update of a (not necessarily triangular) square factor.
///
/// Returns A' = sqrt(alpha) A + sqrt(alpha)/|z|^2 (sqrt(1 + beta |z|^2 / alpha) - 1) v z^T
/// with v = A z, which satisfies A' A'^T = alpha A A^T + beta v v^T. The
/// result is dense even when `a` is triangular.
///
/// Throws DegenerateDirection when |z|^2 < 1e-30; the caller should skip
/// the covariance update for that point.
Matrix factor_rank_one_update(const Matrix& a, std::span<const double> z, CovBlend blend);
inline Matrix factor_rank_one_update(const LowerTriangular& a, std::span<const double> z, CovBlend blend) {
  return factor_rank_one_update(a.matrix(), z, blend);
}

/// Companion of factor_rank_one_update acting on A^{-1}: given the inverse of
/// A and the same z, returns the inverse of the updated factor.
Matrix inverse_factor_rank_one_update(const Matrix& a_inv, std::span<const double> z, CovBlend blend);

/// Sherman-Morrison update of C^{-1} for C' = alpha C + beta v v^T.
/// The result is symmetrized. Throws SingularUpdate if the scalar
/// denominator 1 + (beta/alpha) v^T C^{-1} v is <= 1e-12.
Matrix sherman_morrison_update(const Matrix& cinv, std::span<const double> v, CovBlend blend);

/// log |a a^T| = 2 sum log a_ii.
double log_det_from_factor(const LowerTriangular& a);

/// log |alpha C + beta v v^T| given log |C| and v = A z with C = A A^T
/// (matrix determinant lemma; |z|^2 = v^T C^{-1} v).
double log_det_rank_one_update(double log_det, double z_norm_sq, CovBlend blend, std::size_t dim);

// Small helpers shared by the detector and the tests.

Matrix multiply(const Matrix& a, const Matrix& b);
Vector multiply(const Matrix& a, std::span<const double> x);
Vector multiply_transposed(const Matrix& a, std::span<const double> x);
Matrix transpose(const Matrix& a);
/// a * a^T
Matrix gram(const Matrix& a);
Matrix symmetrized(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);
double quadratic_form(const Matrix& a, std::span<const double> x);

/// Induced infinity norm (maximum absolute row sum).
double norm_inf(const Matrix& a);
double norm_frobenius(const Matrix& a);
/// |a b - I| in the induced infinity norm.
double identity_drift(const Matrix& a, const Matrix& b);
/// |a - b|_F / max(|b|_F, tiny)
double relative_frobenius_error(const Matrix& a, const Matrix& b);

}  // namespace mvad
