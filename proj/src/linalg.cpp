#include "mvad/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvad/error.hpp"

namespace mvad {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kMinDirectionNormSq = 1e-30;
constexpr double kMinShermanMorrisonDenominator = 1e-12;

void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) throw Error(kind, what);
}

void require_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::InvalidInput,
                std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_blend(CovBlend blend) {
  require(blend.alpha_cov > 0.0 && std::isfinite(blend.alpha_cov), ErrorKind::InvalidInput,
          "blend alpha must be positive");
  require(blend.beta_cov >= 0.0 && std::isfinite(blend.beta_cov), ErrorKind::InvalidInput,
          "blend beta must be non-negative");
}

// Plain Cholesky on a symmetric matrix with `shift` added to the diagonal.
// Returns false when a pivot is not safely positive; the threshold is
// relative to the (shifted) diagonal entry so that exactly rank-deficient
// inputs are rejected despite rounding.
bool try_cholesky(const Matrix& c, double shift, Matrix& out) {
  const std::size_t n = c.rows();
  const double eps = std::numeric_limits<double>::epsilon();
  out = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double diag = c(j, j) + shift;
    double pivot = diag;
    for (std::size_t k = 0; k < j; ++k) pivot -= out(j, k) * out(j, k);
    if (!(pivot > static_cast<double>(n) * eps * std::abs(diag)) || !(pivot > 0.0) || !std::isfinite(pivot)) {
      return false;
    }
    const double ljj = std::sqrt(pivot);
    out(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = c(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
      out(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::InvalidInput, "matrix data length does not match rows * cols");
  }
}

Matrix Matrix::identity(std::size_t dim) {
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

LowerTriangular::LowerTriangular(Matrix m) : m_(std::move(m)) {
  require(m_.is_square(), ErrorKind::InvalidFactor, "factor must be square");
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    require(m_(i, i) > 0.0 && std::isfinite(m_(i, i)), ErrorKind::InvalidFactor,
            "factor diagonal must be positive and finite");
    for (std::size_t j = i + 1; j < m_.cols(); ++j) {
      require(m_(i, j) == 0.0, ErrorKind::InvalidFactor, "factor has nonzero strictly-upper entries");
    }
  }
}

CholeskyResult cholesky_factorize(const Matrix& c, double jitter) {
  require(c.is_square(), ErrorKind::InvalidInput, "cholesky: matrix must be square");
  require(c.all_finite(), ErrorKind::InvalidInput, "cholesky: matrix has non-finite entries");
  require(jitter > 0.0 && std::isfinite(jitter), ErrorKind::InvalidInput, "cholesky: jitter must be positive");
  const std::size_t n = c.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double scale = std::max({1.0, std::abs(c(i, j)), std::abs(c(j, i))});
      require(std::abs(c(i, j) - c(j, i)) <= kSymmetryTol * scale, ErrorKind::InvalidInput,
              "cholesky: matrix is not symmetric");
    }
  }
  const Matrix sym = symmetrized(c);

  Matrix out;
  if (try_cholesky(sym, 0.0, out)) return {LowerTriangular(std::move(out)), 0.0};
  double shift = jitter;
  for (int k = 0; k <= kMaxJitterEscalations; ++k, shift *= 2.0) {
    if (try_cholesky(sym, shift, out)) return {LowerTriangular(std::move(out)), shift};
  }
  throw Error(ErrorKind::NotPositiveDefinite, "cholesky: matrix is not positive definite after jitter escalation");
}

Vector tri_solve_lower(const LowerTriangular& a, std::span<const double> b) {
  require_dim(a.dim(), b.size(), "tri_solve_lower");
  const std::size_t n = a.dim();
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * y[k];
    y[i] = s / a(i, i);
  }
  return y;
}

Vector tri_solve_lower_transposed(const LowerTriangular& a, std::span<const double> b) {
  require_dim(a.dim(), b.size(), "tri_solve_lower_transposed");
  const std::size_t n = a.dim();
  Vector y(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * y[k];
    y[ii] = s / a(ii, ii);
  }
  return y;
}

Matrix lower_inverse(const LowerTriangular& a) {
  const std::size_t n = a.dim();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector col = tri_solve_lower(a, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  return inv;
}

Matrix inverse_from_cholesky(const LowerTriangular& a) {
  const std::size_t n = a.dim();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector col = tri_solve_lower_transposed(a, tri_solve_lower(a, e));
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  return symmetrized(inv);
}

Matrix factor_rank_one_update(const Matrix& a, std::span<const double> z, CovBlend blend) {
  require(a.is_square(), ErrorKind::InvalidInput, "factor update: factor must be square");
  require_dim(a.rows(), z.size(), "factor update");
  require_blend(blend);
  const double z_sq = dot(z, z);
  if (!(z_sq >= kMinDirectionNormSq)) {
    throw Error(ErrorKind::DegenerateDirection, "factor update: direction norm is too small");
  }
  const double sa = std::sqrt(blend.alpha_cov);
  const double coeff = sa / z_sq * (std::sqrt(1.0 + blend.beta_cov * z_sq / blend.alpha_cov) - 1.0);
  const Vector v = multiply(a, z);
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cv = coeff * v[i];
    for (std::size_t j = 0; j < n; ++j) out(i, j) = sa * a(i, j) + cv * z[j];
  }
  return out;
}

Matrix inverse_factor_rank_one_update(const Matrix& a_inv, std::span<const double> z, CovBlend blend) {
  require(a_inv.is_square(), ErrorKind::InvalidInput, "inverse factor update: matrix must be square");
  require_dim(a_inv.rows(), z.size(), "inverse factor update");
  require_blend(blend);
  const double z_sq = dot(z, z);
  if (!(z_sq >= kMinDirectionNormSq)) {
    throw Error(ErrorKind::DegenerateDirection, "inverse factor update: direction norm is too small");
  }
  // (A + k v z^T)^{-1} = A^{-1} - (k / (1 + k |z|^2)) z (z^T A^{-1}), using A^{-1} v = z.
  const double root = std::sqrt(1.0 + blend.beta_cov * z_sq / blend.alpha_cov);
  const double coeff = (1.0 - 1.0 / root) / z_sq;
  const double inv_sa = 1.0 / std::sqrt(blend.alpha_cov);
  const Vector w = multiply_transposed(a_inv, z);
  const std::size_t n = a_inv.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cz = coeff * z[i];
    for (std::size_t j = 0; j < n; ++j) out(i, j) = inv_sa * (a_inv(i, j) - cz * w[j]);
  }
  return out;
}

Matrix sherman_morrison_update(const Matrix& cinv, std::span<const double> v, CovBlend blend) {
  require(cinv.is_square(), ErrorKind::InvalidInput, "sherman-morrison: inverse must be square");
  require_dim(cinv.rows(), v.size(), "sherman-morrison");
  require_blend(blend);
  const double ratio = blend.beta_cov / blend.alpha_cov;
  const Vector u = multiply(cinv, v);  // C^{-1} v; C^{-1} is symmetric so v^T C^{-1} = u^T
  const double denom = 1.0 + ratio * dot(v, u);
  if (!(denom > kMinShermanMorrisonDenominator)) {
    throw Error(ErrorKind::SingularUpdate, "sherman-morrison: update is singular");
  }
  const double scale = ratio / denom;
  const double inv_alpha = 1.0 / blend.alpha_cov;
  const std::size_t n = cinv.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double su = scale * u[i];
    for (std::size_t j = 0; j < n; ++j) out(i, j) = inv_alpha * (cinv(i, j) - su * u[j]);
  }
  return symmetrized(out);
}

double log_det_from_factor(const LowerTriangular& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    // LowerTriangular already enforces this; kept for factors built around it.
    require(a(i, i) > 0.0, ErrorKind::InvalidFactor, "log det: non-positive factor diagonal");
    s += std::log(a(i, i));
  }
  return 2.0 * s;
}

double log_det_rank_one_update(double log_det, double z_norm_sq, CovBlend blend, std::size_t dim) {
  require_blend(blend);
  return log_det + static_cast<double>(dim) * std::log(blend.alpha_cov) +
         std::log1p(blend.beta_cov * z_norm_sq / blend.alpha_cov);
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  require_dim(a.cols(), b.rows(), "multiply");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  require_dim(a.cols(), x.size(), "multiply");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> x) {
  require_dim(a.rows(), x.size(), "multiply_transposed");
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j] * x[i];
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix gram(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = dot(a.row(i), a.row(j));
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

Matrix symmetrized(const Matrix& a) {
  require(a.is_square(), ErrorKind::InvalidInput, "symmetrize: matrix must be square");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      out(i, j) = m;
      out(j, i) = m;
    }
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double quadratic_form(const Matrix& a, std::span<const double> x) { return dot(x, multiply(a, x)); }

double norm_inf(const Matrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (const double x : a.row(i)) s += std::abs(x);
    best = std::max(best, s);
  }
  return best;
}

double norm_frobenius(const Matrix& a) {
  double s = 0.0;
  for (const double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double identity_drift(const Matrix& a, const Matrix& b) {
  Matrix p = multiply(a, b);
  require(p.is_square(), ErrorKind::InvalidInput, "identity drift: product must be square");
  for (std::size_t i = 0; i < p.rows(); ++i) p(i, i) -= 1.0;
  return norm_inf(p);
}

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::InvalidInput, "relative error: shape mismatch");
  double num = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    num += d * d;
  }
  const double den = norm_frobenius(b);
  return std::sqrt(num) / std::max(den, std::numeric_limits<double>::min());
}

}  // namespace mvad
