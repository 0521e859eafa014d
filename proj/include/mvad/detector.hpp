#pragma once

// Multivariate online Gaussian detector.
//
// A model is fit on a static batch, then updated one point at a time. The
// covariance is carried as a square factor A (C = A A^T) together with A^{-1}
// and an independently updated C^{-1}; both are advanced by rank-one updates
// with blend weights derived from the static sample size. Because the rank-one
// factor update produces a dense A, the factor is only triangular right after
// a (re)factorization.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mvad/linalg.hpp"

namespace mvad {

/// How the update direction z is formed from an incoming point x.
enum class ZMode {
  /// z = A^{-1} (x - mu), so the rank-one term is the centered outer product.
  Whitened,
  /// z = x, the literal "current data" reading; v = A x.
  Raw,
};

struct DetectorOptions {
  double jitter = 1e-10;
  ZMode z_mode = ZMode::Whitened;
  /// Rebuild A^{-1} and C^{-1} from a fresh Cholesky factor every this many
  /// updates; 0 disables the periodic rebuild.
  std::size_t refactor_every = 256;
  /// Rebuild as soon as |C^{-1} A A^T - I|_inf exceeds this.
  double drift_tolerance = 1e-4;
  /// The drift check costs O(m^3); run it every this many updates (>= 1).
  std::size_t drift_check_every = 1;
  /// Sample size used for the blend weights; defaults to the static batch size.
  std::optional<std::size_t> blend_sample_size;
};

/// C_cov = 2 / (n^2 + 6), alpha = 1 - C_cov, beta = C_cov.
CovBlend derive_blend(std::size_t n_static);

struct MultiVerdict {
  Vector x;
  double log_density = 0.0;
  double density = 0.0;
  double mahalanobis_sq = 0.0;
  bool is_anomaly = false;
};

class GaussianModel {
 public:
  /// Fits mean and unbiased sample covariance on `data` (n >= m + 1 points).
  static GaussianModel fit(std::span<const Vector> data, const DetectorOptions& options = {});

  std::size_t dim() const noexcept { return mu_.size(); }
  std::size_t count() const noexcept { return n_; }
  const Vector& mean() const noexcept { return mu_; }
  /// A with C = A A^T. Dense in general.
  const Matrix& factor() const noexcept { return factor_; }
  const Matrix& factor_inverse() const noexcept { return factor_inv_; }
  const Matrix& inverse_covariance() const noexcept { return cinv_; }
  /// Expands A A^T.
  Matrix covariance() const { return gram(factor_); }
  double log_det() const noexcept { return log_det_; }
  CovBlend blend() const noexcept { return blend_; }
  const DetectorOptions& options() const noexcept { return options_; }

  /// Diagonal shift applied by the most recent factorization.
  double factor_shift() const noexcept { return shift_; }
  std::size_t refactor_count() const noexcept { return refactor_count_; }

  /// Folds one point into the model (mean, factor, inverses, log-det).
  void absorb(std::span<const double> x);

  /// Replaces the factor by the Cholesky factor of A A^T and rebuilds A^{-1},
  /// C^{-1} and log|C| from it.
  void refactorize();

  /// |C^{-1} A A^T - I|_inf
  double inverse_drift() const;

  void save(std::ostream& out) const;
  static GaussianModel load(std::istream& in, const DetectorOptions& options = {});

 private:
  GaussianModel() = default;

  std::size_t n_ = 0;
  Vector mu_;
  Matrix factor_;
  Matrix factor_inv_;
  Matrix cinv_;
  double log_det_ = 0.0;
  CovBlend blend_;
  DetectorOptions options_;
  double shift_ = 0.0;
  std::size_t since_refactor_ = 0;
  std::size_t since_drift_check_ = 0;
  std::size_t refactor_count_ = 0;
};

inline GaussianModel fit_static(std::span<const Vector> data, const DetectorOptions& options = {}) {
  return GaussianModel::fit(data, options);
}

inline GaussianModel update_online(GaussianModel model, std::span<const double> x) {
  model.absorb(x);
  return model;
}

/// Log of the density at Mahalanobis distance 3 under the current model; the
/// default decision threshold when no explicit tau is given.
double auto_log_tau(const GaussianModel& model);

/// Scores x under N(mu, C). With no tau, uses the auto threshold. The
/// comparison is made in log space, so underflowing densities still compare
/// correctly.
MultiVerdict score(const GaussianModel& model, std::span<const double> x, std::optional<double> tau = std::nullopt);

Vector column_mean(std::span<const Vector> data);
/// Unbiased (n - 1) sample covariance.
Matrix sample_covariance(std::span<const Vector> data);

}  // namespace mvad
