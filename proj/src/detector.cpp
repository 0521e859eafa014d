#include "mvad/detector.hpp"

#include <fmt/format.h>

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "mvad/error.hpp"

namespace mvad {

namespace {

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);
constexpr double kMinDirectionNormSq = 1e-30;
constexpr double kAutoTauDistanceSq = 9.0;

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorKind::InvalidInput, fmt::format("{}: expected dimension {}, got {}", what, expected, got));
  }
}

void require_finite(std::span<const double> x, const char* what) {
  for (const double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, fmt::format("{}: non-finite value", what));
  }
}

void validate(const DetectorOptions& o) {
  if (!(o.jitter > 0.0)) throw Error(ErrorKind::InvalidInput, "detector: jitter must be positive");
  if (!(o.drift_tolerance > 0.0)) throw Error(ErrorKind::InvalidInput, "detector: drift tolerance must be positive");
  if (o.drift_check_every < 1) throw Error(ErrorKind::InvalidInput, "detector: drift_check_every must be >= 1");
  if (o.blend_sample_size && *o.blend_sample_size < 1) {
    throw Error(ErrorKind::InvalidInput, "detector: blend sample size must be >= 1");
  }
}

void write_row(std::ostream& out, std::span<const double> xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ' ';
    out << fmt::format("{:.17g}", xs[i]);
  }
  out << '\n';
}

Vector read_row(std::istream& in, std::size_t m, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, fmt::format("checkpoint: missing {}", what));
  std::istringstream ls(line);
  Vector row(m);
  for (double& x : row) {
    if (!(ls >> x)) throw Error(ErrorKind::InvalidInput, fmt::format("checkpoint: short {}", what));
  }
  if (std::string extra; ls >> extra) throw Error(ErrorKind::InvalidInput, fmt::format("checkpoint: long {}", what));
  require_finite(row, "checkpoint");
  return row;
}

Matrix read_matrix(std::istream& in, std::size_t m, const char* what) {
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vector row = read_row(in, m, what);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

CovBlend derive_blend(std::size_t n_static) {
  const double n = static_cast<double>(n_static);
  const double c_cov = 2.0 / (n * n + 6.0);
  // alpha = C_a^2 with C_a = sqrt(1 - C_cov); squared out to keep beta exact
  // for large n.
  return {.alpha_cov = 1.0 - c_cov, .beta_cov = c_cov};
}

Vector column_mean(std::span<const Vector> data) {
  if (data.empty()) throw Error(ErrorKind::InsufficientData, "mean: no data");
  const std::size_t m = data.front().size();
  Vector mu(m, 0.0);
  for (const Vector& x : data) {
    require_dim(m, x.size(), "mean");
    for (std::size_t j = 0; j < m; ++j) mu[j] += x[j];
  }
  for (double& v : mu) v /= static_cast<double>(data.size());
  return mu;
}

Matrix sample_covariance(std::span<const Vector> data) {
  if (data.size() < 2) throw Error(ErrorKind::InsufficientData, "covariance: need at least two points");
  const Vector mu = column_mean(data);
  const std::size_t m = mu.size();
  Matrix c(m, m);
  Vector d(m);
  for (const Vector& x : data) {
    for (std::size_t j = 0; j < m; ++j) d[j] = x[j] - mu[j];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j <= i; ++j) c(i, j) += d[i] * d[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size() - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      c(i, j) *= inv;
      c(j, i) = c(i, j);
    }
  }
  return c;
}

GaussianModel GaussianModel::fit(std::span<const Vector> data, const DetectorOptions& options) {
  validate(options);
  if (data.empty()) throw Error(ErrorKind::InsufficientData, "fit: no data");
  const std::size_t m = data.front().size();
  if (m == 0) throw Error(ErrorKind::InvalidInput, "fit: zero-dimensional data");
  for (const Vector& x : data) {
    require_dim(m, x.size(), "fit");
    require_finite(x, "fit");
  }
  if (data.size() <= m) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("fit: need more than {} points for dimension {}, got {}", m, m, data.size()));
  }

  GaussianModel model;
  model.options_ = options;
  model.n_ = data.size();
  model.mu_ = column_mean(data);
  model.blend_ = derive_blend(options.blend_sample_size.value_or(data.size()));

  CholeskyResult chol = cholesky_factorize(sample_covariance(data), options.jitter);
  model.shift_ = chol.shift;
  model.factor_inv_ = lower_inverse(chol.factor);
  model.cinv_ = inverse_from_cholesky(chol.factor);
  model.log_det_ = log_det_from_factor(chol.factor);
  model.factor_ = chol.factor.matrix();
  return model;
}

void GaussianModel::absorb(std::span<const double> x) {
  const std::size_t m = dim();
  require_dim(m, x.size(), "update");
  require_finite(x, "update");

  Vector d(m);
  for (std::size_t j = 0; j < m; ++j) d[j] = x[j] - mu_[j];

  const Vector z = options_.z_mode == ZMode::Whitened ? multiply(factor_inv_, d) : Vector(x.begin(), x.end());
  const double z_sq = dot(z, z);

  if (z_sq >= kMinDirectionNormSq) {
    const Vector v = multiply(factor_, z);
    factor_ = factor_rank_one_update(factor_, z, blend_);
    factor_inv_ = inverse_factor_rank_one_update(factor_inv_, z, blend_);
    log_det_ = log_det_rank_one_update(log_det_, z_sq, blend_, m);

    bool rebuild = false;
    try {
      cinv_ = sherman_morrison_update(cinv_, v, blend_);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularUpdate) throw;
      rebuild = true;
    }

    ++since_refactor_;
    if (options_.refactor_every > 0 && since_refactor_ >= options_.refactor_every) rebuild = true;
    if (!rebuild && ++since_drift_check_ >= options_.drift_check_every) {
      since_drift_check_ = 0;
      rebuild = !(inverse_drift() <= options_.drift_tolerance);
    }
    if (rebuild) refactorize();
  }

  const double n = static_cast<double>(n_);
  for (std::size_t j = 0; j < m; ++j) mu_[j] = (n * mu_[j] + x[j]) / (n + 1.0);
  ++n_;
}

void GaussianModel::refactorize() {
  CholeskyResult chol = cholesky_factorize(symmetrized(gram(factor_)), options_.jitter);
  shift_ = chol.shift;
  factor_inv_ = lower_inverse(chol.factor);
  cinv_ = inverse_from_cholesky(chol.factor);
  log_det_ = log_det_from_factor(chol.factor);
  factor_ = chol.factor.matrix();
  since_refactor_ = 0;
  since_drift_check_ = 0;
  ++refactor_count_;
}

double GaussianModel::inverse_drift() const { return identity_drift(cinv_, gram(factor_)); }

void GaussianModel::save(std::ostream& out) const {
  const std::size_t m = dim();
  out << m << ' ' << n_ << '\n';
  write_row(out, mu_);
  for (std::size_t i = 0; i < m; ++i) write_row(out, factor_.row(i));
  for (std::size_t i = 0; i < m; ++i) write_row(out, cinv_.row(i));
  out << "blend " << fmt::format("{:.17g} {:.17g}", blend_.alpha_cov, blend_.beta_cov) << '\n';
}

GaussianModel GaussianModel::load(std::istream& in, const DetectorOptions& options) {
  validate(options);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, "checkpoint: missing header");
  std::istringstream hs(line);
  std::size_t m = 0;
  std::size_t n = 0;
  if (!(hs >> m >> n) || m == 0) throw Error(ErrorKind::InvalidInput, "checkpoint: bad header");

  GaussianModel model;
  model.options_ = options;
  model.n_ = n;
  model.mu_ = read_row(in, m, "mean");
  model.factor_ = read_matrix(in, m, "factor");
  model.cinv_ = read_matrix(in, m, "inverse covariance");

  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidInput, "checkpoint: missing blend line");
  std::istringstream bs(line);
  std::string tag;
  if (!(bs >> tag >> model.blend_.alpha_cov >> model.blend_.beta_cov) || tag != "blend" ||
      !(model.blend_.alpha_cov > 0.0) || !(model.blend_.beta_cov >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "checkpoint: bad blend line");
  }

  // A^{-1} = A^T C^{-1}; log|C| from a fresh Cholesky factor of A A^T. Neither
  // is stored, so save(load(text)) reproduces the text exactly.
  model.factor_inv_ = multiply(transpose(model.factor_), model.cinv_);
  CholeskyResult chol = cholesky_factorize(symmetrized(gram(model.factor_)), options.jitter);
  model.log_det_ = log_det_from_factor(chol.factor);
  model.shift_ = chol.shift;
  return model;
}

double auto_log_tau(const GaussianModel& model) {
  return -0.5 * static_cast<double>(model.dim()) * kLogTwoPi - 0.5 * model.log_det() - 0.5 * kAutoTauDistanceSq;
}

MultiVerdict score(const GaussianModel& model, std::span<const double> x, std::optional<double> tau) {
  const std::size_t m = model.dim();
  require_dim(m, x.size(), "score");
  require_finite(x, "score");
  if (tau && !(*tau >= 0.0)) throw Error(ErrorKind::InvalidInput, "score: tau must be >= 0");

  Vector d(m);
  for (std::size_t j = 0; j < m; ++j) d[j] = x[j] - model.mean()[j];
  const double maha = std::max(0.0, quadratic_form(model.inverse_covariance(), d));
  const double log_p = -0.5 * static_cast<double>(m) * kLogTwoPi - 0.5 * model.log_det() - 0.5 * maha;

  const double log_tau = tau ? std::log(*tau) : auto_log_tau(model);
  return {
      .x = Vector(x.begin(), x.end()),
      .log_density = log_p,
      .density = std::exp(log_p),
      .mahalanobis_sq = maha,
      .is_anomaly = log_p < log_tau,
  };
}

}  // namespace mvad
