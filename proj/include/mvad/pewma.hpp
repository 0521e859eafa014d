#pragma once

// Univariate probabilistic EWMA (PEWMA) detector with a plain EWMA baseline.
//
// The forgetting factor of each step is modulated by the Gaussian density of
// the incoming point under the current estimate, so surprising points move
// the running moments less than typical ones. The first `warmup` points use
// the running-mean schedule alpha_t = 1 - 1/t and are never flagged.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mvad {

struct PewmaParams {
  double alpha = 0.98;
  double beta = 0.98;
  /// Density threshold; a point is anomalous when its density is below it.
  double tau = 0.0044;
  std::size_t warmup = 30;
  double sigma_floor = 1e-8;

  /// Throws InvalidInput if any field is out of range.
  void validate() const;
};

struct PewmaState {
  double s1 = 0.0;
  double s2 = 0.0;
  /// Number of points absorbed so far; 0 means uninitialized.
  std::size_t t = 0;
  double x_hat = 0.0;
  double sigma_hat = 0.0;
};

struct ScoredPoint {
  std::size_t t = 0;  // 1-based index of the point in its stream
  double value = 0.0;
  double z = 0.0;
  double density = 0.0;
  double log_density = 0.0;
  bool is_anomaly = false;
  double mean_estimate = 0.0;
  double stddev_estimate = 0.0;
};

/// Standard normal density and its logarithm.
double gaussian_density(double z) noexcept;
double gaussian_log_density(double z) noexcept;

PewmaState pewma_init(double x1, const PewmaParams& params);

/// Scores `x` against the current estimate, then folds it into the moments.
std::pair<PewmaState, ScoredPoint> pewma_step(const PewmaState& state, double x, const PewmaParams& params);

/// alpha * mean + (1 - alpha) * x
double ewma_step(double mean, double x, double alpha);

/// Same parameters with beta = 0, i.e. a detector whose moments follow a
/// plain EWMA after warmup.
PewmaParams ewma_baseline(PewmaParams params);

/// Record emitted for the initializing point: zero residual, peak density,
/// never anomalous.
ScoredPoint init_record(const PewmaState& state);

/// Runs the detector over a whole series; one record per input value.
std::vector<ScoredPoint> score_series(std::span<const double> xs, const PewmaParams& params);

}  // namespace mvad
