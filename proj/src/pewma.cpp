#include "mvad/pewma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvad/error.hpp"

namespace mvad {

namespace {

const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(ErrorKind::InvalidInput, what);
}

}  // namespace

void PewmaParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "pewma: alpha must lie in (0, 1)");
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidInput, "pewma: beta must lie in [0, 1]");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::InvalidInput, "pewma: tau must be >= 0");
  if (warmup < 1) throw Error(ErrorKind::InvalidInput, "pewma: warmup must be >= 1");
  if (!(sigma_floor > 0.0) || !std::isfinite(sigma_floor)) {
    throw Error(ErrorKind::InvalidInput, "pewma: sigma floor must be positive");
  }
}

double gaussian_log_density(double z) noexcept { return -kLogSqrtTwoPi - 0.5 * z * z; }

double gaussian_density(double z) noexcept { return std::exp(gaussian_log_density(z)); }

PewmaState pewma_init(double x1, const PewmaParams& params) {
  params.validate();
  require_finite(x1, "pewma: initial value must be finite");
  return {.s1 = x1, .s2 = x1 * x1, .t = 1, .x_hat = x1, .sigma_hat = params.sigma_floor};
}

std::pair<PewmaState, ScoredPoint> pewma_step(const PewmaState& state, double x, const PewmaParams& params) {
  params.validate();
  if (state.t == 0) throw Error(ErrorKind::UninitializedState, "pewma: state is not initialized");
  require_finite(x, "pewma: value must be finite");

  const std::size_t t = state.t + 1;
  const double sigma = std::max(state.sigma_hat, params.sigma_floor);
  const double z = (x - state.x_hat) / sigma;
  const double log_p = gaussian_log_density(z);
  const double p = std::exp(log_p);

  const double alpha_t = t < params.warmup ? 1.0 - 1.0 / static_cast<double>(t) : (1.0 - params.beta * p) * params.alpha;

  // Written as s += (1 - a)(x - s) so a constant stream is an exact fixed point.
  PewmaState next = state;
  next.s1 += (1.0 - alpha_t) * (x - state.s1);
  next.s2 += (1.0 - alpha_t) * (x * x - state.s2);
  next.t = t;
  next.x_hat = next.s1;
  const double floor_sq = params.sigma_floor * params.sigma_floor;
  next.sigma_hat = std::sqrt(std::max(next.s2 - next.s1 * next.s1, floor_sq));

  ScoredPoint out{
      .t = t,
      .value = x,
      .z = z,
      .density = p,
      .log_density = log_p,
      .is_anomaly = t > params.warmup && p < params.tau,
      .mean_estimate = next.x_hat,
      .stddev_estimate = next.sigma_hat,
  };
  return {next, out};
}

double ewma_step(double mean, double x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "ewma: alpha must lie in (0, 1)");
  require_finite(mean, "ewma: mean must be finite");
  require_finite(x, "ewma: value must be finite");
  return alpha * mean + (1.0 - alpha) * x;
}

PewmaParams ewma_baseline(PewmaParams params) {
  params.beta = 0.0;
  return params;
}

ScoredPoint init_record(const PewmaState& state) {
  return {
      .t = state.t,
      .value = state.s1,
      .z = 0.0,
      .density = gaussian_density(0.0),
      .log_density = gaussian_log_density(0.0),
      .is_anomaly = false,
      .mean_estimate = state.x_hat,
      .stddev_estimate = state.sigma_hat,
  };
}

std::vector<ScoredPoint> score_series(std::span<const double> xs, const PewmaParams& params) {
  std::vector<ScoredPoint> out;
  if (xs.empty()) return out;
  out.reserve(xs.size());
  PewmaState state = pewma_init(xs.front(), params);
  out.push_back(init_record(state));
  for (const double x : xs.subspan(1)) {
    auto [next, scored] = pewma_step(state, x, params);
    state = next;
    out.push_back(scored);
  }
  return out;
}

}  // namespace mvad
