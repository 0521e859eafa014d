#include "mvad/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <thread>

#include "mvad/error.hpp"

namespace mvad {

namespace {

constexpr double kTruthEpsilon = 1e-12;

using Clock = std::chrono::steady_clock;

}  // namespace

double aad(const Matrix& predicted, const Matrix& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw Error(ErrorKind::InvalidInput, "aad: shape mismatch");
  }
  const auto p = predicted.data();
  const auto y = truth.data();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(std::abs(y[i]) > kTruthEpsilon)) continue;
    sum += std::abs((p[i] - y[i]) / y[i]);
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::DegenerateTruth, "aad: every truth entry is (near) zero");
  return sum / static_cast<double>(n);
}

std::vector<std::size_t> segment_bounds(std::size_t count, std::size_t n_segments) {
  if (n_segments < 2) throw Error(ErrorKind::InvalidInput, "segments: need at least two segments");
  if (count < n_segments) throw Error(ErrorKind::InsufficientData, "segments: fewer points than segments");
  const std::size_t size = count / n_segments;
  std::vector<std::size_t> bounds(n_segments + 1);
  for (std::size_t i = 0; i < n_segments; ++i) bounds[i] = i * size;
  bounds[n_segments] = count;
  return bounds;
}

AadReport run_protocol(std::span<const Vector> data, const SegmentPlan& plan, std::size_t static_count,
                       const DetectorOptions& options) {
  if (static_count < 1 || static_count + 1 > plan.n_segments) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("experiment: static_count must lie in [1, {}]", plan.n_segments - 1));
  }
  const auto bounds = segment_bounds(data.size(), plan.n_segments);
  const std::size_t m = data.empty() ? 0 : data.front().size();
  if (bounds[static_count] <= m) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("experiment: static prefix of {} points cannot support dimension {}", bounds[static_count], m));
  }

  const auto start = Clock::now();
  const std::size_t online_end =
      plan.mode == ExperimentMode::UpdateNextSegment ? bounds[static_count + 1] : data.size();

  GaussianModel model = GaussianModel::fit(data.first(bounds[static_count]), options);
  for (std::size_t i = bounds[static_count]; i < online_end; ++i) model.absorb(data[i]);

  const Matrix truth = sample_covariance(data.first(online_end));
  AadReport report;
  report.static_count = static_count;
  report.aad = aad(model.covariance(), truth);
  report.inverse_aad = aad(model.inverse_covariance(), inverse_from_cholesky(cholesky_factorize(truth).factor));
  report.points_evaluated = online_end - bounds[static_count];
  report.elapsed = Clock::now() - start;
  return report;
}

std::vector<AadReport> run_experiment(std::span<const Vector> data, const SegmentPlan& plan,
                                      const DetectorOptions& options) {
  std::vector<AadReport> out;
  for (std::size_t k = 1; k < plan.n_segments; ++k) out.push_back(run_protocol(data, plan, k, options));
  return out;
}

std::vector<AadReport> run_experiment_1(std::span<const Vector> data, SegmentPlan plan, const DetectorOptions& options) {
  plan.mode = ExperimentMode::UpdateNextSegment;
  return run_experiment(data, plan, options);
}

std::vector<AadReport> run_experiment_2(std::span<const Vector> data, SegmentPlan plan, const DetectorOptions& options) {
  plan.mode = ExperimentMode::UpdateRemaining;
  return run_experiment(data, plan, options);
}

std::vector<Vector> gen_random_stream(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> out(count, Vector(dim));
  for (Vector& x : out) {
    for (double& v : x) v = normal(rng);
  }
  return out;
}

void ShiftSpec::validate() const {
  if (!(at > 0.0 && at < 1.0)) throw Error(ErrorKind::InvalidInput, "shift: position must lie in (0, 1)");
  if (!std::isfinite(magnitude)) throw Error(ErrorKind::InvalidInput, "shift: magnitude must be finite");
  if (kind == ShiftKind::GradualDistributional && ramp < 1) {
    throw Error(ErrorKind::InvalidInput, "shift: ramp must be >= 1");
  }
}

ShiftKind parse_shift_kind(std::string_view name) {
  if (name == "abrupt-transient") return ShiftKind::AbruptTransient;
  if (name == "abrupt-distributional") return ShiftKind::AbruptDistributional;
  if (name == "gradual-distributional") return ShiftKind::GradualDistributional;
  throw Error(ErrorKind::InvalidInput, fmt::format("unknown shift kind '{}'", name));
}

std::string_view to_string(ShiftKind kind) noexcept {
  switch (kind) {
    case ShiftKind::AbruptTransient: return "abrupt-transient";
    case ShiftKind::AbruptDistributional: return "abrupt-distributional";
    case ShiftKind::GradualDistributional: return "gradual-distributional";
  }
  return "unknown";
}

double shift_offset(const ShiftSpec& spec, std::size_t count, std::size_t i) {
  const auto pos = static_cast<std::size_t>(std::floor(spec.at * static_cast<double>(count)));
  switch (spec.kind) {
    case ShiftKind::AbruptTransient: return i == pos ? spec.magnitude : 0.0;
    case ShiftKind::AbruptDistributional: return i >= pos ? spec.magnitude : 0.0;
    case ShiftKind::GradualDistributional: {
      if (i < pos) return 0.0;
      const std::size_t step = std::min(i - pos, spec.ramp);
      return spec.magnitude * static_cast<double>(step) / static_cast<double>(spec.ramp);
    }
  }
  return 0.0;
}

std::vector<Vector> gen_shift_vectors(std::size_t count, std::size_t dim, const ShiftSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (count < 10) throw Error(ErrorKind::InvalidInput, "shift stream: count must be >= 10");
  if (dim < 1) throw Error(ErrorKind::InvalidInput, "shift stream: dim must be >= 1");
  std::vector<Vector> out = gen_random_stream(count, dim, seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double offset = shift_offset(spec, count, i);
    for (double& v : out[i]) v += offset;
  }
  return out;
}

std::vector<double> gen_shift_stream(std::size_t count, const ShiftSpec& spec, std::uint64_t seed) {
  const auto vectors = gen_shift_vectors(count, 1, spec, seed);
  std::vector<double> out(count);
  std::transform(vectors.begin(), vectors.end(), out.begin(), [](const Vector& x) { return x[0]; });
  return out;
}

std::vector<ExperimentRow> run_seeded_experiments(ExperimentMode mode, std::size_t count, std::size_t dim,
                                                  std::span<const std::uint64_t> seeds,
                                                  const DetectorOptions& options, unsigned jobs) {
  const SegmentPlan plan{.n_segments = 5, .mode = mode};
  std::vector<std::vector<AadReport>> per_seed(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        const auto data = gen_random_stream(count, dim, seeds[i]);
        per_seed[i] = run_experiment(data, plan, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, seeds.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  std::vector<ExperimentRow> rows;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    for (const AadReport& r : per_seed[i]) rows.push_back({static_cast<int>(mode), seeds[i], r});
  }
  return rows;
}

void write_report_header(std::ostream& out) { out << "experiment,static_count,aad,points,seed,elapsed_ms\n"; }

void write_report_row(std::ostream& out, const ExperimentRow& row, bool with_timing) {
  const double elapsed = with_timing ? row.report.elapsed.count() : 0.0;
  out << fmt::format("{},{},{:.17g},{},{},{:.17g}\n", row.experiment, row.report.static_count, row.report.aad,
                     row.report.points_evaluated, row.seed, elapsed);
}

}  // namespace mvad
