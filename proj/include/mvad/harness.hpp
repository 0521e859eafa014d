#pragma once

// Static-vs-online covariance experiments, the AAD loss and synthetic stream
// generators (random i.i.d. vectors and the three shift types).

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "mvad/detector.hpp"
#include "mvad/linalg.hpp"

namespace mvad {

/// Mean absolute relative deviation over flattened entries. Entries whose
/// truth has magnitude <= 1e-12 are skipped. Throws InvalidInput on shape
/// mismatch and DegenerateTruth when every entry is skipped.
double aad(const Matrix& predicted, const Matrix& truth);

enum class ExperimentMode {
  /// Online phase covers the single segment after the static prefix.
  UpdateNextSegment = 1,
  /// Online phase covers every remaining segment.
  UpdateRemaining = 2,
};

struct SegmentPlan {
  std::size_t n_segments = 5;
  ExperimentMode mode = ExperimentMode::UpdateNextSegment;
};

struct AadReport {
  std::size_t static_count = 0;
  /// AAD of the online covariance against the batch covariance.
  double aad = 0.0;
  /// Same comparison for the inverse covariance.
  double inverse_aad = 0.0;
  /// Number of online updates applied.
  std::size_t points_evaluated = 0;
  std::chrono::duration<double, std::milli> elapsed{0};
};

/// Segment boundaries: segment i is [bounds[i], bounds[i+1]). The remainder
/// of an uneven split goes to the last segment.
std::vector<std::size_t> segment_bounds(std::size_t count, std::size_t n_segments);

/// One static/online run: fit on the first `static_count` segments, update
/// over the online segments chosen by `plan.mode`, compare against the batch
/// covariance of everything consumed.
AadReport run_protocol(std::span<const Vector> data, const SegmentPlan& plan, std::size_t static_count,
                       const DetectorOptions& options = {});

/// Reports for static_count = 1 .. n_segments - 1.
std::vector<AadReport> run_experiment(std::span<const Vector> data, const SegmentPlan& plan,
                                      const DetectorOptions& options = {});
std::vector<AadReport> run_experiment_1(std::span<const Vector> data, SegmentPlan plan = {},
                                        const DetectorOptions& options = {});
std::vector<AadReport> run_experiment_2(std::span<const Vector> data, SegmentPlan plan = {},
                                        const DetectorOptions& options = {});

/// I.i.d. standard-normal vectors, deterministic in the seed.
std::vector<Vector> gen_random_stream(std::size_t count, std::size_t dim, std::uint64_t seed);

enum class ShiftKind { AbruptTransient, AbruptDistributional, GradualDistributional };

struct ShiftSpec {
  ShiftKind kind = ShiftKind::AbruptDistributional;
  /// Fractional position of the change, in (0, 1).
  double at = 0.5;
  double magnitude = 5.0;
  /// Length of the linear ramp (gradual shifts only).
  std::size_t ramp = 1;

  void validate() const;
};

ShiftKind parse_shift_kind(std::string_view name);
std::string_view to_string(ShiftKind kind) noexcept;

/// Mean offset added to point i of a stream of length `count`.
double shift_offset(const ShiftSpec& spec, std::size_t count, std::size_t i);

/// Standard-normal series plus the shift offset. Requires count >= 10.
std::vector<double> gen_shift_stream(std::size_t count, const ShiftSpec& spec, std::uint64_t seed);
/// Vector version; the offset is added to every coordinate. For dim = 1 the
/// values equal gen_shift_stream with the same seed.
std::vector<Vector> gen_shift_vectors(std::size_t count, std::size_t dim, const ShiftSpec& spec, std::uint64_t seed);

struct ExperimentRow {
  int experiment = 1;
  std::uint64_t seed = 0;
  AadReport report;
};

/// Generates a random stream per seed and runs the chosen experiment on it.
/// Seeds may be processed concurrently (`jobs` workers, 0 = hardware
/// concurrency); rows come back in seed order, then static_count order.
std::vector<ExperimentRow> run_seeded_experiments(ExperimentMode mode, std::size_t count, std::size_t dim,
                                                  std::span<const std::uint64_t> seeds,
                                                  const DetectorOptions& options = {}, unsigned jobs = 0);

void write_report_header(std::ostream& out);
/// `experiment,static_count,aad,points,seed,elapsed_ms`; with `with_timing`
/// false the elapsed column is written as 0 for reproducible output.
void write_report_row(std::ostream& out, const ExperimentRow& row, bool with_timing = true);

}  // namespace mvad
