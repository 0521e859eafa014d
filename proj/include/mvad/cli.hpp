#pragma once

// Command implementations behind the `mvad` tool. Each command reads and
// writes through the given streams and returns the process exit status,
// so the whole surface is testable in-process.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvad/detector.hpp"
#include "mvad/harness.hpp"

namespace mvad::cli {

inline constexpr int kExitOk = 0;
/// Some input lines were malformed and skipped.
inline constexpr int kExitSkipped = 1;
/// Usage errors and fatal input errors (e.g. a dimension change).
inline constexpr int kExitFatal = 2;

enum class Mode { Univariate, Multivariate };
enum class Format { Csv, Jsonl };

struct DetectorConfig {
  Mode mode = Mode::Univariate;
  double alpha = 0.98;
  double beta = 0.98;
  /// Absent: 0.0044 in univariate mode, Mahalanobis-3 auto threshold in
  /// multivariate mode.
  std::optional<double> tau;
  std::size_t warmup = 30;
  std::size_t static_points = 100;
  double jitter = 1e-10;
  ZMode z_mode = ZMode::Whitened;
  std::size_t refactor_every = 256;
  double sigma_floor = 1e-8;
  /// Expected dimension; inferred from the first point when absent.
  std::optional<std::size_t> dim;
  Format format = Format::Csv;
  bool header = false;
  /// Multivariate only: load the model from here if the file exists (skipping
  /// the static phase) and write the final model back.
  std::optional<std::string> checkpoint;
};

struct SimulateConfig {
  ShiftSpec shift;
  std::size_t count = 1000;
  std::size_t dim = 1;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  int which = 1;
  std::size_t count = 20000;
  std::size_t dim = 15;
  std::vector<std::uint64_t> seeds{0};
  bool timing = true;
  unsigned jobs = 0;
};

int cmd_detect(std::istream& in, std::ostream& out, std::ostream& err, const DetectorConfig& config);
int cmd_simulate(std::ostream& out, std::ostream& err, const SimulateConfig& config);
int cmd_experiment(std::ostream& out, std::ostream& err, const ExperimentConfig& config);

/// Parses argv and dispatches. `in` is used by `detect` when no input file
/// is given.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace mvad::cli
