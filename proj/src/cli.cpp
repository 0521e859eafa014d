#include "mvad/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "mvad/error.hpp"
#include "mvad/pewma.hpp"

namespace mvad::cli {

namespace {

constexpr double kUnivariateTau = 0.0044;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Parses a comma-separated row of finite decimals; nullopt if any field is
// not a number.
std::optional<Vector> parse_row(std::string_view line) {
  Vector out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string field(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (field.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

struct Verdict {
  std::size_t index;
  std::span<const double> values;
  double score;
  double log_score;
  bool is_anomaly;
};

void emit(std::ostream& out, Format format, const Verdict& v) {
  if (format == Format::Csv) {
    out << v.index << ',' << num(v.score) << ',' << num(v.log_score) << ',' << (v.is_anomaly ? 1 : 0);
    for (const double x : v.values) out << ',' << num(x);
    out << '\n';
    return;
  }
  out << "{\"index\":" << v.index << ",\"values\":[";
  for (std::size_t i = 0; i < v.values.size(); ++i) out << (i ? "," : "") << num(v.values[i]);
  out << "],\"score\":" << num(v.score) << ",\"log_score\":" << num(v.log_score)
      << ",\"is_anomaly\":" << (v.is_anomaly ? "true" : "false") << "}\n";
}

class UnivariateSink {
 public:
  explicit UnivariateSink(const DetectorConfig& c)
      : params_{.alpha = c.alpha, .beta = c.beta, .tau = c.tau.value_or(kUnivariateTau), .warmup = c.warmup,
                .sigma_floor = c.sigma_floor} {
    params_.validate();
  }

  void push(std::size_t index, const Vector& x, std::ostream& out, Format format) {
    ScoredPoint p;
    if (!state_) {
      state_ = pewma_init(x[0], params_);
      p = init_record(*state_);
    } else {
      auto [next, scored] = pewma_step(*state_, x[0], params_);
      state_ = next;
      p = scored;
    }
    emit(out, format, {index, x, p.density, p.log_density, p.is_anomaly});
  }

 private:
  PewmaParams params_;
  std::optional<PewmaState> state_;
};

class MultivariateSink {
 public:
  explicit MultivariateSink(const DetectorConfig& c)
      : tau_(c.tau),
        static_points_(c.static_points) {
    options_.jitter = c.jitter;
    options_.z_mode = c.z_mode;
    options_.refactor_every = c.refactor_every;
    if (c.checkpoint && std::filesystem::exists(*c.checkpoint) && std::filesystem::file_size(*c.checkpoint) > 0) {
      std::ifstream f(*c.checkpoint);
      model_ = GaussianModel::load(f, options_);
    }
  }

  /// Returns the dimension the sink is committed to, if any.
  std::optional<std::size_t> dim() const { return model_ ? std::optional(model_->dim()) : std::nullopt; }

  void push(std::size_t index, const Vector& x, std::ostream& out, Format format) {
    if (!model_) {
      buffer_.push_back(x);
      if (buffer_.size() >= static_points_) {
        model_ = GaussianModel::fit(buffer_, options_);
        buffer_.clear();
      }
      return;
    }
    const MultiVerdict v = score(*model_, x, tau_);
    emit(out, format, {index, x, v.density, v.log_density, v.is_anomaly});
    model_->absorb(x);
  }

  std::size_t buffered() const { return buffer_.size(); }
  const std::optional<GaussianModel>& model() const { return model_; }

 private:
  DetectorOptions options_;
  std::optional<double> tau_;
  std::size_t static_points_;
  std::vector<Vector> buffer_;
  std::optional<GaussianModel> model_;
};

}  // namespace

int cmd_detect(std::istream& in, std::ostream& out, std::ostream& err, const DetectorConfig& config) {
  try {
    std::optional<UnivariateSink> uni;
    std::optional<MultivariateSink> multi;
    std::optional<std::size_t> dim = config.dim;
    if (config.mode == Mode::Univariate) {
      if (config.checkpoint) {
        err << "detect: --checkpoint requires --mode multivariate\n";
        return kExitFatal;
      }
      if (dim && *dim != 1) {
        err << "detect: univariate mode requires dimension 1\n";
        return kExitFatal;
      }
      uni.emplace(config);
      dim = 1;
    } else {
      multi.emplace(config);
      if (const auto d = multi->dim()) {
        if (dim && *dim != *d) {
          err << fmt::format("detect: checkpoint has dimension {}, expected {}\n", *d, *dim);
          return kExitFatal;
        }
        dim = d;
      }
    }
    if (dim && multi && !multi->model() && config.static_points <= *dim) {
      err << fmt::format("detect: --static-points must exceed the dimension ({})\n", *dim);
      return kExitFatal;
    }

    std::size_t line_no = 0;
    std::size_t skipped = 0;
    std::size_t index = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 && config.header) continue;
      if (trim(line).empty()) continue;
      const auto row = parse_row(line);
      if (!row) {
        err << fmt::format("line {}: malformed input, skipped\n", line_no);
        ++skipped;
        continue;
      }
      if (!dim) {
        dim = row->size();
        if (multi && config.static_points <= *dim) {
          err << fmt::format("detect: --static-points must exceed the dimension ({})\n", *dim);
          return kExitFatal;
        }
      }
      if (row->size() != *dim) {
        err << fmt::format("line {}: dimension changed from {} to {}\n", line_no, *dim, row->size());
        return kExitFatal;
      }
      if (uni) {
        uni->push(index, *row, out, config.format);
      } else {
        multi->push(index, *row, out, config.format);
      }
      ++index;
    }

    if (multi) {
      if (!multi->model() && multi->buffered() > 0) {
        err << fmt::format("detect: stream ended during the static phase ({} of {} points)\n", multi->buffered(),
                           config.static_points);
      }
      if (config.checkpoint && multi->model()) {
        std::ofstream f(*config.checkpoint);
        multi->model()->save(f);
        if (!f) {
          err << fmt::format("detect: cannot write checkpoint '{}'\n", *config.checkpoint);
          return kExitFatal;
        }
      }
    }
    out.flush();
    return skipped > 0 ? kExitSkipped : kExitOk;
  } catch (const Error& e) {
    err << "detect: " << e.what() << '\n';
    return kExitFatal;
  }
}

int cmd_simulate(std::ostream& out, std::ostream& err, const SimulateConfig& config) {
  try {
    const auto stream = gen_shift_vectors(config.count, config.dim, config.shift, config.seed);
    for (const Vector& x : stream) {
      for (std::size_t j = 0; j < x.size(); ++j) out << (j ? "," : "") << num(x[j]);
      out << '\n';
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitFatal;
  }
}

int cmd_experiment(std::ostream& out, std::ostream& err, const ExperimentConfig& config) {
  if (config.which != 1 && config.which != 2) {
    err << "experiment: --which must be 1 or 2\n";
    return kExitFatal;
  }
  if (config.dim < 1 || config.count < 5 * (config.dim + 1)) {
    err << fmt::format("experiment: --count must be at least 5 * (dim + 1) = {}\n", 5 * (config.dim + 1));
    return kExitFatal;
  }
  if (config.seeds.empty()) {
    err << "experiment: no seeds given\n";
    return kExitFatal;
  }
  try {
    const auto mode = config.which == 1 ? ExperimentMode::UpdateNextSegment : ExperimentMode::UpdateRemaining;
    const auto rows = run_seeded_experiments(mode, config.count, config.dim, config.seeds, {}, config.jobs);
    write_report_header(out);
    for (const auto& row : rows) write_report_row(out, row, config.timing);
    return kExitOk;
  } catch (const Error& e) {
    err << "experiment: " << e.what() << '\n';
    return kExitFatal;
  }
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming Gaussian anomaly detection (PEWMA and online covariance)", "mvad"};
  app.require_subcommand(1);

  DetectorConfig detect;
  std::string input_path;
  std::string mode = "univariate";
  std::string format = "csv";
  std::string z_mode = "whitened";
  std::size_t dim_flag = 0;
  auto* det = app.add_subcommand("detect", "Score a stream of points, one per line");
  det->add_option("input", input_path, "Input file (standard input when omitted)");
  det->add_option("--mode", mode, "univariate or multivariate")->check(CLI::IsMember({"univariate", "multivariate"}));
  det->add_option("--alpha", detect.alpha, "PEWMA forgetting factor")->capture_default_str();
  det->add_option("--beta", detect.beta, "PEWMA probability weight")->capture_default_str();
  det->add_option("--tau", detect.tau, "Density threshold (default 0.0044 univariate, auto multivariate)");
  det->add_option("--warmup", detect.warmup, "PEWMA training steps")->capture_default_str();
  det->add_option("--static-points", detect.static_points, "Points used for the static fit")->capture_default_str();
  det->add_option("--dim", dim_flag, "Expected dimension");
  det->add_option("--jitter", detect.jitter, "Base Cholesky jitter")->capture_default_str();
  det->add_option("--z-mode", z_mode, "whitened or raw")->check(CLI::IsMember({"whitened", "raw"}));
  det->add_option("--refactor-every", detect.refactor_every, "Refactorization period")->capture_default_str();
  det->add_option("--sigma-floor", detect.sigma_floor, "Minimum PEWMA stddev")->capture_default_str();
  det->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  det->add_flag("--header", detect.header, "Skip one leading line");
  det->add_option("--checkpoint", detect.checkpoint, "Model checkpoint to load and save");

  SimulateConfig sim;
  std::string kind = "abrupt-distributional";
  auto* simc = app.add_subcommand("simulate", "Generate a synthetic stream with a shift");
  simc->add_option("--kind", kind, "abrupt-transient, abrupt-distributional or gradual-distributional")
      ->check(CLI::IsMember({"abrupt-transient", "abrupt-distributional", "gradual-distributional"}));
  simc->add_option("--at", sim.shift.at, "Fractional position of the shift")->capture_default_str();
  simc->add_option("--magnitude", sim.shift.magnitude, "Size of the shift")->capture_default_str();
  simc->add_option("--ramp", sim.shift.ramp, "Ramp length for gradual shifts")->capture_default_str();
  simc->add_option("--count", sim.count, "Number of points")->capture_default_str();
  simc->add_option("--dim", sim.dim, "Dimension")->capture_default_str();
  simc->add_option("--seed", sim.seed, "Random seed")->capture_default_str();

  ExperimentConfig exp;
  std::optional<std::uint64_t> single_seed;
  std::vector<std::uint64_t> seeds;
  bool no_timing = false;
  auto* expc = app.add_subcommand("experiment", "Static-vs-online covariance experiment");
  expc->add_option("--which", exp.which, "1: update next segment, 2: update all remaining")->capture_default_str();
  expc->add_option("--count", exp.count, "Points per seed")->capture_default_str();
  expc->add_option("--dim", exp.dim, "Dimension")->capture_default_str();
  expc->add_option("--seeds", seeds, "Seeds (comma separated)")->delimiter(',');
  expc->add_option("--seed", single_seed, "Single seed");
  expc->add_option("--jobs", exp.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  expc->add_flag("--no-timing", no_timing, "Write elapsed_ms as 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFatal;
  }

  if (det->parsed()) {
    detect.mode = mode == "multivariate" ? Mode::Multivariate : Mode::Univariate;
    detect.format = format == "jsonl" ? Format::Jsonl : Format::Csv;
    detect.z_mode = z_mode == "raw" ? ZMode::Raw : ZMode::Whitened;
    if (dim_flag > 0) detect.dim = dim_flag;
    if (input_path.empty()) return cmd_detect(in, out, err, detect);
    std::ifstream f(input_path);
    if (!f) {
      err << fmt::format("detect: cannot open '{}'\n", input_path);
      return kExitFatal;
    }
    return cmd_detect(f, out, err, detect);
  }
  if (simc->parsed()) {
    sim.shift.kind = parse_shift_kind(kind);
    return cmd_simulate(out, err, sim);
  }
  if (!seeds.empty() && single_seed) {
    err << "experiment: use either --seed or --seeds\n";
    return kExitFatal;
  }
  if (!seeds.empty()) exp.seeds = seeds;
  if (single_seed) exp.seeds = {*single_seed};
  exp.timing = !no_timing;
  return cmd_experiment(out, err, exp);
}

}  // namespace mvad::cli
