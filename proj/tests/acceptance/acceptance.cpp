// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../experiment_oracle.hpp"
#include "mvad/cli.hpp"
#include "mvad/detector.hpp"
#include "mvad/harness.hpp"
#include "mvad/linalg.hpp"
#include "mvad/pewma.hpp"

namespace {

using namespace mvad;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> body;
};

Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

Matrix random_spd(std::mt19937_64& rng, std::size_t n) {
  Matrix b(n, n);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = normal(rng);
  Matrix c = gram(b);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = c(i, j) / static_cast<double>(n) + (i == j ? 0.1 : 0.0);
  return c;
}

CovBlend random_blend(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(0.5, 0.999);
  std::uniform_real_distribution<double> b(0.001, 1.0);
  return {a(rng), b(rng)};
}

Matrix direct_blend(const Matrix& c, std::span<const double> d, CovBlend blend) {
  Matrix out = c;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) out(i, j) = blend.alpha_cov * c(i, j) + blend.beta_cov * d[i] * d[j];
  return out;
}

Outcome factor_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> dims(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = dims(rng);
    const auto chol = cholesky_factorize(random_spd(rng, n));
    const Matrix c = gram(chol.factor.matrix());
    const Vector d = random_vector(rng, n, 2.0);
    const CovBlend blend = random_blend(rng);
    const Vector z = tri_solve_lower(chol.factor, d);
    const Matrix updated = factor_rank_one_update(chol.factor, z, blend);
    worst = std::max(worst, relative_frobenius_error(gram(updated), direct_blend(c, d, blend)));
  }
  return {worst <= 1e-9, fmt::format("worst relative Frobenius error {:.3e} (bound 1e-9)", worst)};
}

Outcome sherman_morrison_oracle() {
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<std::size_t> dims(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = dims(rng);
    const Matrix c = random_spd(rng, n);
    const auto chol = cholesky_factorize(c);
    const Matrix cinv = inverse_from_cholesky(chol.factor);
    const Vector d = random_vector(rng, n, 2.0);
    const CovBlend blend = random_blend(rng);
    const Matrix updated = sherman_morrison_update(cinv, d, blend);
    worst = std::max(worst, identity_drift(updated, direct_blend(c, d, blend)));
  }
  return {worst <= 1e-7, fmt::format("worst ||C^-1 C - I||inf {:.3e} (bound 1e-7)", worst)};
}

Outcome long_run_consistency() {
  std::mt19937_64 rng(3003);
  std::vector<Vector> init;
  for (int i = 0; i < 20; ++i) init.push_back(random_vector(rng, 5));
  GaussianModel model = GaussianModel::fit(init, {});
  Matrix c = model.covariance();
  double worst = 0.0;
  for (int step = 0; step < 500; ++step) {
    const Vector x = random_vector(rng, 5, 1.5);
    Vector d(5);
    for (std::size_t j = 0; j < 5; ++j) d[j] = x[j] - model.mean()[j];
    c = direct_blend(c, d, model.blend());
    model.absorb(x);
    worst = std::max(worst, identity_drift(model.inverse_covariance(), c));
  }
  return {worst < 1e-4, fmt::format("worst drift {:.3e} over 500 updates, {} refactorizations (bound 1e-4)", worst,
                                    model.refactor_count())};
}

Outcome pewma_calibration() {
  const PewmaParams p;
  std::mt19937_64 rng(4004);
  std::normal_distribution<double> normal;
  PewmaState s = pewma_init(normal(rng), p);
  for (int i = 1; i < 500; ++i) s = pewma_step(s, normal(rng), p).first;
  const auto at = [&](double z) { return pewma_step(s, s.x_hat + z * s.sigma_hat, p).second; };
  const double d3 = at(3.0).density;
  const double dm3 = at(-3.0).density;
  const bool ok = std::abs(d3 - 0.00443) <= 1e-5 && std::abs(dm3 - 0.00443) <= 1e-5 && at(3.01).is_anomaly &&
                  at(-3.01).is_anomaly && !at(2.99).is_anomaly && !at(-2.99).is_anomaly;
  return {ok, fmt::format("P(|Z|=3) = {:.6f}; 3.01 flagged: {}; 2.99 flagged: {}", d3, at(3.01).is_anomaly,
                          at(2.99).is_anomaly)};
}

Outcome beta_zero_collapse() {
  std::mt19937_64 rng(5005);
  std::uniform_real_distribution<double> unit;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PewmaParams p{.alpha = 0.5 + 0.49 * unit(rng), .beta = 0.0, .warmup = static_cast<std::size_t>(1 + trial % 40)};
    const Vector xs = random_vector(rng, 100, 1.0 + 10.0 * unit(rng));
    PewmaState s = pewma_init(xs[0], p);
    double mean = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const auto next = pewma_step(s, xs[i], p).first;
      // the EWMA recursion takes over once the training schedule ends
      mean = i + 1 > p.warmup ? ewma_step(mean, xs[i], p.alpha) : next.s1;
      s = next;
      worst = std::max(worst, std::abs(s.s1 - mean));
    }
  }
  return {worst <= 1e-12, fmt::format("worst |s1 - ewma| {:.3e} over 50 streams (bound 1e-12)", worst)};
}

Outcome shift_resilience() {
  const PewmaParams pewma;
  const PewmaParams ewma = ewma_baseline(pewma);
  const ShiftSpec spec{.kind = ShiftKind::AbruptDistributional, .at = 0.5, .magnitude = 5.0};
  constexpr std::size_t kLength = 2000;
  int wins = 0;
  long pewma_total = 0;
  long ewma_total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto xs = gen_shift_stream(kLength, spec, seed);
    const auto post = [&](const PewmaParams& params) {
      long flags = 0;
      for (const auto& r : score_series(xs, params)) flags += r.t > kLength / 2 && r.is_anomaly;
      return flags;
    };
    const long a = post(pewma);
    const long b = post(ewma);
    pewma_total += a;
    ewma_total += b;
    wins += a < b;
  }
  return {wins >= 45, fmt::format("PEWMA below EWMA in {}/50 seeds (need 45); mean post-shift flags {:.1f} vs {:.1f}",
                                  wins, pewma_total / 50.0, ewma_total / 50.0)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome experiment_trend() {
  std::vector<std::uint64_t> seeds(20);
  std::iota(seeds.begin(), seeds.end(), 0);
  bool ok = true;
  std::string detail;
  for (auto mode : {ExperimentMode::UpdateNextSegment, ExperimentMode::UpdateRemaining}) {
    const auto rows = run_seeded_experiments(mode, 20000, 15, seeds);
    std::vector<double> medians;
    for (std::size_t k = 1; k <= 4; ++k) {
      std::vector<double> values;
      for (const auto& r : rows)
        if (r.report.static_count == k) values.push_back(r.report.aad);
      medians.push_back(median(values));
    }
    for (std::size_t k = 1; k < medians.size(); ++k) ok = ok && medians[k] <= medians[k - 1];
    detail += fmt::format("{}exp{} medians {:.4f}", detail.empty() ? "" : "; ", static_cast<int>(mode),
                          fmt::join(medians, " "));
  }
  return {ok, detail};
}

Outcome experiment_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = gen_random_stream(60, 2, seed);
    const auto e1 = run_experiment_1(data);
    const auto e2 = run_experiment_2(data);
    for (std::size_t k = 1; k <= 4; ++k) {
      worst = std::max(worst, std::abs(e1[k - 1].aad - testing::oracle_protocol_aad(data, 5, k, false)));
      worst = std::max(worst, std::abs(e2[k - 1].aad - testing::oracle_protocol_aad(data, 5, k, true)));
    }
  }
  return {worst <= 1e-10, fmt::format("worst |AAD - oracle| {:.3e} over 10 seeds (bound 1e-10)", worst)};
}

Outcome incremental_mean() {
  std::mt19937_64 rng(9009);
  std::vector<Vector> data;
  for (int i = 0; i < 10000; ++i) {
    Vector x = random_vector(rng, 4, 3.0);
    for (auto& v : x) v += 100.0;
    data.push_back(std::move(x));
  }
  GaussianModel model = GaussianModel::fit(std::span(data).first(50), {});
  for (std::size_t i = 50; i < data.size(); ++i) model.absorb(data[i]);
  const Vector batch = column_mean(data);
  double worst = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j)
    worst = std::max(worst, std::abs(model.mean()[j] - batch[j]) / std::abs(batch[j]));
  return {worst <= 1e-9 && model.count() == data.size(),
          fmt::format("worst relative error {:.3e} over {} points (bound 1e-9)", worst, model.count())};
}

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "mvad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out;
  std::ostringstream err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {status, out.str(), err.str()};
}

std::pair<std::size_t, std::size_t> count_records(const std::string& csv) {
  std::size_t records = 0;
  std::size_t flags = 0;
  std::istringstream s(csv);
  for (std::string line; std::getline(s, line);) {
    ++records;
    std::istringstream fields(line);
    std::string f;
    for (int i = 0; i < 4; ++i) std::getline(fields, f, ',');
    flags += f == "1";
  }
  return {records, flags};
}

Outcome cli_round_trip() {
  constexpr std::size_t kCount = 1000;
  constexpr std::size_t kStatic = 100;
  bool ok = true;
  std::string detail;
  for (auto kind : {ShiftKind::AbruptTransient, ShiftKind::AbruptDistributional, ShiftKind::GradualDistributional}) {
    const std::string name(to_string(kind));
    const ShiftSpec spec{.kind = kind, .ramp = 100};

    const auto uni = invoke({"simulate", "--kind", name, "--count", "1000", "--ramp", "100", "--seed", "11"});
    const auto du = invoke({"detect"}, uni.out);
    std::size_t expected_uni = 0;
    for (const auto& r : score_series(gen_shift_stream(kCount, spec, 11), PewmaParams{})) expected_uni += r.is_anomaly;
    const auto [uni_records, uni_flags] = count_records(du.out);

    const auto multi =
        invoke({"simulate", "--kind", name, "--count", "1000", "--dim", "3", "--ramp", "100", "--seed", "11"});
    const auto dm = invoke({"detect", "--mode", "multivariate", "--static-points", "100"}, multi.out);
    const auto vectors = gen_shift_vectors(kCount, 3, spec, 11);
    GaussianModel model = GaussianModel::fit(std::span(vectors).first(kStatic), {});
    std::size_t expected_multi = 0;
    for (std::size_t i = kStatic; i < kCount; ++i) {
      expected_multi += score(model, vectors[i]).is_anomaly;
      model.absorb(vectors[i]);
    }
    const auto [multi_records, multi_flags] = count_records(dm.out);

    ok = ok && uni.status == 0 && du.status == 0 && multi.status == 0 && dm.status == 0 && uni_records == kCount &&
         multi_records == kCount - kStatic && uni_flags == expected_uni && multi_flags == expected_multi;
    detail += fmt::format("{}: {}/{} flags; ", name, uni_flags, multi_flags);
  }

  const auto bad = invoke({"detect"}, "1\n2\nnot-a-number\n3\n4,\n5\n");
  const bool bad_ok = bad.status == cli::kExitSkipped && bad.err.find("line 3") != std::string::npos &&
                      bad.err.find("line 5") != std::string::npos && count_records(bad.out).first == 4;
  const auto dim_change = invoke({"detect", "--mode", "multivariate", "--static-points", "3"}, "1,2\n3,4\n5,6,7\n");
  const bool dim_ok = dim_change.status == cli::kExitFatal && dim_change.err.find("line 3") != std::string::npos;
  detail += fmt::format("malformed exit {}, dimension change exit {}", bad.status, dim_change.status);
  return {ok && bad_ok && dim_ok, detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "factor-update oracle", 5.0, factor_oracle},
      {2, "Sherman-Morrison oracle", 5.0, sherman_morrison_oracle},
      {3, "long-run consistency", 5.0, long_run_consistency},
      {4, "PEWMA calibration", 0.0, pewma_calibration},
      {5, "beta = 0 collapse", 0.0, beta_zero_collapse},
      {6, "shift resilience", 10.0, shift_resilience},
      {7, "experiment trend", 60.0, experiment_trend},
      {8, "experiment oracle", 0.0, experiment_oracle},
      {9, "incremental mean", 0.0, incremental_mean},
      {10, "CLI round-trip", 0.0, cli_round_trip},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome outcome{false, ""};
    try {
      outcome = c.body();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("exception: {}", e.what())};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = c.budget_s == 0.0 || seconds < c.budget_s;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    const std::string budget = c.budget_s == 0.0 ? "" : fmt::format(" / {:.0f}s", c.budget_s);
    fmt::print("{} {:>2} {:<24} [{:.2f}s{}] {}{}\n", pass ? "PASS" : "FAIL", c.id, c.name, seconds, budget,
               outcome.detail, in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
