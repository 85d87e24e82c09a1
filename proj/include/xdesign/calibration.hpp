#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xdesign/engine.hpp"
#include "xdesign/model.hpp"
#include "xdesign/rng.hpp"
#include "xdesign/sim.hpp"

namespace xdesign {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Bounds for randomly generated populations. Sizes are drawn as integer
/// multiples of four inside `n` so every analysis-group cell is whole.
struct ParameterRanges {
  Range n{1e3, 1e5};
  Range mean{-10.0, 10.0};
  Range variance{0.25, 25.0};
};

struct EvaluationConfig {
  std::uint64_t seed = 0;
  std::size_t n_evaluations = 100;  // per setup
  std::size_t n_effect_samples = 1000;
  bool include_mde = false;
  std::size_t n_mde_samples = 100;
  std::size_t n_bootstrap = 1000;
  MdeSearchOptions mde;
  ParameterRanges parameter_ranges;
  std::size_t threads = 0;  // 0: hardware concurrency
};

std::vector<Violation> validate_evaluation_config(const EvaluationConfig& cfg);

PopulationSpec random_population(const ParameterRanges& ranges, Rng& rng);

/// Bootstrap check of one simulated quantity against its theoretical value.
struct IntervalCheck {
  double sample_mean = 0.0;
  double sample_sd = 0.0;
  double lo = 0.0;  // 2.5% bootstrap percentile
  double hi = 0.0;  // 97.5% bootstrap percentile
  double rank = 0.0;  // percentile rank of the theoretical value among bootstrap means
  bool covered = false;
};

struct EvaluationRecord {
  SetupKind setup = SetupKind::IntersectionOnly;
  std::size_t index = 0;
  std::uint64_t spec_fingerprint = 0;
  PopulationSpec spec;
  double theory_delta = 0.0;
  double theory_theta = 0.0;
  double sigma_dbar = 0.0;
  std::optional<IntervalCheck> effect;
  /// Theoretical Delta inside mean +- 1.96 sigma_dbar / sqrt(samples).
  bool effect_exact_covered = false;
  std::optional<IntervalCheck> mde;
  std::string error;  // non-empty when the evaluation failed and was skipped
};

struct CoverageCount {
  std::size_t covered = 0;
  std::size_t total = 0;
  [[nodiscard]] double fraction() const {
    return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
  }
  friend bool operator==(const CoverageCount&, const CoverageCount&) = default;
};

inline constexpr std::size_t kRankBins = 20;

/// Histogram of percentile ranks with uniformity diagnostics.
struct RankHistogram {
  std::vector<std::size_t> bins = std::vector<std::size_t>(kRankBins, 0);
  double chi_square = 0.0;   // against uniform, kRankBins - 1 degrees of freedom
  double ks_distance = 0.0;  // sup |F_n(x) - x|
  /// Mass in the two outermost bins on each side relative to the uniform
  /// expectation; well above 1 indicates a U-shape.
  double edge_ratio = 0.0;
  friend bool operator==(const RankHistogram&, const RankHistogram&) = default;
};

RankHistogram rank_histogram(std::span<const double> ranks);

struct SetupAggregate {
  SetupKind setup = SetupKind::IntersectionOnly;
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  CoverageCount effect_bootstrap;
  CoverageCount effect_exact;
  CoverageCount mde_bootstrap;
  RankHistogram effect_ranks;
  RankHistogram mde_ranks;
  /// Mean over evaluations of (simulated MDE mean - theory) / theory.
  double mde_mean_relative_error = 0.0;
  friend bool operator==(const SetupAggregate&, const SetupAggregate&) = default;
};

struct CalibrationReport {
  std::vector<EvaluationRecord> records;
  std::vector<SetupAggregate> aggregates;
};

/// Aggregates in the order the setups first appear in `records`.
std::vector<SetupAggregate> aggregate(std::span<const EvaluationRecord> records);

/// One evaluation: draws a population, samples effects (and MDEs when
/// enabled), bootstraps both and checks them against theory. Depends only
/// on (cfg.seed, setup, index).
EvaluationRecord run_evaluation(const EvaluationConfig& cfg, SetupKind setup, std::size_t index,
                                const TestConfig& test);

/// Every (setup, evaluation) pair, run in parallel. The report is identical
/// for any thread count.
CalibrationReport run_calibration(const EvaluationConfig& cfg, std::span<const SetupKind> setups,
                                  const TestConfig& test);

}  // namespace xdesign
