#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "xdesign/engine.hpp"
#include "xdesign/model.hpp"

namespace xdesign {

// Responses are normal within each group-scenario combination. Component
// counts are floor(size) of the engine's layout, so a population whose
// sizes are multiples of four reproduces the closed forms exactly.

struct AnalysisGroupSample {
  std::string_view label;
  std::vector<double> responses;
};

/// Individual responses per analysis group, deterministic in `seed`.
std::vector<AnalysisGroupSample> sample_responses(const PopulationSpec& spec, SetupKind setup,
                                                  std::uint64_t seed);

enum class SamplingMode : std::uint8_t {
  /// Draw every response and average them.
  PerResponse,
  /// Draw each component's response sum directly; the sum of m iid
  /// N(mu, s^2) variables is N(m mu, m s^2), so this has the same
  /// distribution as PerResponse at O(1) cost per component.
  SufficientStatistic,
};

/// Draws of the effect estimator (difference of analysis-group means, or the
/// difference of differences for dual control) for one population/setup.
class EffectSampler {
 public:
  EffectSampler(const PopulationSpec& spec, SetupKind setup,
                SamplingMode mode = SamplingMode::SufficientStatistic);

  [[nodiscard]] double draw(std::uint64_t seed) const;
  /// draw(seed) - expected_delta(): a draw under the null hypothesis.
  [[nodiscard]] double null_draw(std::uint64_t seed) const { return draw(seed) - expected_delta_; }

  /// Mean and standard deviation of draw() implied by the integer counts.
  [[nodiscard]] double expected_delta() const { return expected_delta_; }
  [[nodiscard]] double sigma_dbar() const { return sigma_dbar_; }
  [[nodiscard]] SetupKind setup() const { return setup_; }

 private:
  struct Cell {
    GroupScenario scenario;
    std::uint64_t count;
    double mean;
    double sd;
  };
  struct Group {
    int contrast;
    std::uint64_t count;
    std::vector<Cell> cells;
  };

  SetupKind setup_;
  SamplingMode mode_;
  std::vector<Group> groups_;
  double expected_delta_ = 0.0;
  double sigma_dbar_ = 0.0;
};

/// One draw of the actual-effect estimator.
double sample_actual_effect(const PopulationSpec& spec, SetupKind setup, std::uint64_t seed,
                            SamplingMode mode = SamplingMode::SufficientStatistic);

enum class CriticalValueMode : std::uint8_t { Analytic, Sampled };

/// Critical value for |T|: z_{1-alpha/2}, or the empirical (1 - alpha)
/// quantile of |T| over `null_samples` simulated null runs.
double critical_value(const EffectSampler& sampler, const TestConfig& cfg, CriticalValueMode mode,
                      std::size_t null_samples, std::uint64_t seed);

struct PowerBatch {
  std::uint64_t rejections = 0;
  std::uint64_t trials = 0;
};

/// Rejections of |T| > crit with T = (null draw + theta) / sigma over the
/// replicate streams [first_rep, first_rep + n_reps) under `seed`. Reusing a
/// seed across theta gives common random numbers.
PowerBatch power_batch(const EffectSampler& sampler, double theta, double crit, std::size_t n_reps,
                       std::uint64_t seed, std::uint64_t first_rep = 0);

struct PowerEstimate {
  double power = 0.0;
  double critical_value = 0.0;
  std::uint64_t rejections = 0;
  std::uint64_t trials = 0;
};

/// Monte-Carlo rejection rate of the two-sided z-test at true effect theta.
PowerEstimate estimate_power(const PopulationSpec& spec, SetupKind setup, const TestConfig& cfg,
                             double theta, std::size_t n_reps, std::uint64_t seed,
                             CriticalValueMode mode = CriticalValueMode::Analytic,
                             std::size_t null_samples = 10000);

struct BisectionOptions {
  double target = 0.8;
  double per_comparison_alpha = 0.01;
  std::size_t max_bisections = 10;
  std::size_t max_batches = 30;
};

struct BisectionResult {
  double estimate = 0.0;  // midpoint of the final bracket
  double lo = 0.0;
  double hi = 0.0;
  std::size_t bisections = 0;
  std::size_t batches = 0;            // total batches drawn
  std::size_t forced_decisions = 0;   // points decided by the point estimate at the cap
};

/// Batch `b` of power samples at theta.
using PowerSampler = std::function<PowerBatch(double theta, std::uint64_t batch)>;
/// Noise-free power curve.
using PowerCurve = std::function<double(double theta)>;

/// Bisection for the theta where an increasing, noisy power curve crosses
/// `target`. Each point is resampled batch by batch until a one-sided z-test
/// of the pooled power against the target is significant at
/// per_comparison_alpha, or until max_batches, after which the point
/// estimate decides. Throws NumericError if power at `hi` is not above the
/// target.
BisectionResult noisy_bisection(const PowerSampler& sampler, double lo, double hi,
                                const BisectionOptions& opts);
BisectionResult noisy_bisection(const PowerCurve& curve, double lo, double hi,
                                const BisectionOptions& opts);

struct MdeSearchOptions {
  std::size_t max_bisections = 10;
  double per_comparison_alpha = 0.01;
  std::size_t batch_reps = 200;   // power replicates per batch
  std::size_t max_batches = 30;   // resample cap per bisection point
  double bracket_scale = 4.0;     // upper bracket = bracket_scale * theoretical MDE
  CriticalValueMode critical = CriticalValueMode::Analytic;
  std::size_t null_samples = 10000;
};

/// One simulated MDE: sample a critical value, then bisect the simulated
/// power curve (common random numbers across theta) for cfg.power.
BisectionResult noisy_bisection_mde(const PopulationSpec& spec, SetupKind setup,
                                    const TestConfig& cfg, const MdeSearchOptions& opts,
                                    std::uint64_t seed);

/// Percentile bootstrap of the sample mean.
struct BootstrapInterval {
  double lo = 0.0;
  double hi = 0.0;
  double sample_mean = 0.0;
  std::vector<double> means;  // sorted bootstrap means

  /// Fraction of bootstrap means below `value`, counting ties as half.
  [[nodiscard]] double rank(double value) const;
};

/// Throws InputError for fewer than two samples or zero resamples.
BootstrapInterval bootstrap_interval(std::span<const double> samples, std::size_t n_bootstrap,
                                     std::uint64_t seed);

}  // namespace xdesign
