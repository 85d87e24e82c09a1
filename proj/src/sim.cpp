#include "xdesign/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "xdesign/errors.hpp"
#include "xdesign/normal.hpp"
#include "xdesign/rng.hpp"

namespace xdesign {

namespace {

// Stream tags under a search seed.
constexpr std::uint64_t kNullTag = 0x4e554c4c;   // "NULL"
constexpr std::uint64_t kPowerTag = 0x504f5752;  // "POWR"

// Linear-interpolation quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

enum class Side { Above, Below };

template <typename Decide>
BisectionResult bisect(Decide&& decide, double lo, double hi, const BisectionOptions& opts,
                       BisectionResult out) {
  if (!(hi > lo)) throw InputError("noisy_bisection: need lo < hi");
  if (decide(hi, out) != Side::Above) {
    throw NumericError("noisy_bisection: power at the upper bracket " + std::to_string(hi) +
                       " does not exceed the target " + std::to_string(opts.target) +
                       "; widen the bracket");
  }
  for (std::size_t i = 0; i < opts.max_bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (decide(mid, out) == Side::Above) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++out.bisections;
  }
  out.lo = lo;
  out.hi = hi;
  out.estimate = 0.5 * (lo + hi);
  return out;
}

}  // namespace

EffectSampler::EffectSampler(const PopulationSpec& spec, SetupKind setup, SamplingMode mode)
    : setup_(setup), mode_(mode) {
  long double delta = 0, var = 0;
  for (const auto& layout : layout_for(setup, spec)) {
    Group g{layout.contrast, 0, {}};
    long double first = 0, second = 0;
    for (const auto& c : layout.components) {
      const auto count = static_cast<std::uint64_t>(std::floor(c.size));
      if (count == 0) continue;
      const auto& m = spec.at(c.scenario);
      g.cells.push_back({c.scenario, count, m.mean, std::sqrt(m.variance)});
      g.count += count;
      first += static_cast<long double>(count) * m.mean;
      second += static_cast<long double>(count) * m.variance;
    }
    if (g.count == 0) {
      throw InapplicableError(std::string(setup_name(setup)) + ": analysis group " +
                              std::string(layout.label) + " is empty after rounding sizes down");
    }
    const auto n = static_cast<long double>(g.count);
    delta += g.contrast * first / n;
    var += second / (n * n);
    groups_.push_back(std::move(g));
  }
  expected_delta_ = static_cast<double>(delta);
  sigma_dbar_ = static_cast<double>(std::sqrt(var));
}

double EffectSampler::draw(std::uint64_t seed) const {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  double effect = 0.0;
  for (const auto& g : groups_) {
    double sum = 0.0;
    for (const auto& c : g.cells) {
      if (mode_ == SamplingMode::SufficientStatistic) {
        const auto n = static_cast<double>(c.count);
        sum += n * c.mean + std::sqrt(n) * c.sd * normal(rng);
      } else {
        for (std::uint64_t k = 0; k < c.count; ++k) sum += c.mean + c.sd * normal(rng);
      }
    }
    effect += g.contrast * (sum / static_cast<double>(g.count));
  }
  return effect;
}

std::vector<AnalysisGroupSample> sample_responses(const PopulationSpec& spec, SetupKind setup,
                                                  std::uint64_t seed) {
  std::vector<AnalysisGroupSample> out;
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (const auto& layout : layout_for(setup, spec)) {
    AnalysisGroupSample group{layout.label, {}};
    for (const auto& c : layout.components) {
      const auto count = static_cast<std::uint64_t>(std::floor(c.size));
      const auto& m = spec.at(c.scenario);
      const double sd = std::sqrt(m.variance);
      for (std::uint64_t k = 0; k < count; ++k) group.responses.push_back(m.mean + sd * normal(rng));
    }
    if (group.responses.empty()) {
      throw InapplicableError(std::string(setup_name(setup)) + ": analysis group " +
                              std::string(layout.label) + " is empty after rounding sizes down");
    }
    out.push_back(std::move(group));
  }
  return out;
}

double sample_actual_effect(const PopulationSpec& spec, SetupKind setup, std::uint64_t seed,
                            SamplingMode mode) {
  return EffectSampler(spec, setup, mode).draw(seed);
}

double critical_value(const EffectSampler& sampler, const TestConfig& cfg, CriticalValueMode mode,
                      std::size_t null_samples, std::uint64_t seed) {
  require_valid(cfg);
  if (mode == CriticalValueMode::Analytic) return normal_quantile(1.0 - cfg.alpha / 2.0);
  if (null_samples < 2) throw InputError("critical_value: need at least two null samples");
  std::vector<double> stats(null_samples);
  for (std::size_t i = 0; i < null_samples; ++i) {
    stats[i] = std::fabs(sampler.null_draw(derive_seed(seed, {i})) / sampler.sigma_dbar());
  }
  std::sort(stats.begin(), stats.end());
  return sorted_quantile(stats, 1.0 - cfg.alpha);
}

PowerBatch power_batch(const EffectSampler& sampler, double theta, double crit, std::size_t n_reps,
                       std::uint64_t seed, std::uint64_t first_rep) {
  PowerBatch out;
  const double sigma = sampler.sigma_dbar();
  for (std::size_t r = 0; r < n_reps; ++r) {
    const double t = (sampler.null_draw(derive_seed(seed, {first_rep + r})) + theta) / sigma;
    if (std::fabs(t) > crit) ++out.rejections;
  }
  out.trials = n_reps;
  return out;
}

PowerEstimate estimate_power(const PopulationSpec& spec, SetupKind setup, const TestConfig& cfg,
                             double theta, std::size_t n_reps, std::uint64_t seed,
                             CriticalValueMode mode, std::size_t null_samples) {
  if (!(theta >= 0.0)) throw InputError("estimate_power: theta must be non-negative");
  if (n_reps == 0) throw InputError("estimate_power: need at least one replicate");
  const EffectSampler sampler(spec, setup);
  PowerEstimate out;
  out.critical_value =
      critical_value(sampler, cfg, mode, null_samples, derive_seed(seed, {kNullTag}));
  const auto batch = power_batch(sampler, theta, out.critical_value, n_reps,
                                 derive_seed(seed, {kPowerTag}));
  out.rejections = batch.rejections;
  out.trials = batch.trials;
  out.power = static_cast<double>(batch.rejections) / static_cast<double>(batch.trials);
  return out;
}

BisectionResult noisy_bisection(const PowerSampler& sampler, double lo, double hi,
                                const BisectionOptions& opts) {
  if (opts.max_batches == 0) throw InputError("noisy_bisection: max_batches must be positive");
  const double z_crit = normal_quantile(1.0 - opts.per_comparison_alpha);
  const double null_sd = std::sqrt(opts.target * (1.0 - opts.target));
  auto decide = [&](double theta, BisectionResult& stats) {
    std::uint64_t rejections = 0, trials = 0;
    for (std::size_t b = 0; b < opts.max_batches; ++b) {
      const auto batch = sampler(theta, b);
      rejections += batch.rejections;
      trials += batch.trials;
      ++stats.batches;
      if (trials == 0) continue;
      const double p = static_cast<double>(rejections) / static_cast<double>(trials);
      const double stat = (p - opts.target) / (null_sd / std::sqrt(static_cast<double>(trials)));
      if (stat > z_crit) return Side::Above;
      if (stat < -z_crit) return Side::Below;
    }
    ++stats.forced_decisions;
    const double p = trials ? static_cast<double>(rejections) / static_cast<double>(trials) : 0.0;
    return p >= opts.target ? Side::Above : Side::Below;
  };
  return bisect(decide, lo, hi, opts, BisectionResult{});
}

BisectionResult noisy_bisection(const PowerCurve& curve, double lo, double hi,
                                const BisectionOptions& opts) {
  auto decide = [&](double theta, BisectionResult& stats) {
    ++stats.batches;
    return curve(theta) >= opts.target ? Side::Above : Side::Below;
  };
  return bisect(decide, lo, hi, opts, BisectionResult{});
}

BisectionResult noisy_bisection_mde(const PopulationSpec& spec, SetupKind setup,
                                    const TestConfig& cfg, const MdeSearchOptions& opts,
                                    std::uint64_t seed) {
  if (opts.batch_reps == 0) throw InputError("noisy_bisection_mde: batch_reps must be positive");
  const EffectSampler sampler(spec, setup);
  const double theory = effect_summary(setup, spec, cfg).theta_star;
  const double crit =
      critical_value(sampler, cfg, opts.critical, opts.null_samples, derive_seed(seed, {kNullTag}));
  const std::uint64_t power_seed = derive_seed(seed, {kPowerTag});
  const PowerSampler probe = [&](double theta, std::uint64_t batch) {
    return power_batch(sampler, theta, crit, opts.batch_reps, power_seed, batch * opts.batch_reps);
  };
  BisectionOptions bopts;
  bopts.target = cfg.power;
  bopts.per_comparison_alpha = opts.per_comparison_alpha;
  bopts.max_bisections = opts.max_bisections;
  bopts.max_batches = opts.max_batches;
  return noisy_bisection(probe, 0.0, opts.bracket_scale * theory, bopts);
}

double BootstrapInterval::rank(double value) const {
  const auto lower = std::lower_bound(means.begin(), means.end(), value);
  const auto upper = std::upper_bound(lower, means.end(), value);
  const auto below = static_cast<double>(lower - means.begin());
  const auto ties = static_cast<double>(upper - lower);
  return (below + 0.5 * ties) / static_cast<double>(means.size());
}

BootstrapInterval bootstrap_interval(std::span<const double> samples, std::size_t n_bootstrap,
                                     std::uint64_t seed) {
  if (samples.size() < 2) throw InputError("bootstrap_interval: need at least two samples");
  if (n_bootstrap == 0) throw InputError("bootstrap_interval: need at least one resample");
  BootstrapInterval out;
  const auto n = samples.size();
  double total = 0.0;
  for (double s : samples) total += s;
  out.sample_mean = total / static_cast<double>(n);

  out.means.resize(n_bootstrap);
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    Rng rng(derive_seed(seed, {b}));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += samples[pick(rng)];
    out.means[b] = sum / static_cast<double>(n);
  }
  std::sort(out.means.begin(), out.means.end());
  out.lo = sorted_quantile(out.means, 0.025);
  out.hi = sorted_quantile(out.means, 0.975);
  return out;
}

}  // namespace xdesign
