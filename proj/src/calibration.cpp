#include "xdesign/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <random>
#include <thread>

#include "xdesign/errors.hpp"

namespace xdesign {

namespace {

constexpr std::uint64_t kSpecTag = 1;
constexpr std::uint64_t kEffectTag = 2;
constexpr std::uint64_t kMdeTag = 3;
constexpr std::uint64_t kBootstrapTag = 4;

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sd_of(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

IntervalCheck check_against(std::span<const double> samples, double theory, std::size_t n_bootstrap,
                            std::uint64_t seed) {
  IntervalCheck c;
  c.sample_mean = mean_of(samples);
  c.sample_sd = sd_of(samples, c.sample_mean);
  if (samples.size() < 2) {
    // A single sample resamples to itself.
    c.lo = c.hi = c.sample_mean;
    c.rank = theory < c.sample_mean ? 0.0 : (theory > c.sample_mean ? 1.0 : 0.5);
  } else {
    const auto boot = bootstrap_interval(samples, n_bootstrap, seed);
    c.lo = boot.lo;
    c.hi = boot.hi;
    c.rank = boot.rank(theory);
  }
  c.covered = c.lo <= theory && theory <= c.hi;
  return c;
}

std::uint64_t uniform_multiple_of_four(const Range& r, Rng& rng) {
  const auto lo = static_cast<std::uint64_t>(std::ceil(r.min / 4.0));
  const auto hi = static_cast<std::uint64_t>(std::floor(r.max / 4.0));
  return 4 * std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

}  // namespace

std::vector<Violation> validate_evaluation_config(const EvaluationConfig& cfg) {
  std::vector<Violation> out;
  const auto positive = [&](const char* field, std::size_t v) {
    if (v < 1) out.push_back({field, "must be at least 1"});
  };
  positive("n_evaluations", cfg.n_evaluations);
  positive("n_effect_samples", cfg.n_effect_samples);
  positive("n_mde_samples", cfg.n_mde_samples);
  positive("n_bootstrap", cfg.n_bootstrap);
  positive("max_bisections", cfg.mde.max_bisections);
  positive("mde_batch_reps", cfg.mde.batch_reps);
  positive("mde_max_batches", cfg.mde.max_batches);
  if (!(cfg.mde.per_comparison_alpha > 0.0 && cfg.mde.per_comparison_alpha < 0.5)) {
    out.push_back({"per_comparison_alpha", "must lie in (0, 0.5)"});
  }
  if (!(cfg.mde.bracket_scale > 1.0) || !std::isfinite(cfg.mde.bracket_scale)) {
    out.push_back({"bracket_scale", "must be a finite number above 1"});
  }
  if (cfg.mde.critical == CriticalValueMode::Sampled && cfg.mde.null_samples < 2) {
    out.push_back({"null_samples", "must be at least 2 for a sampled critical value"});
  }
  const auto& r = cfg.parameter_ranges;
  const auto finite = [](const Range& x) { return std::isfinite(x.min) && std::isfinite(x.max); };
  if (!finite(r.n) || !(r.n.min < r.n.max) || r.n.min < 0.0) {
    out.push_back({"parameter_ranges.n", "need 0 <= min < max"});
  } else if (std::floor(r.n.max / 4.0) < std::ceil(r.n.min / 4.0) || r.n.max < 4.0) {
    out.push_back({"parameter_ranges.n", "must contain a positive multiple of 4"});
  }
  if (!finite(r.mean) || !(r.mean.min < r.mean.max)) {
    out.push_back({"parameter_ranges.mean", "need min < max"});
  }
  if (!finite(r.variance) || !(r.variance.min < r.variance.max) || !(r.variance.min > 0.0)) {
    out.push_back({"parameter_ranges.var", "need 0 < min < max"});
  }
  return out;
}

PopulationSpec random_population(const ParameterRanges& ranges, Rng& rng) {
  PopulationSpec spec;
  spec.sizes = {static_cast<double>(uniform_multiple_of_four(ranges.n, rng)),
                static_cast<double>(uniform_multiple_of_four(ranges.n, rng)),
                static_cast<double>(uniform_multiple_of_four(ranges.n, rng)),
                static_cast<double>(uniform_multiple_of_four(ranges.n, rng))};
  std::uniform_real_distribution<double> mean(ranges.mean.min, ranges.mean.max);
  std::uniform_real_distribution<double> var(ranges.variance.min, ranges.variance.max);
  for (auto s : kAllScenarios) {
    const double m = mean(rng);
    spec.set(s, {m, var(rng)});
  }
  return spec;
}

RankHistogram rank_histogram(std::span<const double> ranks) {
  RankHistogram h;
  if (ranks.empty()) return h;
  for (double r : ranks) {
    const auto bin = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, r) * kRankBins),
                                           kRankBins - 1);
    ++h.bins[bin];
  }
  const double n = static_cast<double>(ranks.size());
  const double expected = n / kRankBins;
  for (auto count : h.bins) {
    const double d = static_cast<double>(count) - expected;
    h.chi_square += d * d / expected;
  }
  std::vector<double> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double above = static_cast<double>(i + 1) / n - sorted[i];
    const double below = sorted[i] - static_cast<double>(i) / n;
    h.ks_distance = std::max({h.ks_distance, above, below});
  }
  const auto edges = h.bins[0] + h.bins[1] + h.bins[kRankBins - 2] + h.bins[kRankBins - 1];
  h.edge_ratio = static_cast<double>(edges) / (4.0 * expected);
  return h;
}

std::vector<SetupAggregate> aggregate(std::span<const EvaluationRecord> records) {
  std::vector<SetupAggregate> out;
  std::map<SetupKind, std::size_t> slot;
  std::vector<std::vector<double>> effect_ranks, mde_ranks;
  std::vector<std::vector<double>> mde_errors;
  for (const auto& r : records) {
    auto [it, inserted] = slot.try_emplace(r.setup, out.size());
    if (inserted) {
      out.push_back({});
      out.back().setup = r.setup;
      effect_ranks.emplace_back();
      mde_ranks.emplace_back();
      mde_errors.emplace_back();
    }
    const auto i = it->second;
    auto& agg = out[i];
    ++agg.evaluations;
    if (!r.error.empty()) {
      ++agg.failures;
      continue;
    }
    if (r.effect) {
      ++agg.effect_bootstrap.total;
      agg.effect_bootstrap.covered += r.effect->covered ? 1 : 0;
      ++agg.effect_exact.total;
      agg.effect_exact.covered += r.effect_exact_covered ? 1 : 0;
      effect_ranks[i].push_back(r.effect->rank);
    }
    if (r.mde) {
      ++agg.mde_bootstrap.total;
      agg.mde_bootstrap.covered += r.mde->covered ? 1 : 0;
      mde_ranks[i].push_back(r.mde->rank);
      mde_errors[i].push_back((r.mde->sample_mean - r.theory_theta) / r.theory_theta);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].effect_ranks = rank_histogram(effect_ranks[i]);
    out[i].mde_ranks = rank_histogram(mde_ranks[i]);
    out[i].mde_mean_relative_error = mde_errors[i].empty() ? 0.0 : mean_of(mde_errors[i]);
  }
  return out;
}

EvaluationRecord run_evaluation(const EvaluationConfig& cfg, SetupKind setup, std::size_t index,
                                const TestConfig& test) {
  EvaluationRecord rec;
  rec.setup = setup;
  rec.index = index;
  const auto setup_id = static_cast<std::uint64_t>(setup);
  Rng spec_rng = make_stream(cfg.seed, {kSpecTag, setup_id, index});
  rec.spec = random_population(cfg.parameter_ranges, spec_rng);
  rec.spec_fingerprint = fingerprint(rec.spec);
  try {
    const auto summary = effect_summary(setup, rec.spec, test);
    rec.theory_delta = summary.delta;
    rec.theory_theta = summary.theta_star;
    rec.sigma_dbar = summary.sigma_dbar;

    const EffectSampler sampler(rec.spec, setup);
    std::vector<double> effects(cfg.n_effect_samples);
    for (std::size_t i = 0; i < effects.size(); ++i) {
      effects[i] = sampler.draw(derive_seed(cfg.seed, {kEffectTag, setup_id, index, i}));
    }
    rec.effect = check_against(effects, summary.delta, cfg.n_bootstrap,
                               derive_seed(cfg.seed, {kBootstrapTag, setup_id, index, 0}));
    const double half_width =
        1.96 * summary.sigma_dbar / std::sqrt(static_cast<double>(effects.size()));
    rec.effect_exact_covered = std::fabs(rec.effect->sample_mean - summary.delta) <= half_width;

    if (cfg.include_mde) {
      std::vector<double> mdes(cfg.n_mde_samples);
      for (std::size_t j = 0; j < mdes.size(); ++j) {
        mdes[j] = noisy_bisection_mde(rec.spec, setup, test, cfg.mde,
                                      derive_seed(cfg.seed, {kMdeTag, setup_id, index, j}))
                      .estimate;
      }
      rec.mde = check_against(mdes, summary.theta_star, cfg.n_bootstrap,
                              derive_seed(cfg.seed, {kBootstrapTag, setup_id, index, 1}));
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.effect.reset();
    rec.mde.reset();
  }
  return rec;
}

CalibrationReport run_calibration(const EvaluationConfig& cfg, std::span<const SetupKind> setups,
                                  const TestConfig& test) {
  if (auto v = validate_evaluation_config(cfg); !v.empty()) {
    throw InputError("invalid evaluation config: " + join_violations(v));
  }
  require_valid(test);

  CalibrationReport report;
  const std::size_t total = setups.size() * cfg.n_evaluations;
  report.records.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < total; k = next.fetch_add(1)) {
      report.records[k] =
          run_evaluation(cfg, setups[k / cfg.n_evaluations], k % cfg.n_evaluations, test);
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(total, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  report.aggregates = aggregate(report.records);
  return report;
}

}  // namespace xdesign
