#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "xdesign/engine.hpp"
#include "xdesign/errors.hpp"
#include "xdesign/normal.hpp"
#include "xdesign/rules.hpp"

namespace xdesign {
namespace {

using testing::close_rel;
using testing::random_spec;
using testing::reference_effect;

const TestConfig kCfg{0.05, 0.8};

EffectSummary summary(SetupKind k, double delta, double theta) {
  EffectSummary s;
  s.setup = k;
  s.delta = delta;
  s.theta_star = theta;
  return s;
}

TEST(Compare, EffectAndSensitivity) {
  const auto v = compare(summary(SetupKind::QualifiedOnly, 0.10, 0.08),
                         summary(SetupKind::AllSamples, 0.09, 0.09));
  EXPECT_EQ(v.winner, SetupKind::QualifiedOnly);
  EXPECT_EQ(v.criterion, Criterion::EffectAndSensitivity);
  EXPECT_GT(v.delta_gap, 0.0);
  EXPECT_LT(v.theta_gap, 0.0);
}

TEST(Compare, NetGain) {
  const auto v = compare(summary(SetupKind::DualControl, 0.12, 0.10),
                         summary(SetupKind::QualifiedOnly, 0.09, 0.08));
  EXPECT_EQ(v.winner, SetupKind::DualControl);
  EXPECT_EQ(v.criterion, Criterion::NetGain);
  EXPECT_NEAR(v.delta_gap, 0.03, 1e-15);
  EXPECT_NEAR(v.theta_gap, 0.02, 1e-15);
}

TEST(Compare, SecondArgumentCanWin) {
  const auto v = compare(summary(SetupKind::AllSamples, 0.09, 0.09),
                         summary(SetupKind::QualifiedOnly, 0.10, 0.08));
  EXPECT_EQ(v.winner, SetupKind::QualifiedOnly);
  EXPECT_EQ(v.criterion, Criterion::EffectAndSensitivity);
  const auto w = compare(summary(SetupKind::QualifiedOnly, 0.09, 0.08),
                         summary(SetupKind::DualControl, 0.12, 0.10));
  EXPECT_EQ(w.winner, SetupKind::DualControl);
  EXPECT_EQ(w.criterion, Criterion::NetGain);
}

TEST(Compare, OppositeSignsAreReported) {
  const auto v = compare(summary(SetupKind::QualifiedOnly, 0.05, 0.01),
                         summary(SetupKind::AllSamples, -0.05, 0.01));
  EXPECT_TRUE(v.inconclusive());
  EXPECT_TRUE(v.opposite_signs);
}

TEST(Compare, NegativeEffectsAreNormalized) {
  const auto v = compare(summary(SetupKind::QualifiedOnly, -0.10, 0.08),
                         summary(SetupKind::AllSamples, -0.09, 0.09));
  EXPECT_TRUE(v.sign_normalized);
  EXPECT_EQ(v.winner, SetupKind::QualifiedOnly);
  EXPECT_EQ(v.criterion, Criterion::EffectAndSensitivity);
}

TEST(Compare, TiesAreInconclusive) {
  const auto a = summary(SetupKind::QualifiedOnly, 0.1, 0.08);
  auto b = a;
  b.setup = SetupKind::AllSamples;
  EXPECT_TRUE(compare(a, b).inconclusive());
  b.delta = 0.1 * (1 + 1e-12);
  EXPECT_TRUE(compare(a, b).inconclusive());
  EXPECT_FALSE(compare(a, b).opposite_signs);
}

TEST(Compare, RejectsMismatchedInputs) {
  auto a = summary(SetupKind::QualifiedOnly, 0.1, 0.08);
  auto b = summary(SetupKind::AllSamples, 0.1, 0.08);
  b.population_fingerprint = 1;
  EXPECT_THROW(compare(a, b), InputError);
  b.population_fingerprint = 0;
  b.config_fingerprint = 1;
  EXPECT_THROW(compare(a, b), InputError);
}

TEST(Compare, VerdictInvariants) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 5000; ++i) {
    const auto spec = random_spec(rng);
    for (auto a : kAllSetups) {
      for (auto b : kAllSetups) {
        EffectSummary sa, sb;
        try {
          sa = effect_summary(a, spec, kCfg);
          sb = effect_summary(b, spec, kCfg);
        } catch (const InapplicableError&) {
          continue;
        }
        const auto v = compare(sa, sb);
        if (!v.winner) continue;
        const double sign = *v.winner == a && a != b ? 1.0 : -1.0;
        if (v.criterion == Criterion::EffectAndSensitivity) {
          EXPECT_GT(sign * v.delta_gap, 0.0);
          EXPECT_LT(sign * v.theta_gap, 0.0);
        } else {
          EXPECT_EQ(v.criterion, Criterion::NetGain);
          EXPECT_GT(sign * v.delta_gap, sign * v.theta_gap);
          const double tol = kVerdictTolerance * std::max({std::fabs(sa.delta),
                                                           std::fabs(sb.delta), sa.theta_star,
                                                           sb.theta_star});
          EXPECT_FALSE(v.delta_gap > tol && v.theta_gap < -tol)
              << v.delta_gap << " " << v.theta_gap;
          EXPECT_FALSE(v.delta_gap < -tol && v.theta_gap > tol);
        }
      }
    }
  }
}

PopulationSpec dilution_example(double var_c0) {
  auto spec = PopulationSpec::uniform({1000, 1000, 1000, 1000}, {0.0, 1.0});
  spec.set(GroupScenario::C0, {0.0, var_c0});
  spec.set(GroupScenario::I2, {0.05, 1.0});
  return spec;
}

TEST(DilutionThetaCheck, Examples) {
  // xi = 6000, N = 3000: xi (n0 + 2N) / (2 N^2) = 6000 * 7000 / 18e6.
  EXPECT_NEAR(6000.0 * 7000.0 / 18e6, 2.3333333, 1e-7);
  const auto high = dilution_example(10.0);
  const auto low = dilution_example(0.01);
  EXPECT_TRUE(dilution_theta_check(high));
  EXPECT_FALSE(dilution_theta_check(low));
  for (const auto& spec : {high, low}) {
    const auto d = testing::from_spec(spec);
    EXPECT_EQ(dilution_theta_check(spec),
              reference_effect(SetupKind::QualifiedOnly, d).var_dbar <
                  reference_effect(SetupKind::AllSamples, d).var_dbar);
  }
}

TEST(DilutionThetaCheck, AgreesWithEngine) {
  std::mt19937_64 rng(22);
  int disagreements = 0;
  for (int i = 0; i < 20000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    const double t3 = effect_summary(SetupKind::QualifiedOnly, spec, kCfg).theta_star;
    const double t2 = effect_summary(SetupKind::AllSamples, spec, kCfg).theta_star;
    if (std::fabs(t3 - t2) < 1e-12 * t2) continue;
    disagreements += dilution_theta_check(spec) != (t3 < t2);
  }
  EXPECT_EQ(disagreements, 0);
}

TEST(DilutionThetaCheck, EqualVarianceSpecialization) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double var_s = std::pow(10.0, -1.0 + 2.0 * u(rng));
    auto spec = PopulationSpec::uniform(
        {std::floor(1 + 1e5 * u(rng)), std::floor(1e5 * u(rng)), std::floor(1e5 * u(rng)),
         std::floor(1 + 1e5 * u(rng))},
        {0.0, var_s});
    const double var_c0 = std::pow(10.0, -1.0 + 3.0 * u(rng));
    spec.set(GroupScenario::C0, {0.0, var_c0});
    const double shortcut = var_s * (spec.sizes.n0 / spec.sizes.qualified() + 2.0);
    if (std::fabs(shortcut - var_c0) < 1e-9 * var_c0) continue;
    EXPECT_EQ(dilution_theta_check(spec), shortcut < var_c0);
  }
}

TEST(DilutionThetaCheck, NoGroupZeroIsInapplicable) {
  auto spec = dilution_example(1.0);
  spec.sizes.n0 = 0;
  EXPECT_THROW(dilution_theta_check(spec), InapplicableError);
  EXPECT_THROW(dilution_verdict(spec, kCfg), InapplicableError);
}

TEST(DilutionVerdict, AdequatelyPoweredShortcut) {
  // Big effect, small n0 relative to the effect: theta*_S3 <= Delta_S3 but
  // not the trivial case, and the diluted MDE is lower.
  auto spec = PopulationSpec::uniform({1000, 1000, 1000, 1000}, {0.0, 1.0});
  spec.set(GroupScenario::C0, {0.0, 0.01});
  spec.set(GroupScenario::I2, {0.5, 1.0});
  const auto v = dilution_verdict(spec, kCfg);
  EXPECT_LE(v.theta_qualified, v.delta_qualified);
  EXPECT_EQ(v.rule, DilutionRule::AdequatelyPowered);
  EXPECT_TRUE(v.undiluted_superior);
}

TEST(DilutionVerdict, AdequatelyPoweredAlwaysUndiluted) {
  std::mt19937_64 rng(24);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    const auto s3 = effect_summary(SetupKind::QualifiedOnly, spec, kCfg);
    if (s3.theta_star > std::fabs(s3.delta)) continue;
    ++hits;
    const auto v = dilution_verdict(spec, kCfg);
    EXPECT_TRUE(v.undiluted_superior);
    EXPECT_NE(v.rule, DilutionRule::GeneralTest);
  }
  EXPECT_GT(hits, 100);
}

TEST(DilutionVerdict, TinyBaselineVarianceFavoursDilution) {
  auto spec = PopulationSpec::uniform({1e6, 1000, 1000, 1000}, {0.0, 1.0});
  spec.set(GroupScenario::C0, {0.0, 0.001});
  spec.set(GroupScenario::I1, {-0.01, 1.0});
  spec.set(GroupScenario::I2, {0.01, 1.0});
  spec.set(GroupScenario::Ipsi, {0.01, 1.0});
  const auto v = dilution_verdict(spec, kCfg);
  EXPECT_EQ(v.rule, DilutionRule::GeneralTest);
  EXPECT_FALSE(v.undiluted_superior);
  EXPECT_LT(v.variance_term, v.noise_gap_term);
  const auto direct = compare(effect_summary(SetupKind::QualifiedOnly, spec, kCfg),
                              effect_summary(SetupKind::AllSamples, spec, kCfg));
  EXPECT_EQ(direct.winner, SetupKind::AllSamples);
}

TEST(DilutionVerdict, NegativeEffectIsNormalized) {
  auto spec = dilution_example(0.01);
  spec.set(GroupScenario::I2, {-0.05, 1.0});
  const auto v = dilution_verdict(spec, kCfg);
  EXPECT_TRUE(v.sign_normalized);
  EXPECT_LT(v.terms.eta, 0.0);
  EXPECT_GT(v.delta_qualified, 0.0);
  auto flat = dilution_example(0.01);
  flat.set(GroupScenario::I2, {0.0, 1.0});
  EXPECT_THROW(dilution_verdict(flat, kCfg), InapplicableError);
}

bool direct_undiluted(const PopulationSpec& spec) {
  const auto v = compare(effect_summary(SetupKind::QualifiedOnly, spec, kCfg),
                         effect_summary(SetupKind::AllSamples, spec, kCfg));
  return v.winner == SetupKind::QualifiedOnly;
}

TEST(DilutionVerdict, MatchesDirectCriteria) {
  std::mt19937_64 rng(25);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    if (dilution_terms(spec, kCfg).eta == 0.0) continue;
    ++checked;
    EXPECT_EQ(dilution_verdict(spec, kCfg).undiluted_superior, direct_undiluted(spec));
  }
  EXPECT_GT(checked, 5000);
}

TEST(DilutionVerdict, RuleOrderDoesNotChangeOutcome) {
  std::mt19937_64 rng(26);
  for (int i = 0; i < 5000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    const auto v = dilution_verdict(spec, kCfg);
    // Every sufficient rule that holds must agree with the general test.
    const auto q = dilution_inequalities(spec, kCfg);
    const bool general = v.variance_term > v.noise_gap_term;
    const bool trivial =
        spec.sizes.total() / spec.sizes.n0 * v.theta_qualified <= v.delta_qualified;
    const bool powered = v.theta_qualified <= v.delta_qualified;
    if (trivial || powered) {
      EXPECT_TRUE(v.undiluted_superior);
    }
    if (!dilution_theta_check(spec) && !trivial && !powered) {
      EXPECT_EQ(v.undiluted_superior, general);
    }
    (void)q;
  }
}

TEST(DilutionInequalities, SquaringPreservesOrderWhenRightSidePositive) {
  std::mt19937_64 rng(27);
  int positive = 0;
  for (int i = 0; i < 20000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    const auto q = dilution_inequalities(spec, kCfg);
    if (!(q.initial_rhs > 0)) continue;
    if (close_rel(q.initial_lhs, q.initial_rhs, 1e-9)) continue;
    ++positive;
    EXPECT_EQ(q.initial_lhs > q.initial_rhs, q.squared_lhs > q.squared_rhs);
  }
  EXPECT_GT(positive, 1000);
}

TEST(DilutionInequalities, TrivialCaseImpliesCriterion) {
  std::mt19937_64 rng(28);
  int trivial = 0, powered_not_trivial = 0;
  for (int i = 0; i < 20000; ++i) {
    auto spec = random_spec(rng);
    if (spec.sizes.n0 == 0) continue;
    const auto s3 = effect_summary(SetupKind::QualifiedOnly, spec, kCfg);
    const auto q = dilution_inequalities(spec, kCfg);
    const double delta = s3.delta, theta = s3.theta_star;
    const bool is_trivial = spec.sizes.total() / spec.sizes.n0 * theta <= delta;
    const bool is_powered = theta <= delta;
    if (is_trivial) {
      ++trivial;
      EXPECT_GT(q.initial_lhs, q.initial_rhs);
      EXPECT_TRUE(is_powered);
    } else if (is_powered) {
      ++powered_not_trivial;
    }
  }
  EXPECT_GT(trivial, 0);
  // The implication is strict: some adequately powered specs are not trivial.
  EXPECT_GT(powered_not_trivial, 0);
}

TEST(DualControl, DifferenceIdentity) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 5000; ++i) {
    const auto d = testing::draw_population(rng);
    const auto spec = testing::to_spec(d);
    const auto t = dilution_terms(spec, kCfg);
    const double nq = spec.sizes.qualified();
    const double ref = nq * (reference_effect(SetupKind::DualControl, d).delta -
                             reference_effect(SetupKind::QualifiedOnly, d).delta) /
                       std::sqrt(t.xi);
    EXPECT_TRUE(close_rel(dual_control_lhs_rhs(spec, kCfg).lhs, ref, 1e-9, 1e-9));
  }
}

TEST(DualControl, EqualVarianceRightSide) {
  // With one shared variance the right-hand side depends on sizes only:
  // sqrt(2) z [sqrt(2 (N / (n1 + n3) + N / (n2 + n3))) - 1].
  std::mt19937_64 rng(32);
  for (int i = 0; i < 2000; ++i) {
    auto d = testing::draw_population(rng);
    const double v = d.var[0];
    for (double& x : d.var) x = v;
    const auto spec = testing::to_spec(d);
    const double n1 = d.n[1], n2 = d.n[2], n3 = d.n[3], nq = n1 + n2 + n3;
    const double expected = std::sqrt(2.0) * z_margin(kCfg) *
                            (std::sqrt(2.0 * (nq / (n1 + n3) + nq / (n2 + n3))) - 1.0);
    EXPECT_TRUE(close_rel(dual_control_lhs_rhs(spec, kCfg).rhs, expected, 1e-12));
  }
}

TEST(DualControl, EqualSizeLeftSide) {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 2000; ++i) {
    auto d = testing::draw_population(rng);
    d.n[1] = d.n[2] = d.n[3] = 1 + std::floor(d.n[1]);
    const auto spec = testing::to_spec(d);
    using namespace testing;
    const double diff = (d.mean[kI2] - d.mean[kC2]) - (d.mean[kI1] - d.mean[kC1]) +
                        d.mean[kIpsi] - d.mean[kIphi];
    const double six = d.var[kC1] + d.var[kI1] + d.var[kC2] + d.var[kI2] + d.var[kIphi] +
                       d.var[kIpsi];
    const double expected = std::sqrt(d.n[1]) * diff / (2.0 * std::sqrt(six));
    EXPECT_TRUE(close_rel(dual_control_lhs_rhs(spec, kCfg).lhs, expected, 1e-9, 1e-9));
  }
}

PopulationSpec simplified_spec(double n, double var, double delta) {
  auto spec = PopulationSpec::uniform({0, n, n, n}, {0.0, var});
  spec.set(GroupScenario::I2, {delta, var});
  return spec;
}

TEST(DualControl, LargeEqualGroupsFavourDualControl) {
  const auto spec = simplified_spec(1e7, 0.16, 0.005);
  const auto sides = dual_control_lhs_rhs(spec, kCfg);
  const double lhs = std::sqrt(1e7) * 0.005 / (2.0 * std::sqrt(6 * 0.16));
  const double rhs = std::sqrt(2.0) * z_margin(kCfg) * (std::sqrt(6.0) - 1.0);
  EXPECT_NEAR(sides.lhs, lhs, 1e-9);
  EXPECT_NEAR(sides.rhs, rhs, 1e-9);
  EXPECT_NEAR(sides.lhs, 8.068, 1e-3);
  EXPECT_NEAR(sides.rhs, 5.743, 1e-3);
  EXPECT_GT(sides.lhs, sides.rhs);
  EXPECT_TRUE(dual_control_wins_simplified({0.16, 1e7, 0.005}, kCfg));
}

TEST(DualControl, MatchesDirectCriterion) {
  std::mt19937_64 rng(34);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto spec = random_spec(rng);
    const auto s4 = effect_summary(SetupKind::DualControl, spec, kCfg);
    const auto s3 = effect_summary(SetupKind::QualifiedOnly, spec, kCfg);
    const double direct = (s4.delta - s3.delta) - (s4.theta_star - s3.theta_star);
    const auto sides = dual_control_lhs_rhs(spec, kCfg);
    if (std::fabs(direct) < 1e-9 * std::max(s4.theta_star, std::fabs(s4.delta))) continue;
    ++checked;
    EXPECT_EQ(sides.lhs > sides.rhs, direct > 0);
  }
  EXPECT_GT(checked, 9000);
}

TEST(RequiredN, Coefficient) {
  EXPECT_NEAR(dual_control_coefficient(kCfg), 791.0, 1.0);
  const double z = testing::normal_quantile_oracle(0.975) - testing::normal_quantile_oracle(0.2);
  EXPECT_NEAR(dual_control_coefficient(kCfg), 48.0 * std::pow(std::sqrt(6.0) - 1.0, 2) * z * z,
              1e-9);
}

TEST(RequiredN, WorkedExample) {
  const double n = required_n({0.16, 0, 0.005}, kCfg);
  EXPECT_GT(n, 5.0e6);
  EXPECT_LT(n, 5.2e6);
  EXPECT_NEAR(n, 5.07e6, 0.01e6);
  EXPECT_NEAR(required_n({0.64, 0, 0.005}, kCfg), 4 * n, 1e-6 * n);
  EXPECT_NEAR(required_n({0.16, 0, 0.01}, kCfg), n / 4, 1e-6 * n);
  EXPECT_NEAR(required_n({0.16, 0, -0.005}, kCfg), n, 1e-9 * n);
}

TEST(RequiredN, ZeroEffectNeedsInfiniteSample) {
  EXPECT_TRUE(std::isinf(required_n({0.16, 0, 0.0}, kCfg)));
  EXPECT_THROW(required_n({0.0, 0, 0.005}, kCfg), InputError);
}

TEST(RequiredN, ThresholdFlipsVerdict) {
  for (double var : {0.01, 0.16, 4.0}) {
    for (double delta : {0.001, 0.005, 0.3}) {
      const double n = required_n({var, 0, delta}, kCfg);
      const auto below = dual_control_lhs_rhs(simplified_spec(n * 0.99, var, delta), kCfg);
      const auto above = dual_control_lhs_rhs(simplified_spec(n * 1.01, var, delta), kCfg);
      EXPECT_LT(below.lhs, below.rhs);
      EXPECT_GT(above.lhs, above.rhs);
      EXPECT_FALSE(dual_control_wins_simplified({var, n * 0.99, delta}, kCfg));
      EXPECT_TRUE(dual_control_wins_simplified({var, n * 1.01, delta}, kCfg));
    }
  }
}

TEST(Rules, VerdictsInvariantToResponseScale) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const auto spec = random_spec(rng);
    const double c = u(rng);
    auto scaled = spec;
    for (auto s : kAllScenarios) {
      scaled.set(s, {c * spec.mean(s), c * c * spec.variance(s)});
    }
    const auto a = dual_control_lhs_rhs(spec, kCfg);
    const auto b = dual_control_lhs_rhs(scaled, kCfg);
    EXPECT_TRUE(close_rel(a.lhs, b.lhs, 1e-9, 1e-9));
    EXPECT_TRUE(close_rel(a.rhs, b.rhs, 1e-9));
    if (spec.sizes.n0 > 0 && dilution_terms(spec, kCfg).eta != 0) {
      EXPECT_EQ(dilution_verdict(spec, kCfg).undiluted_superior,
                dilution_verdict(scaled, kCfg).undiluted_superior);
      EXPECT_EQ(dilution_theta_check(spec), dilution_theta_check(scaled));
    }
    const auto v = compare(effect_summary(SetupKind::DualControl, spec, kCfg),
                           effect_summary(SetupKind::QualifiedOnly, spec, kCfg));
    const auto w = compare(effect_summary(SetupKind::DualControl, scaled, kCfg),
                           effect_summary(SetupKind::QualifiedOnly, scaled, kCfg));
    EXPECT_EQ(v.winner, w.winner);
    EXPECT_EQ(v.criterion, w.criterion);
  }
}

}  // namespace
}  // namespace xdesign
