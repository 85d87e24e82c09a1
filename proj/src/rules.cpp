#include "xdesign/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "xdesign/errors.hpp"

namespace xdesign {

namespace {

using GS = GroupScenario;

void require_diluted(const PopulationSpec& spec) {
  require_valid(spec);
  if (!(spec.sizes.n0 > 0.0)) {
    throw InapplicableError(
        "dilution rules need n0 > 0; with n0 = 0 the diluted and undiluted setups coincide");
  }
}

}  // namespace

ComparisonVerdict compare(const EffectSummary& s, const EffectSummary& r) {
  if (s.population_fingerprint != r.population_fingerprint ||
      s.config_fingerprint != r.config_fingerprint) {
    throw InputError("compare: summaries were computed on different populations or test configs");
  }
  ComparisonVerdict v;
  double ds = s.delta;
  double dr = r.delta;
  if ((ds > 0.0 && dr < 0.0) || (ds < 0.0 && dr > 0.0)) {
    v.opposite_signs = true;
    v.delta_gap = ds - dr;
    v.theta_gap = s.theta_star - r.theta_star;
    return v;
  }
  if (ds <= 0.0 && dr <= 0.0 && (ds < 0.0 || dr < 0.0)) {
    ds = -ds;
    dr = -dr;
    v.sign_normalized = true;
  }
  v.delta_gap = ds - dr;
  v.theta_gap = s.theta_star - r.theta_star;

  const double scale = std::max({std::fabs(ds), std::fabs(dr), s.theta_star, r.theta_star});
  const double tol = kVerdictTolerance * scale;
  const double dg = v.delta_gap;
  const double tg = v.theta_gap;

  if (dg > tol && tg < -tol) {
    v.winner = s.setup;
    v.criterion = Criterion::EffectAndSensitivity;
  } else if (dg < -tol && tg > tol) {
    v.winner = r.setup;
    v.criterion = Criterion::EffectAndSensitivity;
  } else if (dg - tg > tol) {
    v.winner = s.setup;
    v.criterion = Criterion::NetGain;
  } else if (tg - dg > tol) {
    v.winner = r.setup;
    v.criterion = Criterion::NetGain;
  }
  return v;
}

DilutionTerms dilution_terms(const PopulationSpec& spec, const TestConfig& cfg) {
  require_valid(spec);
  const auto& n = spec.sizes;
  const auto m = [&](GS g) { return static_cast<long double>(spec.mean(g)); };
  const auto v = [&](GS g) { return static_cast<long double>(spec.variance(g)); };
  const long double eta = n.n1 * (m(GS::C1) - m(GS::I1)) + n.n2 * (m(GS::I2) - m(GS::C2)) +
                          n.n3 * (m(GS::Ipsi) - m(GS::Iphi));
  const long double xi = n.n1 * (v(GS::C1) + v(GS::I1)) + n.n2 * (v(GS::I2) + v(GS::C2)) +
                         n.n3 * (v(GS::Ipsi) + v(GS::Iphi));
  return {static_cast<double>(eta), static_cast<double>(xi), z_margin(cfg)};
}

bool dilution_theta_check(const PopulationSpec& spec) {
  require_diluted(spec);
  const auto& n = spec.sizes;
  const double qualified = n.qualified();
  // xi does not depend on the test config; any valid one will do.
  const double xi = dilution_terms(spec, TestConfig{}).xi;
  const double lhs = xi * (n.n0 + 2.0 * qualified) / (2.0 * qualified * qualified);
  return lhs < spec.variance(GS::C0);
}

std::string_view dilution_rule_name(DilutionRule r) {
  switch (r) {
    case DilutionRule::LowerMde:
      return "lower-mde";
    case DilutionRule::TrivialCase:
      return "trivial-case";
    case DilutionRule::AdequatelyPowered:
      return "adequately-powered";
    case DilutionRule::GeneralTest:
      return "general-test";
  }
  return "?";
}

DilutionVerdict dilution_verdict(const PopulationSpec& spec, const TestConfig& cfg) {
  require_diluted(spec);
  DilutionVerdict out;
  out.terms = dilution_terms(spec, cfg);
  if (out.terms.eta == 0.0) {
    throw InapplicableError("dilution rules need a nonzero effect (eta = 0 in both orientations)");
  }
  const auto& n = spec.sizes;
  const double qualified = n.qualified();
  const double eta = std::fabs(out.terms.eta);
  out.sign_normalized = out.terms.eta < 0.0;

  const double delta = eta / qualified;
  const double theta = std::numbers::sqrt2 * out.terms.z * std::sqrt(out.terms.xi) / qualified;
  out.delta_qualified = delta;
  out.theta_qualified = theta;

  const double ratio_all = n.total() / n.n0;
  const double ratio_qualified = qualified / n.n0;
  out.variance_term = 2.0 * spec.variance(GS::C0) / n.n0;
  const double shifted = theta - delta + ratio_qualified * theta;
  const double anchor = ratio_qualified * theta;
  out.noise_gap_term =
      (shifted * shifted - anchor * anchor) / (2.0 * out.terms.z * out.terms.z);

  if (dilution_theta_check(spec)) {
    out.rule = DilutionRule::LowerMde;
    out.undiluted_superior = true;
  } else if (ratio_all * theta <= delta) {
    out.rule = DilutionRule::TrivialCase;
    out.undiluted_superior = true;
  } else if (theta <= delta) {
    out.rule = DilutionRule::AdequatelyPowered;
    out.undiluted_superior = true;
  } else {
    out.rule = DilutionRule::GeneralTest;
    out.undiluted_superior = out.variance_term > out.noise_gap_term;
  }
  return out;
}

DilutionInequalities dilution_inequalities(const PopulationSpec& spec, const TestConfig& cfg) {
  require_diluted(spec);
  const auto t = dilution_terms(spec, cfg);
  const auto& n = spec.sizes;
  const double qualified = n.qualified();
  const double var_c0 = spec.variance(GS::C0);

  DilutionInequalities out;
  out.initial_lhs = qualified / n.n0 * std::sqrt(2.0 * n.n0 * var_c0 + t.xi);
  out.initial_rhs =
      n.total() / n.n0 * std::sqrt(t.xi) - t.eta / (std::numbers::sqrt2 * t.z);

  const double delta = t.eta / qualified;
  const double theta = std::numbers::sqrt2 * t.z * std::sqrt(t.xi) / qualified;
  const double anchor = qualified / n.n0 * theta;
  const double shifted = theta - delta + anchor;
  out.squared_lhs = 2.0 * var_c0 / n.n0;
  out.squared_rhs = (shifted * shifted - anchor * anchor) / (2.0 * t.z * t.z);
  return out;
}

DualControlSides dual_control_lhs_rhs(const PopulationSpec& spec, const TestConfig& cfg) {
  check_applicable(SetupKind::DualControl, spec);
  const auto& n = spec.sizes;
  const auto m = [&](GS g) { return static_cast<long double>(spec.mean(g)); };
  const auto v = [&](GS g) { return static_cast<long double>(spec.variance(g)); };
  const long double first = n.n1 + n.n3;   // qualify for strategy 1
  const long double second = n.n2 + n.n3;  // qualify for strategy 2

  const long double lift_second =
      (n.n2 * (m(GS::I2) - m(GS::C2)) + n.n3 * (m(GS::Ipsi) - m(GS::C3))) / second;
  const long double lift_first =
      (n.n1 * (m(GS::I1) - m(GS::C1)) + n.n3 * (m(GS::Iphi) - m(GS::C3))) / first;
  const long double xi = n.n1 * (v(GS::C1) + v(GS::I1)) + n.n2 * (v(GS::C2) + v(GS::I2)) +
                         n.n3 * (v(GS::Iphi) + v(GS::Ipsi));
  const long double p = n.n1 * (v(GS::C1) + v(GS::I1)) + n.n3 * (v(GS::C3) + v(GS::Iphi));
  const long double q = n.n2 * (v(GS::C2) + v(GS::I2)) + n.n3 * (v(GS::C3) + v(GS::Ipsi));
  const long double wp = 1.0L + n.n2 / first;
  const long double wq = 1.0L + n.n1 / second;

  const double z = z_margin(cfg);
  DualControlSides out;
  out.lhs = static_cast<double>((n.n1 * lift_second - n.n2 * lift_first) / std::sqrt(xi));
  out.rhs = static_cast<double>(std::numbers::sqrt2 * z *
                                (std::sqrt(2.0L * (wp * wp * p + wq * wq * q) / xi) - 1.0L));
  return out;
}

double dual_control_coefficient(const TestConfig& cfg) {
  const double c = 2.0 * std::sqrt(12.0) * (std::sqrt(6.0) - 1.0) * z_margin(cfg);
  return c * c;
}

double required_n(const SimplifiedAssumptions& a, const TestConfig& cfg) {
  if (!(a.sigma_sq_s > 0.0)) throw InputError("required_n: sigma_sq_s must be positive");
  if (!std::isfinite(a.delta_diff)) throw InputError("required_n: delta_diff must be finite");
  const double coefficient = dual_control_coefficient(cfg);
  if (a.delta_diff == 0.0) return std::numeric_limits<double>::infinity();
  return coefficient * a.sigma_sq_s / (a.delta_diff * a.delta_diff);
}

bool dual_control_wins_simplified(const SimplifiedAssumptions& a, const TestConfig& cfg) {
  if (!(a.sigma_sq_s > 0.0)) throw InputError("sigma_sq_s must be positive");
  if (!(a.n_common > 0.0)) throw InputError("n_common must be positive");
  const double lhs =
      std::sqrt(a.n_common) * a.delta_diff / (2.0 * std::sqrt(6.0 * a.sigma_sq_s));
  const double rhs = std::numbers::sqrt2 * z_margin(cfg) * (std::sqrt(6.0) - 1.0);
  return lhs > rhs;
}

}  // namespace xdesign
