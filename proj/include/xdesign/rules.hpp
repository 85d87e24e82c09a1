#pragma once

#include <optional>
#include <string_view>

#include "xdesign/engine.hpp"
#include "xdesign/model.hpp"

namespace xdesign {

enum class Criterion : std::uint8_t {
  None = 0,
  EffectAndSensitivity = 1,  // larger effect and smaller MDE
  NetGain = 2,               // effect gain exceeds MDE loss
};

/// Relative tolerance under which gaps count as ties.
inline constexpr double kVerdictTolerance = 1e-9;

/// Outcome of comparing setup S (first argument) against setup R.
///
/// delta_gap and theta_gap are always Delta_S - Delta_R and
/// theta*_S - theta*_R after sign normalization, so the criterion
/// inequalities read off directly when S wins and with both gaps negated
/// when R wins.
struct ComparisonVerdict {
  std::optional<SetupKind> winner;  // nullopt: inconclusive
  Criterion criterion = Criterion::None;
  double delta_gap = 0.0;
  double theta_gap = 0.0;
  bool sign_normalized = false;  // both effects were negative and got flipped
  bool opposite_signs = false;

  [[nodiscard]] bool inconclusive() const { return !winner.has_value(); }
};

/// Throws InputError if the summaries were computed on different inputs.
ComparisonVerdict compare(const EffectSummary& s, const EffectSummary& r);

/// Shorthands for the qualified-only setup written in terms of per-group
/// sums: Delta = eta / N and theta* = sqrt(2) z sqrt(xi) / N with
/// N = n1 + n2 + n3.
struct DilutionTerms {
  double eta = 0.0;
  double xi = 0.0;
  double z = 0.0;
};

DilutionTerms dilution_terms(const PopulationSpec& spec, const TestConfig& cfg);

/// True iff excluding never-qualifying users strictly lowers the MDE.
/// Throws InapplicableError when n0 == 0 (both setups coincide).
bool dilution_theta_check(const PopulationSpec& spec);

enum class DilutionRule : std::uint8_t {
  LowerMde,           // undiluted MDE is smaller outright
  TrivialCase,        // (N_all / n0) theta*_S3 <= Delta_S3
  AdequatelyPowered,  // theta*_S3 <= Delta_S3
  GeneralTest,        // 2 sigma^2_C0 / n0 against the squared noise gap
};

std::string_view dilution_rule_name(DilutionRule r);

struct DilutionVerdict {
  DilutionRule rule = DilutionRule::LowerMde;
  bool undiluted_superior = false;  // qualified-only beats all-samples
  bool sign_normalized = false;     // eta was negative and analysis groups were swapped
  DilutionTerms terms;              // eta as given, before normalization
  double delta_qualified = 0.0;     // after normalization
  double theta_qualified = 0.0;
  double variance_term = 0.0;  // 2 sigma^2_C0 / n0
  double noise_gap_term = 0.0;  // right-hand side of the general test
};

/// Runs the dilution rules in order, stopping at the first that decides.
/// Throws InapplicableError when n0 == 0 or eta == 0.
DilutionVerdict dilution_verdict(const PopulationSpec& spec, const TestConfig& cfg);

/// Both sides of the second-criterion test before and after squaring.
/// `initial_*` is the square-root form; `squared_*` is valid only when
/// initial_rhs > 0. Effects are taken as given (no sign normalization).
struct DilutionInequalities {
  double initial_lhs = 0.0;
  double initial_rhs = 0.0;
  double squared_lhs = 0.0;
  double squared_rhs = 0.0;
};

DilutionInequalities dilution_inequalities(const PopulationSpec& spec, const TestConfig& cfg);

/// Dual control wins on the second criterion iff lhs > rhs.
/// lhs = N (Delta_S4 - Delta_S3) / sqrt(xi), rhs depends on variances and
/// size ratios only.
struct DualControlSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

DualControlSides dual_control_lhs_rhs(const PopulationSpec& spec, const TestConfig& cfg);

/// Equal group sizes and equal variances across qualified groups.
struct SimplifiedAssumptions {
  double sigma_sq_s = 0.0;  // shared response variance
  double n_common = 0.0;    // shared per-group size
  double delta_diff = 0.0;  // (mu_I2 - mu_C2) - (mu_I1 - mu_C1) + mu_Ipsi - mu_Iphi
};

/// (2 sqrt(12) (sqrt(6) - 1) z)^2.
double dual_control_coefficient(const TestConfig& cfg);

/// Per-group size above which dual control beats the qualified-only setup.
/// Returns +infinity when delta_diff == 0. n_common is not used.
double required_n(const SimplifiedAssumptions& a, const TestConfig& cfg);

/// Whether dual control wins under the simplification at the stated
/// n_common, via the equal-size equal-variance forms of both sides.
bool dual_control_wins_simplified(const SimplifiedAssumptions& a, const TestConfig& cfg);

}  // namespace xdesign
