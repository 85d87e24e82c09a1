#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "xdesign/model.hpp"

namespace xdesign {

/// The four canonical ways of mapping qualified users to analysis groups.
enum class SetupKind : std::uint8_t {
  IntersectionOnly = 1,  // group 3 only, split into A/B
  AllSamples = 2,        // everyone, split into A/B (diluted)
  QualifiedOnly = 3,     // groups 1-3, split into A/B
  DualControl = 4,       // two randomization groups, each with its own control
};

inline constexpr std::array<SetupKind, 4> kAllSetups = {
    SetupKind::IntersectionOnly, SetupKind::AllSamples, SetupKind::QualifiedOnly,
    SetupKind::DualControl};

std::string_view setup_name(SetupKind s);  // "IntersectionOnly", ...
std::string_view setup_key(SetupKind s);   // "intersection", "all", "qualified", "dual-control"
/// Accepts either form above, or the setup number "1".."4".
std::optional<SetupKind> setup_from_string(std::string_view text);

/// One group-scenario combination's contribution to an analysis group.
struct MixtureComponent {
  GroupScenario scenario;
  double size;
};

/// Which users land in an analysis group and how the group enters the
/// effect contrast (+1 or -1).
struct AnalysisGroupLayout {
  std::string_view label;
  int contrast;
  std::vector<MixtureComponent> components;  // zero-size components omitted

  [[nodiscard]] double size() const;
};

/// Throws InapplicableError naming the offending size when the setup cannot
/// be run on this population.
void check_applicable(SetupKind setup, const PopulationSpec& spec);

/// Analysis-group composition with 50/50 splits (25% per cell for the
/// dual-control setup).
std::vector<AnalysisGroupLayout> layout_for(SetupKind setup, const PopulationSpec& spec);

/// Weighted mixture moments of each analysis group, in layout order.
std::vector<AnalysisGroupMixture> mixtures_for(SetupKind setup, const PopulationSpec& spec);

struct EffectSummary {
  SetupKind setup = SetupKind::IntersectionOnly;
  double delta = 0.0;       // actual effect size
  double theta_star = 0.0;  // minimum detectable effect
  double sigma_dbar = 0.0;  // standard deviation of the effect estimator
  std::vector<AnalysisGroupMixture> groups;
  std::uint64_t population_fingerprint = 0;
  std::uint64_t config_fingerprint = 0;
};

EffectSummary effect_summary(SetupKind setup, const PopulationSpec& spec, const TestConfig& cfg);

/// Normal-approximation power 1 - Phi(z_{1-alpha/2} - |theta| / sigma_dbar).
double power_at(double sigma_dbar, double theta, const TestConfig& cfg);
inline double power_at(const EffectSummary& s, double theta, const TestConfig& cfg) {
  return power_at(s.sigma_dbar, theta, cfg);
}

/// The effect at which power_at reaches cfg.power, found by bisection on the
/// power curve instead of through the quantile of the power target.
double mde_from_power_curve(double sigma_dbar, const TestConfig& cfg);

}  // namespace xdesign
