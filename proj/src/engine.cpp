#include "xdesign/engine.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "xdesign/errors.hpp"
#include "xdesign/normal.hpp"

namespace xdesign {

namespace {

using GS = GroupScenario;

void add_component(AnalysisGroupLayout& group, GS scenario, double size) {
  if (size > 0.0) group.components.push_back({scenario, size});
}

AnalysisGroupLayout make_group(std::string_view label, int contrast,
                               std::initializer_list<MixtureComponent> parts) {
  AnalysisGroupLayout g{label, contrast, {}};
  for (const auto& p : parts) add_component(g, p.scenario, p.size);
  return g;
}

[[noreturn]] void inapplicable(SetupKind setup, const std::string& why) {
  throw InapplicableError(std::string(setup_name(setup)) + " is inapplicable: " + why);
}

}  // namespace

std::string_view setup_name(SetupKind s) {
  switch (s) {
    case SetupKind::IntersectionOnly:
      return "IntersectionOnly";
    case SetupKind::AllSamples:
      return "AllSamples";
    case SetupKind::QualifiedOnly:
      return "QualifiedOnly";
    case SetupKind::DualControl:
      return "DualControl";
  }
  return "?";
}

std::string_view setup_key(SetupKind s) {
  switch (s) {
    case SetupKind::IntersectionOnly:
      return "intersection";
    case SetupKind::AllSamples:
      return "all";
    case SetupKind::QualifiedOnly:
      return "qualified";
    case SetupKind::DualControl:
      return "dual-control";
  }
  return "?";
}

std::optional<SetupKind> setup_from_string(std::string_view text) {
  for (auto s : kAllSetups) {
    if (text == setup_name(s) || text == setup_key(s) ||
        text == std::to_string(static_cast<int>(s))) {
      return s;
    }
  }
  return std::nullopt;
}

double AnalysisGroupLayout::size() const {
  double total = 0.0;
  for (const auto& c : components) total += c.size;
  return total;
}

void check_applicable(SetupKind setup, const PopulationSpec& spec) {
  require_valid(spec);
  const auto& n = spec.sizes;
  switch (setup) {
    case SetupKind::IntersectionOnly:
      if (!(n.n3 > 0.0)) inapplicable(setup, "requires n3 > 0 (n3 = " + std::to_string(n.n3) + ")");
      break;
    case SetupKind::AllSamples:
      if (!(n.total() > 0.0)) inapplicable(setup, "requires n0 + n1 + n2 + n3 > 0");
      break;
    case SetupKind::QualifiedOnly:
      if (!(n.qualified() > 0.0)) inapplicable(setup, "requires n1 + n2 + n3 > 0");
      break;
    case SetupKind::DualControl:
      if (!(n.n1 + n.n3 > 0.0)) inapplicable(setup, "requires n1 + n3 > 0");
      if (!(n.n2 + n.n3 > 0.0)) inapplicable(setup, "requires n2 + n3 > 0");
      break;
  }
}

std::vector<AnalysisGroupLayout> layout_for(SetupKind setup, const PopulationSpec& spec) {
  check_applicable(setup, spec);
  const auto& n = spec.sizes;
  switch (setup) {
    case SetupKind::IntersectionOnly:
      return {make_group("A", -1, {{GS::Iphi, n.n3 / 2}}),
              make_group("B", +1, {{GS::Ipsi, n.n3 / 2}})};
    case SetupKind::AllSamples:
      return {make_group("A", -1, {{GS::C0, n.n0 / 2}, {GS::I1, n.n1 / 2}, {GS::C2, n.n2 / 2},
                                   {GS::Iphi, n.n3 / 2}}),
              make_group("B", +1, {{GS::C0, n.n0 / 2}, {GS::C1, n.n1 / 2}, {GS::I2, n.n2 / 2},
                                   {GS::Ipsi, n.n3 / 2}})};
    case SetupKind::QualifiedOnly:
      return {make_group("A", -1, {{GS::I1, n.n1 / 2}, {GS::C2, n.n2 / 2}, {GS::Iphi, n.n3 / 2}}),
              make_group("B", +1, {{GS::C1, n.n1 / 2}, {GS::I2, n.n2 / 2}, {GS::Ipsi, n.n3 / 2}})};
    case SetupKind::DualControl:
      // Effect is (B2 - B1) - (A2 - A1).
      return {make_group("A1", +1, {{GS::C1, n.n1 / 4}, {GS::C3, n.n3 / 4}}),
              make_group("A2", -1, {{GS::I1, n.n1 / 4}, {GS::Iphi, n.n3 / 4}}),
              make_group("B1", -1, {{GS::C2, n.n2 / 4}, {GS::C3, n.n3 / 4}}),
              make_group("B2", +1, {{GS::I2, n.n2 / 4}, {GS::Ipsi, n.n3 / 4}})};
  }
  inapplicable(setup, "unknown setup");
}

namespace {

// Extended-precision accumulation keeps Delta free of cancellation noise
// when the group means are large relative to their difference.
struct ExactMixture {
  long double size = 0;
  long double mean = 0;
  long double variance = 0;
};

ExactMixture mix(const AnalysisGroupLayout& g, const PopulationSpec& spec) {
  long double size = 0, first = 0, var = 0;
  for (const auto& c : g.components) {
    const auto& m = spec.at(c.scenario);
    size += c.size;
    first += static_cast<long double>(c.size) * m.mean;
    var += static_cast<long double>(c.size) * m.variance;
  }
  return {size, first / size, var / size};
}

}  // namespace

std::vector<AnalysisGroupMixture> mixtures_for(SetupKind setup, const PopulationSpec& spec) {
  std::vector<AnalysisGroupMixture> out;
  for (const auto& g : layout_for(setup, spec)) {
    const auto m = mix(g, spec);
    out.push_back({g.label, static_cast<double>(m.size), static_cast<double>(m.mean),
                   static_cast<double>(m.variance)});
  }
  return out;
}

EffectSummary effect_summary(SetupKind setup, const PopulationSpec& spec, const TestConfig& cfg) {
  const double z = z_margin(cfg);
  EffectSummary out;
  out.setup = setup;
  long double delta = 0, var_dbar = 0;
  for (const auto& g : layout_for(setup, spec)) {
    const auto m = mix(g, spec);
    delta += g.contrast * m.mean;
    var_dbar += m.variance / m.size;
    out.groups.push_back({g.label, static_cast<double>(m.size), static_cast<double>(m.mean),
                          static_cast<double>(m.variance)});
  }
  out.delta = static_cast<double>(delta);
  out.sigma_dbar = static_cast<double>(std::sqrt(var_dbar));
  out.theta_star = z * out.sigma_dbar;
  out.population_fingerprint = fingerprint(spec);
  out.config_fingerprint = fingerprint(cfg);
  return out;
}

double power_at(double sigma_dbar, double theta, const TestConfig& cfg) {
  require_valid(cfg);
  if (!(sigma_dbar > 0.0)) throw InputError("power_at: sigma_dbar must be positive");
  const double crit = normal_quantile(1.0 - cfg.alpha / 2.0);
  return normal_sf(crit - std::fabs(theta) / sigma_dbar);
}

double mde_from_power_curve(double sigma_dbar, const TestConfig& cfg) {
  require_valid(cfg);
  if (!(sigma_dbar > 0.0)) throw InputError("mde_from_power_curve: sigma_dbar must be positive");
  double lo = 0.0;
  double hi = sigma_dbar;
  while (power_at(sigma_dbar, hi, cfg) < cfg.power) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("mde_from_power_curve: no upper bracket");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (power_at(sigma_dbar, mid, cfg) < cfg.power) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace xdesign
