#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xdesign {

/// User groups by strategy qualification: neither, strategy 1 only,
/// strategy 2 only, both.
enum class UserGroup : std::uint8_t { Neither = 0, OnlyFirst = 1, OnlySecond = 2, Both = 3 };

/// Group-scenario combinations. C* is a group at baseline, I* a group under
/// treatment. Group 0 is never treated, and group 3 is treated under either
/// strategy 1 (Iphi) or strategy 2 (Ipsi).
enum class GroupScenario : std::uint8_t { C0, C1, I1, C2, I2, C3, Iphi, Ipsi };

inline constexpr std::size_t kScenarioCount = 8;

inline constexpr std::array<GroupScenario, kScenarioCount> kAllScenarios = {
    GroupScenario::C0, GroupScenario::C1, GroupScenario::I1,   GroupScenario::C2,
    GroupScenario::I2, GroupScenario::C3, GroupScenario::Iphi, GroupScenario::Ipsi};

/// Key used in JSON documents and diagnostics ("C0", ..., "Iphi", "Ipsi").
std::string_view scenario_name(GroupScenario s);
std::optional<GroupScenario> scenario_from_name(std::string_view name);
UserGroup user_group_of(GroupScenario s);
bool is_treated(GroupScenario s);

struct ResponseMoments {
  double mean = 0.0;
  double variance = 1.0;
};

/// Expected user counts per group. Real-valued: the closed forms halve and
/// quarter these, and only the simulator rounds them.
struct GroupSizes {
  double n0 = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
  double n3 = 0.0;

  [[nodiscard]] double qualified() const { return n1 + n2 + n3; }
  [[nodiscard]] double total() const { return n0 + n1 + n2 + n3; }
  [[nodiscard]] double of(UserGroup g) const;
};

struct PopulationSpec {
  GroupSizes sizes;
  std::array<std::optional<ResponseMoments>, kScenarioCount> moments;

  [[nodiscard]] bool has(GroupScenario s) const;
  /// Throws InputError when the combination has no moments.
  [[nodiscard]] const ResponseMoments& at(GroupScenario s) const;
  [[nodiscard]] double mean(GroupScenario s) const { return at(s).mean; }
  [[nodiscard]] double variance(GroupScenario s) const { return at(s).variance; }
  void set(GroupScenario s, ResponseMoments m);

  /// Every combination set to the same moments.
  static PopulationSpec uniform(GroupSizes sizes, ResponseMoments m);
};

struct TestConfig {
  double alpha = 0.05;  // significance level
  double power = 0.8;   // minimum power pi_min
};

struct Violation {
  std::string field;
  std::string rule;
};

/// Empty iff the population satisfies every invariant.
std::vector<Violation> validate_population(const PopulationSpec& spec);
std::vector<Violation> validate_test_config(const TestConfig& cfg);

/// Throw InputError listing every violation, if any.
void require_valid(const PopulationSpec& spec);
void require_valid(const TestConfig& cfg);

/// z_{1-alpha/2} - z_{1-pi_min}; positive for every valid TestConfig.
double z_margin(const TestConfig& cfg);

/// Size and weighted moments of one analysis group.
struct AnalysisGroupMixture {
  std::string_view label;
  double size = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Stable 64-bit digest of the numeric content, used to check that two
/// results were computed on the same inputs.
std::uint64_t fingerprint(const PopulationSpec& spec);
std::uint64_t fingerprint(const TestConfig& cfg);

std::string join_violations(const std::vector<Violation>& v);

}  // namespace xdesign
