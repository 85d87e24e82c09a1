#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdesign/calibration.hpp"
#include "xdesign/engine.hpp"
#include "xdesign/model.hpp"
#include "xdesign/rules.hpp"

namespace xdesign {

using Json = nlohmann::ordered_json;

// Readers reject unknown keys and report the offending field path in the
// InputError message.

/// {"n": {"g0", "g1", "g2", "g3"}, "moments": {"C0": {"mean", "var"}, ...}}.
/// Missing moments are left unset so validation can name them.
PopulationSpec population_from_json(const Json& j);
Json to_json(const PopulationSpec& spec);

/// {"alpha": .., "power": ..}
TestConfig test_config_from_json(const Json& j);
Json to_json(const TestConfig& cfg);

/// Everything the `validate` command needs: the evaluation config plus the
/// setups to check and the test config ("setups" and "test" keys).
struct ValidationJob {
  EvaluationConfig eval;
  std::vector<SetupKind> setups{kAllSetups.begin(), kAllSetups.end()};
  TestConfig test;
};

ValidationJob validation_job_from_json(const Json& j);
Json to_json(const ValidationJob& job);

Json to_json(const EffectSummary& s);
Json to_json(const ComparisonVerdict& v);
Json to_json(const DilutionVerdict& v);
Json to_json(const CalibrationReport& r);
CalibrationReport calibration_report_from_json(const Json& j);

/// "covered/total (pct%)", the layout of a coverage table cell.
std::string coverage_text(const CoverageCount& c);

/// Parses a JSON file; syntax errors become InputError with line/column.
Json read_json_file(const std::filesystem::path& path);

}  // namespace xdesign
