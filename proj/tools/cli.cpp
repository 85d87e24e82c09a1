#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xdesign/calibration.hpp"
#include "xdesign/engine.hpp"
#include "xdesign/errors.hpp"
#include "xdesign/json_io.hpp"
#include "xdesign/rules.hpp"

#ifndef XDESIGN_VERSION
#define XDESIGN_VERSION "dev"
#endif

namespace xdesign::cli {

namespace {

enum class OutputFormat { Table, Json };

struct CommonOptions {
  OutputFormat format = OutputFormat::Table;
  bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--output", common.format, "Output format")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, OutputFormat>{{"table", OutputFormat::Table},
                                              {"json", OutputFormat::Json}},
          CLI::ignore_case));
  cmd->add_flag("--no-timestamp", common.no_timestamp, "Omit the timestamp from the manifest");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Json manifest(const std::string& command, const std::vector<std::string>& inputs,
              const Json& config, std::optional<std::uint64_t> seed, const CommonOptions& common) {
  Json m = {{"command", command},
            {"inputs", inputs},
            {"config", config},
            {"seed", seed ? Json(*seed) : Json(nullptr)},
            {"version", XDESIGN_VERSION}};
  if (!common.no_timestamp) m["timestamp"] = utc_timestamp();
  return m;
}

void emit_json(std::ostream& out, const Json& manifest_json, const Json& payload) {
  out << Json{{"manifest", manifest_json}, {"payload", payload}}.dump(2) << '\n';
}

std::string fmt(double v, int precision = 9) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

SetupKind parse_setup(const std::string& text) {
  if (auto s = setup_from_string(text)) return *s;
  throw InputError("unknown setup \"" + text +
                   "\" (expected intersection, all, qualified, dual-control or 1-4)");
}

struct Inputs {
  std::string spec_path;
  std::string config_path;
  PopulationSpec spec;
  TestConfig test;

  void load() {
    spec = population_from_json(read_json_file(spec_path));
    test = test_config_from_json(read_json_file(config_path));
    require_valid(spec);
    require_valid(test);
  }
};

void add_inputs(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--spec", in.spec_path, "PopulationSpec JSON file")->required();
  cmd->add_option("--config", in.config_path, "TestConfig JSON file")->required();
}

void print_summary_table(std::ostream& out, const std::vector<EffectSummary>& rows) {
  out << std::left << std::setw(18) << "setup" << std::setw(18) << "delta" << std::setw(18)
      << "theta_star" << std::setw(18) << "sigma_dbar" << "groups (label: size, mean, var)\n";
  for (const auto& r : rows) {
    out << std::setw(18) << setup_name(r.setup) << std::setw(18) << fmt(r.delta) << std::setw(18)
        << fmt(r.theta_star) << std::setw(18) << fmt(r.sigma_dbar);
    for (std::size_t i = 0; i < r.groups.size(); ++i) {
      const auto& g = r.groups[i];
      out << (i ? "; " : "") << g.label << ": " << fmt(g.size) << ", " << fmt(g.mean) << ", "
          << fmt(g.variance);
    }
    out << '\n';
  }
}

std::string verdict_text(const ComparisonVerdict& v) {
  std::ostringstream os;
  if (v.winner) {
    os << setup_name(*v.winner) << " (criterion " << static_cast<int>(v.criterion) << ")";
  } else {
    os << "inconclusive";
  }
  return os.str();
}

void print_verdict(std::ostream& out, const ComparisonVerdict& v) {
  out << "winner:          " << verdict_text(v) << '\n'
      << "delta_gap:       " << fmt(v.delta_gap) << '\n'
      << "theta_gap:       " << fmt(v.theta_gap) << '\n'
      << "sign_normalized: " << (v.sign_normalized ? "yes" : "no") << '\n'
      << "opposite_signs:  " << (v.opposite_signs ? "yes" : "no") << '\n';
}

void print_calibration_table(std::ostream& out, const CalibrationReport& r) {
  out << std::left << std::setw(18) << "setup" << std::setw(24) << "actual effect (BRCI)"
      << std::setw(24) << "actual effect (exact)" << std::setw(24) << "MDE (BRCI)"
      << std::setw(10) << "failed" << "effect rank edge ratio\n";
  for (const auto& a : r.aggregates) {
    out << std::setw(18) << setup_name(a.setup) << std::setw(24) << coverage_text(a.effect_bootstrap)
        << std::setw(24) << coverage_text(a.effect_exact) << std::setw(24)
        << (a.mde_bootstrap.total ? coverage_text(a.mde_bootstrap) : std::string("-"))
        << std::setw(10) << a.failures << fmt(a.effect_ranks.edge_ratio, 4) << '\n';
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("XDESIGN_SEED");
  if (!raw || !*raw) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used, 10);
    if (used != std::string(raw).size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("XDESIGN_SEED is not an unsigned integer: ") + raw);
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compare experiment setups for personalization-strategy A/B tests", "xdesign"};
  app.require_subcommand(1);
  app.set_version_flag("--version", XDESIGN_VERSION);

  CommonOptions common;

  Inputs effects_in;
  std::vector<std::string> effects_setups;
  auto* effects = app.add_subcommand("effects", "Actual effect and MDE for each setup");
  add_inputs(effects, effects_in);
  effects->add_option("--setup", effects_setups, "Setup(s) to evaluate (default: all)");
  add_common(effects, common);

  Inputs compare_in;
  std::string setup_a, setup_b;
  auto* compare_cmd = app.add_subcommand("compare", "Decide which of two setups is superior");
  add_inputs(compare_cmd, compare_in);
  compare_cmd->add_option("--setup-a", setup_a, "First setup (S)")->required();
  compare_cmd->add_option("--setup-b", setup_b, "Second setup (R)")->required();
  add_common(compare_cmd, common);

  Inputs dilution_in;
  auto* dilution = app.add_subcommand("dilution-check", "Should never-qualifying users be included?");
  add_inputs(dilution, dilution_in);
  add_common(dilution, common);

  Inputs dual_in;
  auto* dual = app.add_subcommand("dual-control-check", "Does dual control beat qualified-only?");
  add_inputs(dual, dual_in);
  add_common(dual, common);

  double sigma2 = 0.0, delta = 0.0;
  TestConfig required_cfg;
  auto* required = app.add_subcommand("required-n", "Per-group size for dual control to win");
  required->add_option("--sigma2", sigma2, "Shared response variance")->required();
  required->add_option("--delta", delta, "Difference in actual effects between the setups")
      ->required();
  required->add_option("--alpha", required_cfg.alpha, "Significance level")->capture_default_str();
  required->add_option("--power", required_cfg.power, "Minimum power")->capture_default_str();
  add_common(required, common);

  std::string eval_path, report_path, from_report;
  auto* validate = app.add_subcommand("validate", "Monte-Carlo calibration of the closed forms");
  validate->add_option("config", eval_path, "Evaluation config JSON file");
  validate->add_option("--report", report_path, "Write the machine-readable report here");
  validate->add_option("--from-report", from_report,
                       "Re-read a saved report and print its table instead of running");
  add_common(validate, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << XDESIGN_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const bool as_json = common.format == OutputFormat::Json;
  try {
    if (*effects) {
      effects_in.load();
      std::vector<SetupKind> kinds;
      for (const auto& s : effects_setups) kinds.push_back(parse_setup(s));
      // Explicitly requested setups must apply; the default set skips those
      // that do not.
      const bool explicit_setups = !kinds.empty();
      if (!explicit_setups) kinds.assign(kAllSetups.begin(), kAllSetups.end());
      std::vector<EffectSummary> rows;
      Json skipped = Json::array();
      for (auto k : kinds) {
        try {
          rows.push_back(effect_summary(k, effects_in.spec, effects_in.test));
        } catch (const InapplicableError& e) {
          if (explicit_setups) throw;
          skipped.push_back({{"setup", setup_name(k)}, {"reason", e.what()}});
        }
      }
      if (as_json) {
        Json setups = Json::array(), payload = Json::array();
        for (auto k : kinds) setups.push_back(setup_key(k));
        for (const auto& r : rows) payload.push_back(to_json(r));
        emit_json(out,
                  manifest("effects", {effects_in.spec_path, effects_in.config_path},
                           {{"test", to_json(effects_in.test)}, {"setups", setups}}, std::nullopt,
                           common),
                  {{"summaries", payload}, {"skipped", skipped}});
      } else {
        print_summary_table(out, rows);
        for (const auto& s : skipped) {
          out << "skipped " << s["setup"].get<std::string>() << ": "
              << s["reason"].get<std::string>() << '\n';
        }
      }
      return kOk;
    }

    if (*compare_cmd) {
      compare_in.load();
      const auto a = parse_setup(setup_a);
      const auto b = parse_setup(setup_b);
      const auto sa = effect_summary(a, compare_in.spec, compare_in.test);
      const auto sb = effect_summary(b, compare_in.spec, compare_in.test);
      const auto v = compare(sa, sb);
      if (as_json) {
        emit_json(out,
                  manifest("compare", {compare_in.spec_path, compare_in.config_path},
                           {{"test", to_json(compare_in.test)},
                            {"setup_a", setup_key(a)},
                            {"setup_b", setup_key(b)}},
                           std::nullopt, common),
                  {{"verdict", to_json(v)}, {"summaries", {to_json(sa), to_json(sb)}}});
      } else {
        print_summary_table(out, {sa, sb});
        out << '\n';
        print_verdict(out, v);
      }
      return kOk;
    }

    if (*dilution) {
      dilution_in.load();
      const bool theta_check = dilution_theta_check(dilution_in.spec);
      const auto v = dilution_verdict(dilution_in.spec, dilution_in.test);
      const auto direct =
          compare(effect_summary(SetupKind::QualifiedOnly, dilution_in.spec, dilution_in.test),
                  effect_summary(SetupKind::AllSamples, dilution_in.spec, dilution_in.test));
      if (as_json) {
        emit_json(out,
                  manifest("dilution-check", {dilution_in.spec_path, dilution_in.config_path},
                           {{"test", to_json(dilution_in.test)}}, std::nullopt, common),
                  {{"lower_mde_without_dilution", theta_check},
                   {"verdict", to_json(v)},
                   {"direct_comparison", to_json(direct)}});
      } else {
        out << "undiluted MDE lower:  " << (theta_check ? "yes" : "no") << '\n'
            << "deciding rule:        " << dilution_rule_name(v.rule) << '\n'
            << "superior setup:       "
            << setup_name(v.undiluted_superior ? SetupKind::QualifiedOnly : SetupKind::AllSamples)
            << '\n'
            << "2 var_C0 / n0:        " << fmt(v.variance_term) << '\n'
            << "noise gap term:       " << fmt(v.noise_gap_term) << '\n'
            << "direct comparison:    " << verdict_text(direct) << '\n';
      }
      return kOk;
    }

    if (*dual) {
      dual_in.load();
      const auto sides = dual_control_lhs_rhs(dual_in.spec, dual_in.test);
      const auto direct =
          compare(effect_summary(SetupKind::DualControl, dual_in.spec, dual_in.test),
                  effect_summary(SetupKind::QualifiedOnly, dual_in.spec, dual_in.test));
      const auto winner = sides.lhs > sides.rhs ? SetupKind::DualControl : SetupKind::QualifiedOnly;
      if (as_json) {
        emit_json(out,
                  manifest("dual-control-check", {dual_in.spec_path, dual_in.config_path},
                           {{"test", to_json(dual_in.test)}}, std::nullopt, common),
                  {{"lhs", sides.lhs},
                   {"rhs", sides.rhs},
                   {"winner", setup_name(winner)},
                   {"direct_comparison", to_json(direct)}});
      } else {
        out << "lhs:               " << fmt(sides.lhs) << '\n'
            << "rhs:               " << fmt(sides.rhs) << '\n'
            << "superior setup:    " << setup_name(winner) << '\n'
            << "direct comparison: " << verdict_text(direct) << '\n';
      }
      return kOk;
    }

    if (*required) {
      require_valid(required_cfg);
      const SimplifiedAssumptions assumptions{sigma2, 0.0, delta};
      const double n = required_n(assumptions, required_cfg);
      const double coefficient = dual_control_coefficient(required_cfg);
      const bool infinite = std::isinf(n);
      if (infinite) err << "warning: delta = 0, dual control never wins; required n is infinite\n";
      if (as_json) {
        emit_json(out,
                  manifest("required-n", {},
                           {{"sigma2", sigma2}, {"delta", delta}, {"test", to_json(required_cfg)}},
                           std::nullopt, common),
                  {{"coefficient", coefficient},
                   {"required_n", infinite ? Json("infinite") : Json(n)},
                   {"required_n_ceil", infinite ? Json("infinite") : Json(std::ceil(n))}});
      } else {
        out << "coefficient:     " << fmt(coefficient) << '\n'
            << "required n:      " << (infinite ? "infinite" : fmt(n)) << '\n'
            << "required n ceil: " << (infinite ? "infinite" : fmt(std::ceil(n), 17)) << '\n';
      }
      return kOk;
    }

    if (*validate) {
      if (!from_report.empty()) {
        const auto doc = read_json_file(from_report);
        const auto report =
            calibration_report_from_json(doc.contains("payload") ? doc.at("payload") : doc);
        if (as_json) {
          out << to_json(report).dump(2) << '\n';
        } else {
          print_calibration_table(out, report);
        }
        return kOk;
      }
      if (eval_path.empty()) throw InputError("validate: an evaluation config file is required");
      auto job = validation_job_from_json(read_json_file(eval_path));
      if (auto env = seed_from_env()) job.eval.seed = *env;
      if (auto v = validate_evaluation_config(job.eval); !v.empty()) {
        throw InputError("invalid evaluation config: " + join_violations(v));
      }
      require_valid(job.test);
      const auto report = run_calibration(job.eval, job.setups, job.test);
      const Json doc = {{"manifest", manifest("validate", {eval_path}, to_json(job), job.eval.seed,
                                              common)},
                        {"payload", to_json(report)}};
      if (!report_path.empty()) {
        std::ofstream file(report_path);
        if (!file) throw InputError(report_path + ": cannot write report");
        file << doc.dump(2) << '\n';
      }
      if (as_json) {
        out << doc.dump(2) << '\n';
      } else {
        print_calibration_table(out, report);
      }
      return kOk;
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const InapplicableError& e) {
    err << "inapplicable: " << e.what() << '\n';
    return kInapplicable;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kInputError;
}

}  // namespace xdesign::cli
