#include "xdesign/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "xdesign/errors.hpp"

namespace xdesign {

namespace {

void reject_unknown(const Json& j, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw InputError(where + ": unknown key \"" + key + "\"");
  }
}

const Json& require(const Json& j, const std::string& where, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(where + ": missing key \"" + key + "\"");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  return j.get<double>();
}

std::uint64_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw InputError(where + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

SetupKind setup_from_json(const Json& j, const std::string& where) {
  if (j.is_string()) {
    if (auto s = setup_from_string(j.get<std::string>())) return *s;
  } else if (j.is_number_integer()) {
    if (auto s = setup_from_string(std::to_string(j.get<std::int64_t>()))) return *s;
  }
  throw InputError(where + ": unknown setup " + j.dump());
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(const Json& j, const std::string& where) {
  if (!j.is_string()) throw InputError(where + ": expected a hex string");
  try {
    return std::stoull(j.get<std::string>(), nullptr, 16);
  } catch (const std::exception&) {
    throw InputError(where + ": expected a hex string");
  }
}

Json range_json(const Range& r) { return Json::array({r.min, r.max}); }

Range range_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw InputError(where + ": expected [min, max]");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

Json check_json(const std::optional<IntervalCheck>& c) {
  if (!c) return nullptr;
  return {{"sample_mean", c->sample_mean}, {"sample_sd", c->sample_sd}, {"lo", c->lo},
          {"hi", c->hi},                   {"rank", c->rank},           {"covered", c->covered}};
}

std::optional<IntervalCheck> check_from_json(const Json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  reject_unknown(j, where, {"sample_mean", "sample_sd", "lo", "hi", "rank", "covered"});
  IntervalCheck c;
  c.sample_mean = number(require(j, where, "sample_mean"), where + ".sample_mean");
  c.sample_sd = number(require(j, where, "sample_sd"), where + ".sample_sd");
  c.lo = number(require(j, where, "lo"), where + ".lo");
  c.hi = number(require(j, where, "hi"), where + ".hi");
  c.rank = number(require(j, where, "rank"), where + ".rank");
  c.covered = require(j, where, "covered").get<bool>();
  return c;
}

Json coverage_json(const CoverageCount& c) {
  return {{"in", c.covered}, {"total", c.total}, {"pct", 100.0 * c.fraction()},
          {"text", coverage_text(c)}};
}

CoverageCount coverage_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, where, {"in", "total", "pct", "text"});
  return {count(require(j, where, "in"), where + ".in"),
          count(require(j, where, "total"), where + ".total")};
}

Json histogram_json(const RankHistogram& h) {
  return {{"bins", h.bins},
          {"chi_square", h.chi_square},
          {"ks_distance", h.ks_distance},
          {"edge_ratio", h.edge_ratio}};
}

RankHistogram histogram_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, where, {"bins", "chi_square", "ks_distance", "edge_ratio"});
  RankHistogram h;
  const auto& bins = require(j, where, "bins");
  if (!bins.is_array() || bins.size() != kRankBins) {
    throw InputError(where + ".bins: expected " + std::to_string(kRankBins) + " counts");
  }
  for (std::size_t i = 0; i < kRankBins; ++i) h.bins[i] = count(bins[i], where + ".bins");
  h.chi_square = number(require(j, where, "chi_square"), where + ".chi_square");
  h.ks_distance = number(require(j, where, "ks_distance"), where + ".ks_distance");
  h.edge_ratio = number(require(j, where, "edge_ratio"), where + ".edge_ratio");
  return h;
}

}  // namespace

PopulationSpec population_from_json(const Json& j) {
  reject_unknown(j, "population", {"n", "moments"});
  PopulationSpec spec;
  const auto& n = require(j, "population", "n");
  reject_unknown(n, "n", {"g0", "g1", "g2", "g3"});
  spec.sizes.n0 = number(require(n, "n", "g0"), "n.g0");
  spec.sizes.n1 = number(require(n, "n", "g1"), "n.g1");
  spec.sizes.n2 = number(require(n, "n", "g2"), "n.g2");
  spec.sizes.n3 = number(require(n, "n", "g3"), "n.g3");

  const auto& moments = require(j, "population", "moments");
  if (!moments.is_object()) throw InputError("moments: expected an object");
  for (const auto& [key, value] : moments.items()) {
    const auto scenario = scenario_from_name(key);
    if (!scenario) throw InputError("moments: unknown key \"" + key + "\"");
    const std::string where = "moments." + key;
    reject_unknown(value, where, {"mean", "var"});
    spec.set(*scenario, {number(require(value, where, "mean"), where + ".mean"),
                         number(require(value, where, "var"), where + ".var")});
  }
  return spec;
}

Json to_json(const PopulationSpec& spec) {
  Json moments = Json::object();
  for (auto s : kAllScenarios) {
    if (spec.has(s)) {
      moments[std::string(scenario_name(s))] = {{"mean", spec.mean(s)}, {"var", spec.variance(s)}};
    }
  }
  return {{"n",
           {{"g0", spec.sizes.n0}, {"g1", spec.sizes.n1}, {"g2", spec.sizes.n2}, {"g3", spec.sizes.n3}}},
          {"moments", moments}};
}

TestConfig test_config_from_json(const Json& j) {
  reject_unknown(j, "test config", {"alpha", "power"});
  return {number(require(j, "test config", "alpha"), "alpha"),
          number(require(j, "test config", "power"), "power")};
}

Json to_json(const TestConfig& cfg) { return {{"alpha", cfg.alpha}, {"power", cfg.power}}; }

ValidationJob validation_job_from_json(const Json& j) {
  const std::string w = "evaluation config";
  reject_unknown(j, w,
                 {"seed", "n_evaluations", "n_effect_samples", "include_mde", "n_mde_samples",
                  "n_bootstrap", "max_bisections", "per_comparison_alpha", "mde_batch_reps",
                  "mde_max_batches", "bracket_scale", "critical_value", "null_samples",
                  "parameter_ranges", "threads", "setups", "test"});
  ValidationJob job;
  auto& e = job.eval;
  const auto opt_count = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(count(*it, key));
    }
  };
  opt_count("seed", e.seed);
  opt_count("n_evaluations", e.n_evaluations);
  opt_count("n_effect_samples", e.n_effect_samples);
  opt_count("n_mde_samples", e.n_mde_samples);
  opt_count("n_bootstrap", e.n_bootstrap);
  opt_count("max_bisections", e.mde.max_bisections);
  opt_count("mde_batch_reps", e.mde.batch_reps);
  opt_count("mde_max_batches", e.mde.max_batches);
  opt_count("null_samples", e.mde.null_samples);
  opt_count("threads", e.threads);
  if (auto it = j.find("include_mde"); it != j.end()) {
    if (!it->is_boolean()) throw InputError("include_mde: expected a boolean");
    e.include_mde = it->get<bool>();
  }
  if (auto it = j.find("per_comparison_alpha"); it != j.end()) {
    e.mde.per_comparison_alpha = number(*it, "per_comparison_alpha");
  }
  if (auto it = j.find("bracket_scale"); it != j.end()) {
    e.mde.bracket_scale = number(*it, "bracket_scale");
  }
  if (auto it = j.find("critical_value"); it != j.end()) {
    const auto mode = it->is_string() ? it->get<std::string>() : std::string();
    if (mode == "analytic") {
      e.mde.critical = CriticalValueMode::Analytic;
    } else if (mode == "sampled") {
      e.mde.critical = CriticalValueMode::Sampled;
    } else {
      throw InputError("critical_value: expected \"analytic\" or \"sampled\"");
    }
  }
  if (auto it = j.find("parameter_ranges"); it != j.end()) {
    reject_unknown(*it, "parameter_ranges", {"n", "mean", "var"});
    auto& r = e.parameter_ranges;
    if (auto n = it->find("n"); n != it->end()) r.n = range_from_json(*n, "parameter_ranges.n");
    if (auto m = it->find("mean"); m != it->end()) {
      r.mean = range_from_json(*m, "parameter_ranges.mean");
    }
    if (auto v = it->find("var"); v != it->end()) {
      r.variance = range_from_json(*v, "parameter_ranges.var");
    }
  }
  if (auto it = j.find("setups"); it != j.end()) {
    if (!it->is_array() || it->empty()) throw InputError("setups: expected a non-empty array");
    job.setups.clear();
    for (const auto& s : *it) job.setups.push_back(setup_from_json(s, "setups"));
  }
  if (auto it = j.find("test"); it != j.end()) job.test = test_config_from_json(*it);
  return job;
}

Json to_json(const ValidationJob& job) {
  const auto& e = job.eval;
  Json setups = Json::array();
  for (auto s : job.setups) setups.push_back(setup_key(s));
  return {{"seed", e.seed},
          {"n_evaluations", e.n_evaluations},
          {"n_effect_samples", e.n_effect_samples},
          {"include_mde", e.include_mde},
          {"n_mde_samples", e.n_mde_samples},
          {"n_bootstrap", e.n_bootstrap},
          {"max_bisections", e.mde.max_bisections},
          {"per_comparison_alpha", e.mde.per_comparison_alpha},
          {"mde_batch_reps", e.mde.batch_reps},
          {"mde_max_batches", e.mde.max_batches},
          {"bracket_scale", e.mde.bracket_scale},
          {"critical_value", e.mde.critical == CriticalValueMode::Analytic ? "analytic" : "sampled"},
          {"null_samples", e.mde.null_samples},
          {"parameter_ranges",
           {{"n", range_json(e.parameter_ranges.n)},
            {"mean", range_json(e.parameter_ranges.mean)},
            {"var", range_json(e.parameter_ranges.variance)}}},
          {"threads", e.threads},
          {"setups", setups},
          {"test", to_json(job.test)}};
}

Json to_json(const EffectSummary& s) {
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    groups.push_back({{"label", g.label}, {"size", g.size}, {"mean", g.mean}, {"var", g.variance}});
  }
  return {{"setup", setup_name(s.setup)},
          {"delta", s.delta},
          {"theta_star", s.theta_star},
          {"sigma_dbar", s.sigma_dbar},
          {"groups", groups}};
}

Json to_json(const ComparisonVerdict& v) {
  return {{"winner", v.winner ? Json(setup_name(*v.winner)) : Json("inconclusive")},
          {"criterion", static_cast<int>(v.criterion)},
          {"delta_gap", v.delta_gap},
          {"theta_gap", v.theta_gap},
          {"sign_normalized", v.sign_normalized},
          {"opposite_signs", v.opposite_signs}};
}

Json to_json(const DilutionVerdict& v) {
  return {{"rule", dilution_rule_name(v.rule)},
          {"undiluted_superior", v.undiluted_superior},
          {"winner", v.undiluted_superior ? setup_name(SetupKind::QualifiedOnly)
                                          : setup_name(SetupKind::AllSamples)},
          {"sign_normalized", v.sign_normalized},
          {"eta", v.terms.eta},
          {"xi", v.terms.xi},
          {"z", v.terms.z},
          {"delta_qualified", v.delta_qualified},
          {"theta_qualified", v.theta_qualified},
          {"variance_term", v.variance_term},
          {"noise_gap_term", v.noise_gap_term}};
}

std::string coverage_text(const CoverageCount& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu/%zu (%.2f%%)", c.covered, c.total, 100.0 * c.fraction());
  return buf;
}

Json to_json(const CalibrationReport& r) {
  Json records = Json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"setup", setup_name(rec.setup)},
                       {"index", rec.index},
                       {"spec_fingerprint", hex(rec.spec_fingerprint)},
                       {"spec", to_json(rec.spec)},
                       {"theory",
                        {{"delta", rec.theory_delta},
                         {"theta_star", rec.theory_theta},
                         {"sigma_dbar", rec.sigma_dbar}}},
                       {"effect", check_json(rec.effect)},
                       {"effect_exact_covered", rec.effect_exact_covered},
                       {"mde", check_json(rec.mde)},
                       {"error", rec.error}});
  }
  Json table = Json::array();
  for (const auto& a : r.aggregates) {
    table.push_back({{"setup", setup_name(a.setup)},
                     {"evaluations", a.evaluations},
                     {"failures", a.failures},
                     {"actual_effect", coverage_json(a.effect_bootstrap)},
                     {"actual_effect_exact", coverage_json(a.effect_exact)},
                     {"mde", coverage_json(a.mde_bootstrap)},
                     {"effect_ranks", histogram_json(a.effect_ranks)},
                     {"mde_ranks", histogram_json(a.mde_ranks)},
                     {"mde_mean_relative_error", a.mde_mean_relative_error}});
  }
  return {{"records", records}, {"table", table}};
}

CalibrationReport calibration_report_from_json(const Json& j) {
  reject_unknown(j, "report", {"records", "table"});
  CalibrationReport r;
  for (const auto& rj : require(j, "report", "records")) {
    const std::string w = "records[" + std::to_string(r.records.size()) + "]";
    reject_unknown(rj, w,
                   {"setup", "index", "spec_fingerprint", "spec", "theory", "effect",
                    "effect_exact_covered", "mde", "error"});
    EvaluationRecord rec;
    rec.setup = setup_from_json(require(rj, w, "setup"), w + ".setup");
    rec.index = count(require(rj, w, "index"), w + ".index");
    rec.spec_fingerprint = from_hex(require(rj, w, "spec_fingerprint"), w + ".spec_fingerprint");
    rec.spec = population_from_json(require(rj, w, "spec"));
    const auto& th = require(rj, w, "theory");
    reject_unknown(th, w + ".theory", {"delta", "theta_star", "sigma_dbar"});
    rec.theory_delta = number(require(th, w, "delta"), w + ".theory.delta");
    rec.theory_theta = number(require(th, w, "theta_star"), w + ".theory.theta_star");
    rec.sigma_dbar = number(require(th, w, "sigma_dbar"), w + ".theory.sigma_dbar");
    rec.effect = check_from_json(require(rj, w, "effect"), w + ".effect");
    rec.effect_exact_covered = require(rj, w, "effect_exact_covered").get<bool>();
    rec.mde = check_from_json(require(rj, w, "mde"), w + ".mde");
    rec.error = require(rj, w, "error").get<std::string>();
    r.records.push_back(std::move(rec));
  }
  for (const auto& aj : require(j, "report", "table")) {
    const std::string w = "table[" + std::to_string(r.aggregates.size()) + "]";
    reject_unknown(aj, w,
                   {"setup", "evaluations", "failures", "actual_effect", "actual_effect_exact",
                    "mde", "effect_ranks", "mde_ranks", "mde_mean_relative_error"});
    SetupAggregate a;
    a.setup = setup_from_json(require(aj, w, "setup"), w + ".setup");
    a.evaluations = count(require(aj, w, "evaluations"), w + ".evaluations");
    a.failures = count(require(aj, w, "failures"), w + ".failures");
    a.effect_bootstrap = coverage_from_json(require(aj, w, "actual_effect"), w + ".actual_effect");
    a.effect_exact =
        coverage_from_json(require(aj, w, "actual_effect_exact"), w + ".actual_effect_exact");
    a.mde_bootstrap = coverage_from_json(require(aj, w, "mde"), w + ".mde");
    a.effect_ranks = histogram_from_json(require(aj, w, "effect_ranks"), w + ".effect_ranks");
    a.mde_ranks = histogram_from_json(require(aj, w, "mde_ranks"), w + ".mde_ranks");
    a.mde_mean_relative_error =
        number(require(aj, w, "mde_mean_relative_error"), w + ".mde_mean_relative_error");
    r.aggregates.push_back(a);
  }
  return r;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace xdesign
