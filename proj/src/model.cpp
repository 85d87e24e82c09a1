#include "xdesign/model.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "xdesign/errors.hpp"
#include "xdesign/normal.hpp"

namespace xdesign {

namespace {

constexpr std::array<std::string_view, kScenarioCount> kNames = {"C0", "C1", "I1",   "C2",
                                                                  "I2", "C3", "Iphi", "Ipsi"};

std::size_t index_of(GroupScenario s) { return static_cast<std::size_t>(s); }

// FNV-1a over the raw bit patterns.
class Digest {
 public:
  void add(double v) {
    // Fold -0.0 into 0.0 so equal values hash equal.
    add_bits(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
  }
  void add_bits(std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (bits >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
  }
  [[nodiscard]] std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string_view scenario_name(GroupScenario s) { return kNames[index_of(s)]; }

std::optional<GroupScenario> scenario_from_name(std::string_view name) {
  for (auto s : kAllScenarios) {
    if (kNames[index_of(s)] == name) return s;
  }
  return std::nullopt;
}

UserGroup user_group_of(GroupScenario s) {
  switch (s) {
    case GroupScenario::C0:
      return UserGroup::Neither;
    case GroupScenario::C1:
    case GroupScenario::I1:
      return UserGroup::OnlyFirst;
    case GroupScenario::C2:
    case GroupScenario::I2:
      return UserGroup::OnlySecond;
    case GroupScenario::C3:
    case GroupScenario::Iphi:
    case GroupScenario::Ipsi:
      return UserGroup::Both;
  }
  return UserGroup::Neither;
}

bool is_treated(GroupScenario s) {
  return s == GroupScenario::I1 || s == GroupScenario::I2 || s == GroupScenario::Iphi ||
         s == GroupScenario::Ipsi;
}

double GroupSizes::of(UserGroup g) const {
  switch (g) {
    case UserGroup::Neither:
      return n0;
    case UserGroup::OnlyFirst:
      return n1;
    case UserGroup::OnlySecond:
      return n2;
    case UserGroup::Both:
      return n3;
  }
  return 0.0;
}

bool PopulationSpec::has(GroupScenario s) const { return moments[index_of(s)].has_value(); }

const ResponseMoments& PopulationSpec::at(GroupScenario s) const {
  const auto& m = moments[index_of(s)];
  if (!m) {
    throw InputError("population has no moments for " + std::string(scenario_name(s)));
  }
  return *m;
}

void PopulationSpec::set(GroupScenario s, ResponseMoments m) { moments[index_of(s)] = m; }

PopulationSpec PopulationSpec::uniform(GroupSizes sizes, ResponseMoments m) {
  PopulationSpec spec;
  spec.sizes = sizes;
  for (auto s : kAllScenarios) spec.set(s, m);
  return spec;
}

std::vector<Violation> validate_population(const PopulationSpec& spec) {
  std::vector<Violation> out;
  const std::array<std::pair<const char*, double>, 4> sizes = {
      {{"n.g0", spec.sizes.n0}, {"n.g1", spec.sizes.n1}, {"n.g2", spec.sizes.n2}, {"n.g3", spec.sizes.n3}}};
  bool sizes_finite = true;
  for (const auto& [name, n] : sizes) {
    if (!std::isfinite(n)) {
      out.push_back({name, "must be a finite number"});
      sizes_finite = false;
    } else if (n < 0.0) {
      out.push_back({name, "must be non-negative"});
    }
  }
  if (sizes_finite && !(spec.sizes.qualified() > 0.0)) {
    out.push_back({"n", "g1 + g2 + g3 must be positive"});
  }
  for (auto s : kAllScenarios) {
    const std::string field = "moments." + std::string(scenario_name(s));
    if (!spec.has(s)) {
      out.push_back({field, "missing"});
      continue;
    }
    const auto& m = spec.at(s);
    if (!std::isfinite(m.mean)) out.push_back({field + ".mean", "must be finite"});
    if (!std::isfinite(m.variance) || !(m.variance > 0.0)) {
      out.push_back({field + ".var", "must be finite and strictly positive"});
    }
  }
  return out;
}

std::vector<Violation> validate_test_config(const TestConfig& cfg) {
  std::vector<Violation> out;
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) out.push_back({"alpha", "must lie in (0, 1)"});
  if (!(cfg.power > 0.0 && cfg.power < 1.0)) out.push_back({"power", "must lie in (0, 1)"});
  if (out.empty() && !(cfg.power > cfg.alpha)) {
    out.push_back({"power", "must exceed alpha"});
  }
  return out;
}

std::string join_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << "; ";
    os << v[i].field << ": " << v[i].rule;
  }
  return os.str();
}

void require_valid(const PopulationSpec& spec) {
  if (auto v = validate_population(spec); !v.empty()) {
    throw InputError("invalid population: " + join_violations(v));
  }
}

void require_valid(const TestConfig& cfg) {
  if (auto v = validate_test_config(cfg); !v.empty()) {
    throw InputError("invalid test config: " + join_violations(v));
  }
}

double z_margin(const TestConfig& cfg) {
  require_valid(cfg);
  return normal_quantile(1.0 - cfg.alpha / 2.0) - normal_quantile(1.0 - cfg.power);
}

std::uint64_t fingerprint(const PopulationSpec& spec) {
  Digest d;
  d.add(spec.sizes.n0);
  d.add(spec.sizes.n1);
  d.add(spec.sizes.n2);
  d.add(spec.sizes.n3);
  for (const auto& m : spec.moments) {
    d.add_bits(m.has_value() ? 1 : 0);
    if (m) {
      d.add(m->mean);
      d.add(m->variance);
    }
  }
  return d.value();
}

std::uint64_t fingerprint(const TestConfig& cfg) {
  Digest d;
  d.add(cfg.alpha);
  d.add(cfg.power);
  return d.value();
}

}  // namespace xdesign
