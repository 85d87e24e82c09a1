#pragma once

// Builders shared by the test suites, plus a reference evaluation of the
// closed forms coded directly from the setup definitions on plain arrays.

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xdesign/engine.hpp"
#include "xdesign/model.hpp"

namespace xdesign::testing {

enum Sc { kC0, kC1, kI1, kC2, kI2, kC3, kIphi, kIpsi };

inline PopulationSpec to_spec(const PopulationDraw& d) {
  PopulationSpec s;
  s.sizes = {d.n[0], d.n[1], d.n[2], d.n[3]};
  for (std::size_t i = 0; i < kScenarioCount; ++i) {
    s.set(kAllScenarios[i], {d.mean[i], d.var[i]});
  }
  return s;
}

inline PopulationDraw from_spec(const PopulationSpec& s) {
  PopulationDraw d{};
  d.n[0] = s.sizes.n0;
  d.n[1] = s.sizes.n1;
  d.n[2] = s.sizes.n2;
  d.n[3] = s.sizes.n3;
  for (std::size_t i = 0; i < kScenarioCount; ++i) {
    d.mean[i] = s.mean(kAllScenarios[i]);
    d.var[i] = s.variance(kAllScenarios[i]);
  }
  return d;
}

inline PopulationSpec random_spec(std::mt19937_64& rng, bool allow_empty = true) {
  return to_spec(draw_population(rng, allow_empty));
}

struct Reference {
  double delta;
  double var_dbar;
};

namespace detail {
struct Part {
  double n;
  int sc;
};
struct Moments {
  double n, mean, var;
};
template <std::size_t K>
Moments pool(const PopulationDraw& d, const Part (&parts)[K]) {
  double n = 0, m = 0, v = 0;
  for (const auto& p : parts) {
    n += p.n;
    m += p.n * d.mean[p.sc];
    v += p.n * d.var[p.sc];
  }
  return {n, m / n, v / n};
}
}  // namespace detail

/// Delta and variance of the effect estimator, from the setup definitions.
inline Reference reference_effect(SetupKind setup, const PopulationDraw& d) {
  using detail::Part;
  const double n0 = d.n[0], n1 = d.n[1], n2 = d.n[2], n3 = d.n[3];
  switch (setup) {
    case SetupKind::IntersectionOnly:
      return {d.mean[kIpsi] - d.mean[kIphi], (d.var[kIphi] + d.var[kIpsi]) / (n3 / 2)};
    case SetupKind::AllSamples:
    case SetupKind::QualifiedOnly: {
      const double c0 = setup == SetupKind::AllSamples ? n0 / 2 : 0.0;
      const Part pa[] = {{c0, kC0}, {n1 / 2, kI1}, {n2 / 2, kC2}, {n3 / 2, kIphi}};
      const Part pb[] = {{c0, kC0}, {n1 / 2, kC1}, {n2 / 2, kI2}, {n3 / 2, kIpsi}};
      const auto a = detail::pool(d, pa);
      const auto b = detail::pool(d, pb);
      return {b.mean - a.mean, a.var / a.n + b.var / b.n};
    }
    case SetupKind::DualControl: {
      const Part pa1[] = {{n1 / 4, kC1}, {n3 / 4, kC3}};
      const Part pa2[] = {{n1 / 4, kI1}, {n3 / 4, kIphi}};
      const Part pb1[] = {{n2 / 4, kC2}, {n3 / 4, kC3}};
      const Part pb2[] = {{n2 / 4, kI2}, {n3 / 4, kIpsi}};
      const auto a1 = detail::pool(d, pa1), a2 = detail::pool(d, pa2);
      const auto b1 = detail::pool(d, pb1), b2 = detail::pool(d, pb2);
      return {(b2.mean - b1.mean) - (a2.mean - a1.mean),
              a1.var / a1.n + a2.var / a2.n + b1.var / b1.n + b2.var / b2.n};
    }
  }
  return {0, 0};
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b)) + abs_floor;
}

}  // namespace xdesign::testing
