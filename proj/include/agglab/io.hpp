#pragma once

#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "agglab/diagnostics.hpp"
#include "agglab/flow.hpp"
#include "agglab/radial_measure.hpp"

// CSV and JSON emission.  All CSV numbers are printed with 17 significant
// digits so that parsing them back reproduces the exact doubles.

namespace agglab {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "time,ring_label,radius,mass,origin_mass\n";
  for (const FlowState& s : traj.snapshots)
    for (std::size_t i = 0; i < s.measure.rings.size(); ++i)
      os << format_double(s.time) << ','
         << format_double(s.initial_radii[i]) << ','
         << format_double(s.measure.rings[i].radius) << ','
         << format_double(s.measure.rings[i].mass) << ','
         << format_double(s.measure.origin_mass) << '\n';
}

inline void write_events_csv(std::ostream& os, const Trajectory& traj) {
  os << "time,kind,label\n";
  for (const FlowEvent& e : traj.events)
    os << format_double(e.time) << ',' << to_string(e.kind) << ','
       << format_double(e.label) << '\n';
}

inline void write_ratio_csv(std::ostream& os, const RatioCurve& curve) {
  os << "r,ratio\n";
  for (const auto& [r, ratio] : curve.pairs)
    os << format_double(r) << ',' << format_double(ratio) << '\n';
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const RadialMeasure& m) {
  nlohmann::json rings = nlohmann::json::array();
  for (const Ring& r : m.rings)
    rings.push_back(nlohmann::json::array({r.mass, r.radius}));
  return {{"origin_mass", m.origin_mass}, {"rings", rings}};
}

inline RadialMeasure measure_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("origin_mass") || !j.contains("rings"))
    throw std::invalid_argument(
        "measure JSON must be an object with origin_mass and rings");
  RadialMeasure m;
  try {
    m.origin_mass = j.at("origin_mass").get<double>();
    for (const auto& e : j.at("rings")) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("each ring must be a [mass, radius] pair");
      m.rings.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("measure JSON holds a non-numeric entry");
  }
  m.validate();
  return m;
}

inline InitialDataKind initial_data_kind_from_string(const std::string& s) {
  if (s == "log_critical_alpha1") return InitialDataKind::log_critical_alpha1;
  if (s == "power_law") return InitialDataKind::power_law;
  if (s == "log_critical_general") return InitialDataKind::log_critical_general;
  throw std::invalid_argument(
      "data kind must be one of log_critical_alpha1, power_law, log_critical_general");
}

inline nlohmann::json to_json(const OracleEstimate& e) {
  return {{"estimate", e.estimate}, {"std_error", e.std_error}};
}

inline nlohmann::json to_json(const BoundFitReport& r) {
  return {{"kind", to_string(r.kind)},
          {"empirical_delta1", r.empirical_delta1},
          {"grid", r.grid},
          {"ratios", r.ratios},
          {"min_ratio_location", r.min_ratio_location}};
}

inline nlohmann::json to_json(const CollapseScalingReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const CollapseSample& s : r.samples) {
    nlohmann::json js = {{"r0", s.r0}, {"label", s.label}, {"censored", s.censored}};
    js["absorb_time"] =
        s.censored ? nlohmann::json(nullptr) : nlohmann::json(s.absorb_time);
    samples.push_back(std::move(js));
  }
  return {{"slope", r.slope},
          {"slope_stderr", r.slope_stderr},
          {"time_cap", r.time_cap},
          {"samples", samples}};
}

inline nlohmann::json to_json(const RatioCurve& c) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [r, ratio] : c.pairs)
    pairs.push_back(nlohmann::json::array({r, ratio}));
  return {{"time", c.time}, {"pairs", pairs}};
}

inline nlohmann::json to_json(const SimilarityReport& r) {
  return {{"lambda_hat", r.lambda_hat},
          {"residual", r.residual},
          {"support_radii", r.support_radii}};
}

inline nlohmann::json to_json(const TwoRingSimilarity& r) {
  nlohmann::json j = {{"feasible", r.feasible}, {"m1", r.m1},   {"m2", r.m2},
                      {"rho1", r.rho1},         {"rho2", r.rho2}};
  j["residual"] =
      r.feasible ? nlohmann::json(r.residual) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const KernelPropertyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const PropertyCheck& c : r.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}});
  return {{"all_pass", r.all_pass()}, {"checks", checks}};
}

}  // namespace agglab
