#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stabdom/cdpr.hpp"
#include "stabdom/continuation.hpp"
#include "stabdom/domainmap.hpp"
#include "stabdom/timedomain.hpp"

namespace stabdom {

/// Everything one run needs. Read from an INI file with sections
/// [model] [controller] [continuation] [curve] [run]; missing keys keep their defaults.
struct RunConfig {
  cdpr::CdprConfig model;
  ContinuationSettings equilibrium = PipelineSettings::cdpr_defaults().equilibrium;
  ContinuationSettings curve = PipelineSettings::cdpr_defaults().curve;
  IntegratorSettings integrator;

  // equilibrium
  std::string active = "x_r";
  int direction = +1;
  // codim2: reference coordinates of the seed when no equilibrium run precedes it
  std::optional<std::array<double, 2>> seed_reference;
  // simulate
  double t_end = 60.0;
  double sample_dt = 0.01;
  std::array<double, 2> reference{0.0, 0.0};
  // domain
  std::vector<double> omegas;
  Plane plane = Plane::Reference;
  int n_phi = 72;
  bool floor_trace = false;
  double floor_phi = 0.0;

  void validate() const;
  PipelineSettings pipeline() const { return {equilibrium, curve}; }
};

RunConfig parse_config(const std::string& ini_text);
RunConfig load_config(const std::string& path);

/// Fully resolved configuration in the same INI layout (round-trips through parse_config).
std::string to_ini(const RunConfig& cfg);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace stabdom
