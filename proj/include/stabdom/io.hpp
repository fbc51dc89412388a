#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stabdom/bifurcation.hpp"
#include "stabdom/cdpr.hpp"
#include "stabdom/codim2.hpp"
#include "stabdom/domainmap.hpp"
#include "stabdom/timedomain.hpp"

namespace stabdom::io {

/// Fixed 17-significant-digit formatting so identical runs give identical files.
std::string num(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  double value(std::size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Names of the unknowns of an equilibrium branch (state, active parameter).
std::vector<std::string> unknown_names(const EquilibriumProblem& problem);
std::vector<std::string> unknown_names(const Codim2Problem& problem);

std::string branch_csv(const EquilibriumProblem& problem, const Branch& branch);
std::string codim2_csv(const Codim2Problem& problem, const Branch& branch);
nlohmann::json events_json(const EquilibriumProblem& problem, const Branch& branch);
nlohmann::json codim2_events_json(const Codim2Problem& problem, const Branch& branch);

/// t, state..., roller torques, min_tension_flag.
std::string trajectory_csv(const cdpr::CdprConfig& cfg, const SystemDef& sys, const Trajectory& traj,
                           const Vec& params);

std::string polyline_csv(const Polyline& curve, const std::string& c1, const std::string& c2);
/// omega, phi, r, x, y; missing cells are skipped.
std::string surface_long_csv(const CylindricalGrid& grid);
/// First row: phi values; each following row: omega then r per phi ("NA" when missing).
std::string surface_matrix_csv(const CylindricalGrid& grid);

}  // namespace stabdom::io
