#include "stabdom/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stabdom/errors.hpp"

namespace stabdom::io {

using nlohmann::json;

namespace {

json to_json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json tests_json(const BranchPoint& p) {
  json t = json::object();
  for (const auto& [k, v] : p.tests) t[k] = to_json_number(v);
  return t;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json_number(v[i]));
  return a;
}

std::string test_or_empty(const BranchPoint& p, const std::string& key) {
  const auto it = p.tests.find(key);
  return it == p.tests.end() ? std::string("nan") : num(it->second);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(line);
  while (std::getline(is, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json branch_meta(const Branch& b) {
  json j;
  j["termination"] = to_string(b.termination);
  j["termination_detail"] = b.termination_detail;
  j["warnings"] = b.warnings;
  j["points"] = b.points.size();
  return j;
}

}  // namespace

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double CsvTable::value(std::size_t row, int col) const {
  const std::string& s = rows.at(row).at(static_cast<std::size_t>(col));
  if (s == "NA" || s == "nan") return std::nan("");
  return std::stod(s);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV file '" + path + "'");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) throw Error("ragged CSV row in '" + path + "'");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> unknown_names(const EquilibriumProblem& problem) {
  std::vector<std::string> n = problem.sys.state_names;
  n.push_back(problem.sys.param_names[static_cast<std::size_t>(problem.active)]);
  return n;
}

std::vector<std::string> unknown_names(const Codim2Problem& problem) {
  std::vector<std::string> n = problem.sys.state_names;
  const int dim = problem.n();
  if (problem.kind == CurveKind::Fold) {
    for (int i = 0; i < dim; ++i) n.push_back("zeta" + std::to_string(i));
  } else {
    for (int i = 0; i < dim; ++i) n.push_back("u" + std::to_string(i));
    for (int i = 0; i < dim; ++i) n.push_back("v" + std::to_string(i));
    n.push_back("omega_h");
  }
  n.push_back(problem.sys.param_names[static_cast<std::size_t>(problem.active[0])]);
  n.push_back(problem.sys.param_names[static_cast<std::size_t>(problem.active[1])]);
  return n;
}

std::string branch_csv(const EquilibriumProblem& problem, const Branch& branch) {
  std::ostringstream os;
  os << "index,arclength";
  for (const auto& name : unknown_names(problem)) os << "," << name;
  os << ",stability,max_real,label,bp_det,lp_tangent,hopf_re,residual\n";
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    const BranchPoint& p = branch.points[i];
    os << i << "," << num(p.arclength);
    for (Eigen::Index k = 0; k < p.x.size(); ++k) os << "," << num(p.x[k]);
    os << "," << to_string(p.spectrum.stability) << "," << num(p.spectrum.max_real) << ","
       << to_string(p.label) << "," << test_or_empty(p, kTestBp) << ","
       << test_or_empty(p, kTestLp) << "," << test_or_empty(p, kTestHopf) << ","
       << num(p.residual) << "\n";
  }
  return os.str();
}

std::string codim2_csv(const Codim2Problem& problem, const Branch& branch) {
  std::ostringstream os;
  os << "index,arclength";
  for (const auto& name : unknown_names(problem)) os << "," << name;
  const bool hopf = problem.kind == CurveKind::Hopf;
  os << (hopf ? ",hopf_omega" : ",sigma_min") << ",hh,cp,label,residual\n";
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    const BranchPoint& p = branch.points[i];
    os << i << "," << num(p.arclength);
    for (Eigen::Index k = 0; k < p.x.size(); ++k) os << "," << num(p.x[k]);
    os << "," << (hopf ? num(p.x[problem.omega_coord()]) : test_or_empty(p, kTestSigmaMin));
    os << "," << (p.label == PointLabel::HH ? 1 : 0) << "," << (p.label == PointLabel::CP ? 1 : 0)
       << "," << to_string(p.label) << "," << num(p.residual) << "\n";
  }
  return os.str();
}

json events_json(const EquilibriumProblem& problem, const Branch& branch) {
  json j = branch_meta(branch);
  j["events"] = json::array();
  for (const auto& ev : branch.events) {
    json e;
    e["label"] = to_string(ev.label);
    e["arc_index"] = ev.arc_index;
    const Vec params = problem.params_at(ev.point.x);
    json pj = json::object();
    for (int k = 0; k < problem.sys.dim_params; ++k) {
      pj[problem.sys.param_names[static_cast<std::size_t>(k)]] = params[k];
    }
    e["parameters"] = pj;
    e["state"] = vec_json(ev.point.x.head(problem.n()));
    if (ev.label == PointLabel::H) e["omega_H"] = ev.omega_h;
    e["test_values"] = tests_json(ev.point);
    e["degenerate"] = ev.degenerate;
    if (!ev.note.empty()) e["note"] = ev.note;
    j["events"].push_back(e);
  }
  return j;
}

json codim2_events_json(const Codim2Problem& problem, const Branch& branch) {
  json j = branch_meta(branch);
  j["kind"] = to_string(problem.kind);
  j["events"] = json::array();
  for (const auto& ev : branch.events) {
    json e;
    e["label"] = to_string(ev.label);
    e["arc_index"] = ev.arc_index;
    const Vec params = problem.params_at(ev.point.x);
    json pj = json::object();
    for (int k = 0; k < problem.sys.dim_params; ++k) {
      pj[problem.sys.param_names[static_cast<std::size_t>(k)]] = params[k];
    }
    e["parameters"] = pj;
    e["state"] = vec_json(ev.point.x.head(problem.n()));
    if (problem.kind == CurveKind::Hopf) e["omega_H"] = ev.point.x[problem.omega_coord()];
    e["test_values"] = tests_json(ev.point);
    if (!ev.note.empty()) e["note"] = ev.note;
    j["events"].push_back(e);
  }
  return j;
}

std::string trajectory_csv(const cdpr::CdprConfig& cfg, const SystemDef& sys, const Trajectory& traj,
                           const Vec& params) {
  std::ostringstream os;
  os << "t";
  for (const auto& n : sys.state_names) os << "," << n;
  os << ",torque1,torque2,torque3,min_tension_flag\n";
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const Vec& x = traj.states[i];
    os << num(traj.t[i]);
    for (Eigen::Index k = 0; k < x.size(); ++k) os << "," << num(x[k]);
    cdpr::TensionReport tr;
    try {
      tr = cdpr::cable_tensions(cfg, x, params);
    } catch (const Error&) {
      tr.torque.setConstant(std::nan(""));
    }
    os << "," << num(tr.torque[0]) << "," << num(tr.torque[1]) << "," << num(tr.torque[2]) << ","
       << (tr.any_negative ? 1 : 0) << "\n";
  }
  return os.str();
}

std::string polyline_csv(const Polyline& curve, const std::string& c1, const std::string& c2) {
  std::ostringstream os;
  os << "index," << c1 << "," << c2 << "\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    os << i << "," << num(curve[i][0]) << "," << num(curve[i][1]) << "\n";
  }
  return os.str();
}

std::string surface_long_csv(const CylindricalGrid& grid) {
  std::ostringstream os;
  os << "omega,phi,r,x,y\n";
  for (std::size_t i = 0; i < grid.omega.size(); ++i) {
    for (std::size_t j = 0; j < grid.phi.size(); ++j) {
      const double r = grid.radius(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!std::isfinite(r)) continue;
      os << num(grid.omega[i]) << "," << num(grid.phi[j]) << "," << num(r) << ","
         << num(r * std::cos(grid.phi[j])) << "," << num(r * std::sin(grid.phi[j])) << "\n";
    }
  }
  return os.str();
}

std::string surface_matrix_csv(const CylindricalGrid& grid) {
  std::ostringstream os;
  os << "omega";
  for (double p : grid.phi) os << "," << num(p);
  os << "\n";
  for (std::size_t i = 0; i < grid.omega.size(); ++i) {
    os << num(grid.omega[i]);
    for (std::size_t j = 0; j < grid.phi.size(); ++j) {
      const double r = grid.radius(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      os << "," << (std::isfinite(r) ? num(r) : std::string("NA"));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace stabdom::io
