// Batch front end: one config file per experiment, one output directory per run.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stabdom/bifurcation.hpp"
#include "stabdom/cdpr.hpp"
#include "stabdom/codim2.hpp"
#include "stabdom/config.hpp"
#include "stabdom/domainmap.hpp"
#include "stabdom/errors.hpp"
#include "stabdom/io.hpp"
#include "stabdom/timedomain.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stabdom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

struct Options {
  std::string config;
  std::string out = "run";
  std::string omega;
  std::string plane;
  std::string events;
  int event_index = -1;
  bool check = false;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
  if (!o.omega.empty()) {
    cfg.omegas = parse_double_list(o.omega);
    if (cfg.omegas.empty()) throw ConfigError("--omega list is empty");
    cfg.model.omega0 = cfg.omegas.front();
  }
  if (!o.plane.empty()) cfg.plane = plane_from_string(o.plane);
  cfg.validate();
  return cfg;
}

int active_index(const RunConfig& cfg) { return cfg.active == "y_r" ? 1 : 0; }

json manifest_base(const std::string& command, const RunConfig& cfg) {
  json m;
  m["tool"] = "stabdom";
  m["command"] = command;
  m["config"] = to_ini(cfg);
  m["files"] = json::array();
  return m;
}

void write_manifest(const fs::path& dir, const json& m) {
  io::write_text((dir / "manifest.json").string(), m.dump(2) + "\n");
}

std::string omega_tag(double w) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << w;
  std::string s = os.str();
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string summary_text(const EquilibriumProblem& pr, const Branch& b) {
  std::ostringstream os;
  const std::string pname = pr.sys.param_names[static_cast<std::size_t>(pr.active)];
  os << "branch: " << b.points.size() << " points, termination " << to_string(b.termination);
  if (!b.termination_detail.empty()) os << " (" << b.termination_detail << ")";
  os << "\n";
  try {
    const StableSegment seg = stable_segment(b, pr.n(), 1e-5);
    os << "stable interval: " << pname << " in [" << io::num(seg.start) << ", " << io::num(seg.end)
       << "]";
    if (seg.ended_by_event) os << " ended by " << to_string(seg.end_label);
    os << "\n";
    if (!seg.consistency_warning.empty()) os << "warning: " << seg.consistency_warning << "\n";
  } catch (const PreconditionViolation& e) {
    os << "stable interval: none (" << e.what() << ")\n";
  }
  os << "events:\n";
  os << "  label  " << pname << "  x  y  omega_H\n";
  for (const auto& ev : b.events) {
    os << "  " << to_string(ev.label) << "  " << io::num(ev.point.x[pr.n()]) << "  "
       << io::num(ev.point.x[0]) << "  " << io::num(ev.point.x[1]);
    if (ev.label == PointLabel::H) os << "  " << io::num(ev.omega_h);
    if (ev.degenerate) os << "  (degenerate)";
    os << "\n";
  }
  for (const auto& w : b.warnings) os << "note: " << w << "\n";
  return os.str();
}

// Equilibrium state at `target` reached by stepping the reference from the origin.
Vec equilibrium_at(const EquilibriumProblem& base, const std::array<double, 2>& target,
                   const ContinuationSettings& settings) {
  EquilibriumProblem pr = base;
  Vec state = Vec::Zero(pr.n());
  constexpr int kSteps = 200;
  for (int i = 1; i <= kSteps; ++i) {
    const double s = static_cast<double>(i) / kSteps;
    pr.base_params[0] = s * target[0];
    pr.base_params[1] = s * target[1];
    const ExtendedSystem f = pr.extended(settings.fd_step);
    const Vec x0 = pr.pack(state, pr.base_params[pr.active]);
    Vec fixed = Vec::Zero(x0.size());
    fixed[pr.n()] = 1.0;
    try {
      state = newton_correct(f, x0, fixed, settings).head(pr.n());
    } catch (const Error& e) {
      throw InitFailure(std::string("no equilibrium connected to the origin at the seed: ") +
                        e.what());
    }
  }
  return state;
}

int cmd_equilibrium(const Options& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const EquilibriumProblem pr =
      cdpr_equilibrium_problem(cfg.model, cfg.model.omega0, active_index(cfg));
  const Branch b = trace_equilibria(pr, Vec::Zero(pr.n()), cfg.direction, cfg.equilibrium);

  io::write_text((dir / "branch.csv").string(), io::branch_csv(pr, b));
  io::write_text((dir / "events.json").string(), io::events_json(pr, b).dump(2) + "\n");
  const std::string summary = summary_text(pr, b);
  io::write_text((dir / "summary.txt").string(), summary);
  std::cout << summary;

  json m = manifest_base("equilibrium", cfg);
  m["files"].push_back({{"path", "branch.csv"},
                        {"kind", "equilibrium_branch"},
                        {"omega", cfg.model.omega0},
                        {"active", cfg.active}});
  m["files"].push_back({{"path", "events.json"}, {"kind", "events"}});
  m["files"].push_back({{"path", "summary.txt"}, {"kind", "summary"}});
  write_manifest(dir, m);
  return kExitOk;
}

int cmd_codim2(const Options& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const double omega = cfg.model.omega0;
  const EquilibriumProblem eq = cdpr_equilibrium_problem(cfg.model, omega, 0);

  Codim2Problem pr;
  pr.sys = eq.sys;
  pr.base_params = eq.base_params;
  pr.active = {0, 1};
  pr.kind = cfg.model.controller == cdpr::Controller::PID ? CurveKind::Hopf : CurveKind::Fold;
  pr.fd_step = cfg.model.fd_step;

  Vec state;
  Vec params = eq.base_params;
  std::string seed_desc;
  if (!o.events.empty()) {
    std::ifstream in(o.events);
    if (!in) throw ConfigError("cannot open events file '" + o.events + "'");
    const json ev = json::parse(in);
    const auto& list = ev.at("events");
    const std::string want = pr.kind == CurveKind::Hopf ? "H" : "LP";
    const json* pick = nullptr;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (o.event_index >= 0 ? static_cast<int>(i) == o.event_index
                             : list[i].at("label") == want) {
        pick = &list[i];
        break;
      }
    }
    if (!pick) throw InitFailure("no suitable seed event in '" + o.events + "'");
    const auto& sv = pick->at("state");
    state = Vec(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t i = 0; i < sv.size(); ++i) state[static_cast<Eigen::Index>(i)] = sv[i].get<double>();
    params[0] = pick->at("parameters").at("x_r").get<double>();
    params[1] = pick->at("parameters").at("y_r").get<double>();
    if (pick->at("label") != want) {
      std::cerr << "seed event " << pick->dump() << "\n";
      throw InitFailure("seed event is labelled " + pick->at("label").get<std::string>() +
                        ", a " + want + " point is required");
    }
    seed_desc = pick->dump();
  } else {
    if (!cfg.seed_reference) throw ConfigError("codim2 needs --events or run.seed_reference");
    state = equilibrium_at(eq, *cfg.seed_reference, cfg.equilibrium);
    params[0] = (*cfg.seed_reference)[0];
    params[1] = (*cfg.seed_reference)[1];
    seed_desc = "reference (" + io::num(params[0]) + ", " + io::num(params[1]) + ")";
  }

  Vec x0;
  try {
    x0 = pr.kind == CurveKind::Hopf ? init_hopf_curve(pr, state, params, cfg.curve)
                                    : init_fold_curve(pr, state, params, cfg.curve);
  } catch (const InitFailure&) {
    std::cerr << "seed: " << seed_desc << "\n";
    throw;
  }
  const Branch curve = continue_codim2(pr, x0, {0.0, 1.0}, cfg.curve);
  io::write_text((dir / "curve.csv").string(), io::codim2_csv(pr, curve));
  io::write_text((dir / "curve_events.json").string(),
                 io::codim2_events_json(pr, curve).dump(2) + "\n");

  std::cout << to_string(pr.kind) << " curve: " << curve.points.size() << " points, "
            << to_string(curve.termination) << "\n";
  for (const auto& ev : curve.events) {
    std::cout << "  " << to_string(ev.label) << " at (" << io::num(ev.point.x[pr.param_coord(0)])
              << ", " << io::num(ev.point.x[pr.param_coord(1)]) << ")\n";
  }
  json m = manifest_base("codim2", cfg);
  m["seed"] = seed_desc;
  m["files"].push_back({{"path", "curve.csv"},
                        {"kind", "codim2_curve"},
                        {"curve", to_string(pr.kind)},
                        {"omega", omega},
                        {"closed", curve.termination == Termination::Closed}});
  m["files"].push_back({{"path", "curve_events.json"}, {"kind", "events"}});
  write_manifest(dir, m);
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const SystemDef sys = cdpr::closed_loop_system(cfg.model);
  Vec params(3);
  params << cfg.reference[0], cfg.reference[1], cfg.model.omega0;
  const cdpr::CdprConfig model = cfg.model;
  const HaltCheck capture = [model](double, const Vec& x) {
    return cdpr::nearest_winder_distance(model, x.head<2>()) <= 1e-6;
  };
  const Trajectory traj = simulate(sys, Vec::Zero(sys.dim_state), params, cfg.t_end, cfg.integrator,
                                   uniform_samples(cfg.t_end, cfg.sample_dt), capture);
  Vec ref(2);
  ref << cfg.reference[0], cfg.reference[1];
  const StepMetrics met = step_response_metrics(traj, ref);

  io::write_text((dir / "trajectory.csv").string(), io::trajectory_csv(cfg.model, sys, traj, params));
  json mj;
  mj["halt"] = to_string(traj.halt);
  mj["halt_time"] = traj.halt_time;
  mj["settled"] = met.settled;
  mj["static_error"] = std::isfinite(met.static_error) ? json(met.static_error) : json(nullptr);
  mj["overshoot"] = met.overshoot;
  const double q = cfg.t_end / 4.0;
  mj["peak_to_peak_last_quarter"] = {peak_to_peak(traj, 0, 3 * q, cfg.t_end),
                                     peak_to_peak(traj, 1, 3 * q, cfg.t_end)};
  mj["peak_to_peak_third_quarter"] = {peak_to_peak(traj, 0, 2 * q, 3 * q),
                                      peak_to_peak(traj, 1, 2 * q, 3 * q)};
  io::write_text((dir / "metrics.json").string(), mj.dump(2) + "\n");
  std::cout << mj.dump(2) << "\n";

  json m = manifest_base("simulate", cfg);
  m["files"].push_back({{"path", "trajectory.csv"}, {"kind", "trajectory"}});
  m["files"].push_back({{"path", "metrics.json"}, {"kind", "metrics"}});
  write_manifest(dir, m);
  return kExitOk;
}

int cmd_domain(const Options& o) {
  const RunConfig cfg = resolve(o);
  if (cfg.omegas.empty()) throw ConfigError("run.omegas (or --omega) must list at least one value");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const DomainSurface surf = sweep(cfg.model, cfg.omegas, cfg.plane, cfg.pipeline());
  const CylindricalGrid grid = to_cylindrical_grid(surf, cfg.n_phi);

  json m = manifest_base("domain", cfg);
  m["plane"] = to_string(cfg.plane);
  m["curves"] = json::array();
  const std::string c1 = cfg.plane == Plane::Reference ? "x_r" : "x";
  const std::string c2 = cfg.plane == Plane::Reference ? "y_r" : "y";
  for (const auto& rec : surf.curves) {
    json e;
    e["omega"] = rec.omega;
    e["status"] = to_string(rec.status);
    e["detail"] = rec.detail;
    json flags = json::array();
    for (auto f : rec.flags) flags.push_back(to_string(f));
    if (rec.status == CurveStatus::NoBoundary) flags.push_back("NoBoundary");
    e["flags"] = flags;
    if (!rec.points.empty()) {
      const std::string name = "curve_omega_" + omega_tag(rec.omega) + ".csv";
      io::write_text((dir / name).string(), io::polyline_csv(rec.points, c1, c2));
      const AreaResult a = compute_area(rec.points);
      e["file"] = name;
      e["area"] = a.signed_area;
      e["self_intersecting"] = a.self_intersecting;
      m["files"].push_back({{"path", name}, {"kind", "isoline"}, {"omega", rec.omega}});
    }
    m["curves"].push_back(e);
    std::cout << "omega " << io::num(rec.omega) << ": " << to_string(rec.status) << "\n";
  }
  io::write_text((dir / "surface_long.csv").string(), io::surface_long_csv(grid));
  io::write_text((dir / "surface_matrix.csv").string(), io::surface_matrix_csv(grid));
  m["files"].push_back({{"path", "surface_long.csv"}, {"kind", "surface_long"}});
  m["files"].push_back({{"path", "surface_matrix.csv"}, {"kind", "surface_matrix"}});
  m["grid_warnings"] = grid.warnings;

  if (cfg.floor_trace) {
    FloorSettings fsettings;
    fsettings.pipeline = cfg.pipeline();
    fsettings.seed_omega = cfg.model.omega0;
    const FloorTrace ft = omega_floor_trace(cfg.model, cfg.floor_phi, fsettings);
    io::write_text((dir / "floor.csv").string(), io::polyline_csv(ft.r_omega, "r", "omega"));
    m["files"].push_back({{"path", "floor.csv"}, {"kind", "floor_trace"}});
    m["floor"] = {{"phi", cfg.floor_phi},
                  {"reached_floor", ft.reached_floor},
                  {"r_min", ft.r_min},
                  {"flag", ft.flagged ? to_string(ft.flag) : "none"},
                  {"detail", ft.detail}};
    std::cout << "floor trace: " << (ft.flagged ? to_string(ft.flag) : "no flag") << ", "
              << ft.detail << "\n";
  }
  write_manifest(dir, m);
  return kExitOk;
}

// Re-evaluates every branch row of the run directory against the model.
int cmd_check(const Options& o) {
  const fs::path dir(o.out);
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in '" + dir.string() + "'");
  const json m = json::parse(in);
  const RunConfig cfg = parse_config(m.at("config").get<std::string>());
  const double tol = cfg.equilibrium.newton_tol;
  int checked = 0;
  double worst = 0.0;
  for (const auto& f : m.at("files")) {
    const std::string kind = f.at("kind");
    if (kind != "equilibrium_branch" && kind != "codim2_curve") continue;
    const io::CsvTable t = io::read_csv((dir / f.at("path").get<std::string>()).string());
    const double omega = f.at("omega").get<double>();
    std::function<double(const Vec&)> residual;
    std::vector<std::string> names;
    if (kind == "equilibrium_branch") {
      const int active = f.at("active") == "y_r" ? 1 : 0;
      const EquilibriumProblem pr = cdpr_equilibrium_problem(cfg.model, omega, active);
      names = io::unknown_names(pr);
      const ExtendedSystem ext = pr.extended();
      residual = [ext](const Vec& x) { return ext.residual(x).cwiseAbs().maxCoeff(); };
    } else {
      const EquilibriumProblem eq = cdpr_equilibrium_problem(cfg.model, omega, 0);
      Codim2Problem pr;
      pr.sys = eq.sys;
      pr.base_params = eq.base_params;
      pr.active = {0, 1};
      pr.kind = f.at("curve") == "hopf" ? CurveKind::Hopf : CurveKind::Fold;
      pr.fd_step = cfg.model.fd_step;
      names = io::unknown_names(pr);
      residual = [pr](const Vec& x) { return codim2_residual(pr, x); };
    }
    std::vector<int> cols;
    for (const auto& n : names) {
      const int c = t.column(n);
      if (c < 0) throw Error("column '" + n + "' missing from " + f.at("path").get<std::string>());
      cols.push_back(c);
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      Vec x(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) x[static_cast<Eigen::Index>(k)] = t.value(r, cols[k]);
      const double res = residual(x);
      worst = std::max(worst, res);
      ++checked;
      if (!(res <= tol)) {
        std::cerr << f.at("path").get<std::string>() << " row " << r << ": residual " << res
                  << " exceeds newton_tol " << tol << "\n";
        return kExitSolver;
      }
    }
  }
  std::cout << "checked " << checked << " points, worst residual " << io::num(worst) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability domains of equilibria by numerical continuation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI configuration file");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--omega", o.omega, "omega0 value(s), comma separated");
    sub->add_option("--plane", o.plane, "reference | state");
    sub->add_flag("--check", o.check, "re-validate residuals of the written branch files");
  };
  auto* eq = app.add_subcommand("equilibrium", "one-parameter equilibrium branch with events");
  auto* c2 = app.add_subcommand("codim2", "fold or Hopf curve from a seed event");
  auto* sim = app.add_subcommand("simulate", "step response of the closed loop");
  auto* dom = app.add_subcommand("domain", "sweep of stability boundaries over omega0");
  auto* chk = app.add_subcommand("check", "re-validate a run directory");
  for (auto* s : {eq, c2, sim, dom}) add_common(s);
  c2->add_option("--events", o.events, "events.json written by the equilibrium command");
  c2->add_option("--event-index", o.event_index, "index of the seed inside the events file");
  chk->add_option("--out,dir", o.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    int rc = kExitOk;
    if (*eq) rc = cmd_equilibrium(o);
    if (*c2) rc = cmd_codim2(o);
    if (*sim) rc = cmd_simulate(o);
    if (*dom) rc = cmd_domain(o);
    if (*chk) return cmd_check(o);
    if (rc == kExitOk && o.check) rc = cmd_check(o);
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
