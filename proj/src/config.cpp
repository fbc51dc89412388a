#include "stabdom/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace pt = boost::property_tree;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& target) {
  const auto node = tree.get_child_optional(key);
  if (!node) return;
  try {
    target = node->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("cannot parse value of '" + key + "': '" + node->data() + "'");
  }
}

void read_settings(const pt::ptree& tree, const std::string& section, ContinuationSettings& s) {
  read(tree, section + ".max_points", s.max_points);
  read(tree, section + ".init_step", s.init_step);
  read(tree, section + ".max_step", s.max_step);
  read(tree, section + ".min_step", s.min_step);
  read(tree, section + ".newton_tol", s.newton_tol);
  read(tree, section + ".newton_max_iters", s.newton_max_iters);
  read(tree, section + ".test_tol", s.test_tol);
  read(tree, section + ".fd_step", s.fd_step);
  read(tree, section + ".detect_closure", s.detect_closure);
  read(tree, section + ".closure_min_steps", s.closure_min_steps);
}

void write_settings(std::ostream& os, const std::string& section, const ContinuationSettings& s) {
  os << "[" << section << "]\n"
     << "max_points = " << s.max_points << "\n"
     << "init_step = " << fmt(s.init_step) << "\n"
     << "max_step = " << fmt(s.max_step) << "\n"
     << "min_step = " << fmt(s.min_step) << "\n"
     << "newton_tol = " << fmt(s.newton_tol) << "\n"
     << "newton_max_iters = " << s.newton_max_iters << "\n"
     << "test_tol = " << fmt(s.test_tol) << "\n"
     << "fd_step = " << fmt(s.fd_step) << "\n"
     << "detect_closure = " << (s.detect_closure ? "true" : "false") << "\n"
     << "closure_min_steps = " << s.closure_min_steps << "\n\n";
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    const std::string tok = item.substr(b, e - b + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError("not a number in list: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

void RunConfig::validate() const {
  model.validate();
  equilibrium.validate();
  curve.validate();
  integrator.validate();
  if (active != "x_r" && active != "y_r") throw ConfigError("run.active must be x_r or y_r");
  if (direction != 1 && direction != -1) throw ConfigError("run.direction must be +1 or -1");
  if (!(t_end > 0.0)) throw ConfigError("run.t_end must be > 0");
  if (!(sample_dt > 0.0)) throw ConfigError("run.sample_dt must be > 0");
  if (n_phi < 1) throw ConfigError("run.n_phi must be >= 1");
  for (double w : omegas) {
    if (!(w > 0.0)) throw ConfigError("every omega in run.omegas must be > 0");
  }
}

RunConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream is(ini_text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message());
  }
  RunConfig c;

  read(tree, "model.mass", c.model.mass);
  read(tree, "model.roller_inertia", c.model.roller_inertia);
  read(tree, "model.roller_radius", c.model.roller_radius);
  read(tree, "model.friction", c.model.friction);
  read(tree, "model.mean_torque", c.model.mean_torque);
  read(tree, "model.fd_step", c.model.fd_step);
  for (int k = 0; k < 3; ++k) {
    std::string text;
    read(tree, "model.winder" + std::to_string(k + 1), text);
    if (text.empty()) continue;
    const auto xy = parse_double_list(text);
    if (xy.size() != 2) throw ConfigError("model.winder" + std::to_string(k + 1) + " needs 'x, y'");
    c.model.winders[static_cast<std::size_t>(k)] = cdpr::Vec2(xy[0], xy[1]);
  }

  std::string type;
  read(tree, "controller.type", type);
  if (!type.empty()) c.model.controller = cdpr::controller_from_string(type);
  read(tree, "controller.damping", c.model.damping);
  read(tree, "controller.omega0", c.model.omega0);

  read_settings(tree, "continuation", c.equilibrium);
  read_settings(tree, "curve", c.curve);

  read(tree, "run.active", c.active);
  read(tree, "run.direction", c.direction);
  std::string seed;
  read(tree, "run.seed_reference", seed);
  if (!seed.empty()) {
    const auto v = parse_double_list(seed);
    if (v.size() != 2) throw ConfigError("run.seed_reference needs 'x_r, y_r'");
    c.seed_reference = std::array<double, 2>{v[0], v[1]};
  }
  read(tree, "run.t_end", c.t_end);
  read(tree, "run.sample_dt", c.sample_dt);
  read(tree, "run.rtol", c.integrator.rtol);
  read(tree, "run.atol", c.integrator.atol);
  read(tree, "run.max_dt", c.integrator.max_step);
  std::string ref;
  read(tree, "run.reference", ref);
  if (!ref.empty()) {
    const auto v = parse_double_list(ref);
    if (v.size() != 2) throw ConfigError("run.reference needs 'x_r, y_r'");
    c.reference = {v[0], v[1]};
  }
  if (const auto node = tree.get_child_optional("run.omegas")) {
    c.omegas = parse_double_list(node->data());
    if (c.omegas.empty()) throw ConfigError("run.omegas is empty");
  }
  std::string plane;
  read(tree, "run.plane", plane);
  if (!plane.empty()) c.plane = plane_from_string(plane);
  read(tree, "run.n_phi", c.n_phi);
  read(tree, "run.floor_trace", c.floor_trace);
  read(tree, "run.floor_phi", c.floor_phi);

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "mass = " << fmt(c.model.mass) << "\n"
     << "roller_inertia = " << fmt(c.model.roller_inertia) << "\n"
     << "roller_radius = " << fmt(c.model.roller_radius) << "\n"
     << "friction = " << fmt(c.model.friction) << "\n"
     << "mean_torque = " << fmt(c.model.mean_torque) << "\n"
     << "fd_step = " << fmt(c.model.fd_step) << "\n";
  for (int k = 0; k < 3; ++k) {
    const auto& w = c.model.winders[static_cast<std::size_t>(k)];
    os << "winder" << k + 1 << " = " << fmt(w[0]) << ", " << fmt(w[1]) << "\n";
  }
  os << "\n[controller]\n"
     << "type = " << cdpr::to_string(c.model.controller) << "\n"
     << "damping = " << fmt(c.model.damping) << "\n"
     << "omega0 = " << fmt(c.model.omega0) << "\n\n";
  write_settings(os, "continuation", c.equilibrium);
  write_settings(os, "curve", c.curve);
  os << "[run]\n"
     << "active = " << c.active << "\n"
     << "direction = " << c.direction << "\n";
  if (c.seed_reference) {
    os << "seed_reference = " << fmt((*c.seed_reference)[0]) << ", " << fmt((*c.seed_reference)[1])
       << "\n";
  }
  os << "t_end = " << fmt(c.t_end) << "\n"
     << "sample_dt = " << fmt(c.sample_dt) << "\n"
     << "rtol = " << fmt(c.integrator.rtol) << "\n"
     << "atol = " << fmt(c.integrator.atol) << "\n"
     << "max_dt = " << fmt(c.integrator.max_step) << "\n"
     << "reference = " << fmt(c.reference[0]) << ", " << fmt(c.reference[1]) << "\n";
  if (!c.omegas.empty()) os << "omegas = " << join(c.omegas) << "\n";
  os << "plane = " << to_string(c.plane) << "\n"
     << "n_phi = " << c.n_phi << "\n"
     << "floor_trace = " << (c.floor_trace ? "true" : "false") << "\n"
     << "floor_phi = " << fmt(c.floor_phi) << "\n";
  return os.str();
}

}  // namespace stabdom
