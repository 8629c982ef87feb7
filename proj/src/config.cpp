#include "tapertrap/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "tapertrap/constants.hpp"

namespace tapertrap::config {

using constants::two_pi;

namespace {

enum class Kind {
  angle,        // deg, rad, mrad -> rad
  length,       // m, mm, um, nm -> m
  voltage,      // V, kV, mV -> V
  frequency,    // Hz, kHz, MHz, GHz -> rad/s (angular)
  mass,         // u, kg -> kg
  charge,       // e, C -> C
  time,         // s, ms, us, ns -> s
  force,        // N .. zN -> N
  drag,         // kg/s
  rate,         // 1/s
  momentum,     // kg*m/s
  efield,       // V/m
  bfield,       // T, mT, uT, G -> T
  inv_length,   // 1/m
  inv_area,     // 1/m^2
  velocity,     // m/s, mm/s
  dimensionless,  // plain number, '%' allowed
  integer,
  boolean,      // true | false
  text,
};

struct UnitDef {
  const char* token;
  double factor;
};

const std::vector<UnitDef>& units_for(Kind kind) {
  static const std::vector<UnitDef> angle{{"deg", constants::pi / 180.0},
                                          {"rad", 1.0},
                                          {"mrad", 1e-3}};
  static const std::vector<UnitDef> length{
      {"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"µm", 1e-6}, {"nm", 1e-9}};
  static const std::vector<UnitDef> voltage{{"V", 1.0}, {"kV", 1e3}, {"mV", 1e-3}};
  static const std::vector<UnitDef> frequency{{"Hz", two_pi},
                                              {"kHz", two_pi * 1e3},
                                              {"MHz", two_pi * 1e6},
                                              {"GHz", two_pi * 1e9}};
  static const std::vector<UnitDef> mass{
      {"u", constants::atomic_mass_unit}, {"amu", constants::atomic_mass_unit},
      {"kg", 1.0}};
  static const std::vector<UnitDef> charge{{"e", constants::elementary_charge},
                                           {"C", 1.0}};
  static const std::vector<UnitDef> time_u{
      {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"µs", 1e-6}, {"ns", 1e-9}};
  static const std::vector<UnitDef> force{{"N", 1.0},   {"mN", 1e-3},
                                          {"uN", 1e-6}, {"nN", 1e-9},
                                          {"pN", 1e-12}, {"fN", 1e-15},
                                          {"aN", 1e-18}, {"zN", 1e-21}};
  static const std::vector<UnitDef> drag{{"kg/s", 1.0}};
  static const std::vector<UnitDef> rate{{"1/s", 1.0}, {"kHz", 1e3}, {"Hz", 1.0}};
  static const std::vector<UnitDef> momentum{{"kg*m/s", 1.0}};
  static const std::vector<UnitDef> efield{{"V/m", 1.0}, {"V/mm", 1e3}};
  static const std::vector<UnitDef> bfield{
      {"T", 1.0}, {"mT", 1e-3}, {"uT", 1e-6}, {"G", 1e-4}};
  static const std::vector<UnitDef> inv_length{{"1/m", 1.0}, {"1/mm", 1e3}};
  static const std::vector<UnitDef> inv_area{{"1/m^2", 1.0}, {"1/mm^2", 1e6}};
  static const std::vector<UnitDef> velocity{{"m/s", 1.0}, {"mm/s", 1e-3}};
  static const std::vector<UnitDef> none{};
  switch (kind) {
    case Kind::angle: return angle;
    case Kind::length: return length;
    case Kind::voltage: return voltage;
    case Kind::frequency: return frequency;
    case Kind::mass: return mass;
    case Kind::charge: return charge;
    case Kind::time: return time_u;
    case Kind::force: return force;
    case Kind::drag: return drag;
    case Kind::rate: return rate;
    case Kind::momentum: return momentum;
    case Kind::efield: return efield;
    case Kind::bfield: return bfield;
    case Kind::inv_length: return inv_length;
    case Kind::inv_area: return inv_area;
    case Kind::velocity: return velocity;
    default: return none;
  }
}

struct KeyDef {
  Kind kind;
  std::function<void(RunConfig&, double, const std::string&)> apply;
};

double parse_number(const std::string& tok, const std::string& key, int line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || p != end)
    throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                      "': malformed number '" + tok + "'");
  return v;
}

const std::map<std::string, KeyDef>& schema() {
  using CF = RunConfig;
  auto num = [](Kind k, void (*set)(CF&, double)) {
    return KeyDef{k, [set](CF& c, double v, const std::string&) { set(c, v); }};
  };
  static const std::map<std::string, KeyDef> s = {
      // ion
      {"ion.mass", num(Kind::mass, [](CF& c, double v) { c.ion.mass = v; })},
      {"ion.charge", num(Kind::charge, [](CF& c, double v) { c.ion.charge = v; })},
      {"ion.label",
       {Kind::text, [](CF& c, double, const std::string& s_) { c.ion.label = s_; }}},
      // trap geometry
      {"trap.taper_angle",
       num(Kind::angle, [](CF& c, double v) { c.geometry.taper_angle = v; })},
      {"trap.r0", num(Kind::length, [](CF& c, double v) { c.geometry.r0 = v; })},
      {"trap.blade_length",
       num(Kind::length, [](CF& c, double v) { c.geometry.blade_length = v; })},
      {"trap.endcap_gap",
       num(Kind::length, [](CF& c, double v) { c.geometry.endcap_gap = v; })},
      {"trap.endcap_hole_diam",
       num(Kind::length, [](CF& c, double v) { c.geometry.endcap_hole_diam = v; })},
      {"trap.comp_diag_distance",
       num(Kind::length,
           [](CF& c, double v) { c.geometry.comp_diag_distance = v; })},
      {"trap.comp_diam",
       num(Kind::length, [](CF& c, double v) { c.geometry.comp_diam = v; })},
      // drive
      {"drive.omega_rf",
       num(Kind::frequency, [](CF& c, double v) { c.drive.omega_rf = v; })},
      {"drive.v_rf", num(Kind::voltage, [](CF& c, double v) {
         const double delta = c.drive.rf_delta();
         c.drive.v_rf1 = v * (1.0 - 0.5 * delta);
         c.drive.v_rf2 = v * (1.0 + 0.5 * delta);
       })},
      {"drive.delta", num(Kind::dimensionless, [](CF& c, double v) {
         const double mean = c.drive.v_rf_mean();
         c.drive.v_rf1 = mean * (1.0 - 0.5 * v);
         c.drive.v_rf2 = mean * (1.0 + 0.5 * v);
       })},
      {"drive.v_rf1", num(Kind::voltage, [](CF& c, double v) { c.drive.v_rf1 = v; })},
      {"drive.v_rf2", num(Kind::voltage, [](CF& c, double v) { c.drive.v_rf2 = v; })},
      {"drive.phase_diff",
       num(Kind::angle, [](CF& c, double v) { c.drive.phase_diff = v; })},
      {"drive.v_d1", num(Kind::voltage, [](CF& c, double v) { c.drive.v_d1 = v; })},
      {"drive.v_d2", num(Kind::voltage, [](CF& c, double v) { c.drive.v_d2 = v; })},
      {"drive.v_c1", num(Kind::voltage, [](CF& c, double v) { c.drive.v_comp[0] = v; })},
      {"drive.v_c2", num(Kind::voltage, [](CF& c, double v) { c.drive.v_comp[1] = v; })},
      {"drive.v_c3", num(Kind::voltage, [](CF& c, double v) { c.drive.v_comp[2] = v; })},
      {"drive.v_c4", num(Kind::voltage, [](CF& c, double v) { c.drive.v_comp[3] = v; })},
      {"drive.kappa_axial",
       num(Kind::dimensionless, [](CF& c, double v) { c.drive.kappa_axial = v; })},
      {"drive.beta_dipole",
       num(Kind::inv_length,
           [](CF& c, double v) { c.drive.comp_coeffs.beta_dipole = v; })},
      {"drive.beta_quad_xy",
       num(Kind::inv_area,
           [](CF& c, double v) { c.drive.comp_coeffs.beta_quad_xy = v; })},
      // forces
      {"forces.drag", num(Kind::drag, [](CF& c, double v) {
         c.forces.drag_coefficient = v;
       })},
      {"forces.kick_rate",
       num(Kind::rate, [](CF& c, double v) { c.forces.kick_rate = v; })},
      {"forces.kick_momentum",
       num(Kind::momentum, [](CF& c, double v) { c.forces.kick_momentum = v; })},
      {"forces.mod_amp",
       num(Kind::force, [](CF& c, double v) { c.forces.mod_force_amp = v; })},
      {"forces.mod_freq",
       num(Kind::frequency, [](CF& c, double v) { c.forces.mod_freq = v; })},
      {"forces.mod_dir",
       {Kind::text, [](CF& c, double, const std::string& s_) {
          if (s_ == "x") c.forces.mod_direction = Eigen::Vector3d::UnitX();
          else if (s_ == "y") c.forces.mod_direction = Eigen::Vector3d::UnitY();
          else if (s_ == "z") c.forces.mod_direction = Eigen::Vector3d::UnitZ();
          else throw ConfigError("forces.mod_dir must be one of x, y, z");
        }}},
      // seed and backend
      {"seed", {Kind::integer, [](CF& c, double v, const std::string&) {
                  c.seed = static_cast<std::uint64_t>(v);
                  c.forces.rng_seed = c.seed;
                }}},
      {"field.backend",
       {Kind::text, [](CF& c, double, const std::string& s_) {
          if (s_ != "analytic" && s_ != "solved")
            throw ConfigError("field.backend must be 'analytic' or 'solved'");
          c.field_backend = s_;
        }}},
      {"field.basis_cache",
       {Kind::text,
        [](CF& c, double, const std::string& s_) { c.field_basis_cache = s_; }}},
      {"field.mesh",
       {Kind::text, [](CF& c, double, const std::string& s_) { c.field_mesh = s_; }}},
      // calibrate
      {"calibrate.target_radial",
       num(Kind::frequency, [](CF& c, double v) { c.calib_target_radial = v; })},
      {"calibrate.target_axial",
       num(Kind::frequency, [](CF& c, double v) { c.calib_target_axial = v; })},
      // simulate
      {"sim.duration", num(Kind::time, [](CF& c, double v) { c.sim_duration = v; })},
      {"sim.steps_per_rf_period",
       num(Kind::dimensionless, [](CF& c, double v) { c.sim_steps_per_rf = v; })},
      {"sim.sample_stride", {Kind::integer, [](CF& c, double v, const std::string&) {
                               c.sim_sample_stride = static_cast<int>(v);
                             }}},
      {"sim.x0", num(Kind::length, [](CF& c, double v) { c.sim_position.x() = v; })},
      {"sim.y0", num(Kind::length, [](CF& c, double v) { c.sim_position.y() = v; })},
      {"sim.z0", num(Kind::length, [](CF& c, double v) { c.sim_position.z() = v; })},
      {"sim.vx0", num(Kind::velocity, [](CF& c, double v) { c.sim_velocity.x() = v; })},
      {"sim.vy0", num(Kind::velocity, [](CF& c, double v) { c.sim_velocity.y() = v; })},
      {"sim.vz0", num(Kind::velocity, [](CF& c, double v) { c.sim_velocity.z() = v; })},
      // scan-axial
      {"scan.z_min", num(Kind::length, [](CF& c, double v) { c.scan_z_min = v; })},
      {"scan.z_max", num(Kind::length, [](CF& c, double v) { c.scan_z_max = v; })},
      {"scan.points", {Kind::integer, [](CF& c, double v, const std::string&) {
                         c.scan_points = static_cast<int>(v);
                       }}},
      {"scan.calibrate", {Kind::boolean, [](CF& c, double v, const std::string&) {
                            c.scan_calibrate = v != 0.0;
                          }}},
      {"scan.record_time",
       num(Kind::time, [](CF& c, double v) { c.scan_record_time = v; })},
      {"scan.offset", num(Kind::length, [](CF& c, double v) { c.scan_offset = v; })},
      // sweep
      {"sweep.f_min", num(Kind::frequency, [](CF& c, double v) { c.sweep_f_min = v; })},
      {"sweep.f_max", num(Kind::frequency, [](CF& c, double v) { c.sweep_f_max = v; })},
      {"sweep.points", {Kind::integer, [](CF& c, double v, const std::string&) {
                          c.sweep_points = static_cast<int>(v);
                        }}},
      {"sweep.direction",
       {Kind::text, [](CF& c, double, const std::string& s_) {
          if (s_ != "up" && s_ != "down")
            throw ConfigError("sweep.direction must be 'up' or 'down'");
          c.sweep_direction = s_;
        }}},
      {"sweep.settle_periods",
       num(Kind::dimensionless, [](CF& c, double v) { c.sweep_settle_periods = v; })},
      {"sweep.measure_periods",
       num(Kind::dimensionless, [](CF& c, double v) { c.sweep_measure_periods = v; })},
      // compensate
      {"comp.box13", num(Kind::voltage, [](CF& c, double v) { c.comp_box13 = v; })},
      {"comp.box24", num(Kind::voltage, [](CF& c, double v) { c.comp_box24 = v; })},
      {"comp.stray_ex", num(Kind::efield, [](CF& c, double v) { c.comp_stray.x() = v; })},
      {"comp.stray_ey", num(Kind::efield, [](CF& c, double v) { c.comp_stray.y() = v; })},
      {"comp.stray_ez", num(Kind::efield, [](CF& c, double v) { c.comp_stray.z() = v; })},
      // pseudo-map
      {"map.x_min", num(Kind::length, [](CF& c, double v) { c.map_x_min = v; })},
      {"map.x_max", num(Kind::length, [](CF& c, double v) { c.map_x_max = v; })},
      {"map.z_min", num(Kind::length, [](CF& c, double v) { c.map_z_min = v; })},
      {"map.z_max", num(Kind::length, [](CF& c, double v) { c.map_z_max = v; })},
      {"map.nx", {Kind::integer, [](CF& c, double v, const std::string&) {
                    c.map_nx = static_cast<int>(v);
                  }}},
      {"map.nz", {Kind::integer, [](CF& c, double v, const std::string&) {
                    c.map_nz = static_cast<int>(v);
                  }}},
      // sidebands
      {"sideband.b_field",
       num(Kind::bfield, [](CF& c, double v) { c.sideband_b_field = v; })},
      {"sideband.beam_angle",
       num(Kind::angle, [](CF& c, double v) { c.sideband_beam_angle = v; })},
      {"sideband.max_order",
       {Kind::integer, [](CF& c, double v, const std::string&) {
          c.sideband_max_order = static_cast<int>(v);
        }}},
      {"sideband.nu_x", {Kind::frequency, [](CF& c, double v, const std::string&) {
                           c.sideband_secular_hz[0] = v / two_pi;
                         }}},
      {"sideband.nu_y", {Kind::frequency, [](CF& c, double v, const std::string&) {
                           c.sideband_secular_hz[1] = v / two_pi;
                         }}},
      {"sideband.nu_z", {Kind::frequency, [](CF& c, double v, const std::string&) {
                           c.sideband_secular_hz[2] = v / two_pi;
                         }}},
  };
  return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  cfg.forces.rng_seed = cfg.seed;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<std::string, int> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip comments
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value [unit]'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key or value");

    const auto& defs = schema();
    const auto it = defs.find(key);
    if (it == defs.end())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    if (++seen[key] > 1)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");

    const KeyDef& def = it->second;
    if (def.kind == Kind::text) {
      def.apply(cfg, 0.0, value);
      continue;
    }

    std::istringstream vs(value);
    std::string num_tok, unit_tok, extra;
    vs >> num_tok;
    vs >> unit_tok;
    if (vs >> extra)
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        key + "': trailing token '" + extra + "'");

    if (def.kind == Kind::boolean) {
      if (num_tok == "true") def.apply(cfg, 1.0, "");
      else if (num_tok == "false") def.apply(cfg, 0.0, "");
      else
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                          key + "': expected true or false");
      if (!unit_tok.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                          key + "': unexpected token after boolean");
      continue;
    }

    const double v = parse_number(num_tok, key, line_no);

    if (def.kind == Kind::integer) {
      if (!unit_tok.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                          key + "': integer takes no unit");
      if (v != std::floor(v))
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                          key + "': expected an integer");
      def.apply(cfg, v, "");
      continue;
    }

    if (def.kind == Kind::dimensionless) {
      double scaled = v;
      if (unit_tok == "%") scaled = v * 1e-2;
      else if (!unit_tok.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                          key + "': unexpected unit '" + unit_tok +
                          "' on a dimensionless value (only '%' allowed)");
      def.apply(cfg, scaled, "");
      continue;
    }

    // dimensioned value: unit suffix is mandatory
    const auto& units = units_for(def.kind);
    if (unit_tok.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        key + "': missing unit suffix");
    const UnitDef* found = nullptr;
    for (const auto& u : units)
      if (unit_tok == u.token) {
        found = &u;
        break;
      }
    if (!found) {
      std::string allowed;
      for (const auto& u : units) {
        if (!allowed.empty()) allowed += ", ";
        allowed += u.token;
      }
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        key + "': bad unit '" + unit_tok + "' (allowed: " +
                        allowed + ")");
    }
    def.apply(cfg, v * found->factor, "");
  }

  cfg.geometry.validate();
  cfg.drive.validate();
  cfg.ion.validate();
  cfg.forces.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "# tapertrap run configuration\n";
  os << "ion.mass = " << cfg.ion.mass << " kg\n";
  os << "ion.charge = " << cfg.ion.charge << " C\n";
  os << "ion.label = " << cfg.ion.label << "\n";
  os << "trap.taper_angle = " << cfg.geometry.taper_angle << " rad\n";
  os << "trap.r0 = " << cfg.geometry.r0 << " m\n";
  os << "trap.blade_length = " << cfg.geometry.blade_length << " m\n";
  os << "trap.endcap_gap = " << cfg.geometry.endcap_gap << " m\n";
  os << "trap.endcap_hole_diam = " << cfg.geometry.endcap_hole_diam << " m\n";
  os << "trap.comp_diag_distance = " << cfg.geometry.comp_diag_distance << " m\n";
  os << "trap.comp_diam = " << cfg.geometry.comp_diam << " m\n";
  os << "drive.omega_rf = " << cfg.drive.omega_rf / two_pi << " Hz\n";
  os << "drive.v_rf1 = " << cfg.drive.v_rf1 << " V\n";
  os << "drive.v_rf2 = " << cfg.drive.v_rf2 << " V\n";
  os << "drive.phase_diff = " << cfg.drive.phase_diff << " rad\n";
  os << "drive.v_d1 = " << cfg.drive.v_d1 << " V\n";
  os << "drive.v_d2 = " << cfg.drive.v_d2 << " V\n";
  for (int i = 0; i < 4; ++i)
    os << "drive.v_c" << i + 1 << " = " << cfg.drive.v_comp[i] << " V\n";
  os << "drive.kappa_axial = " << cfg.drive.kappa_axial << "\n";
  os << "drive.beta_dipole = " << cfg.drive.comp_coeffs.beta_dipole << " 1/m\n";
  os << "drive.beta_quad_xy = " << cfg.drive.comp_coeffs.beta_quad_xy
     << " 1/m^2\n";
  os << "seed = " << cfg.seed << "\n";
  return os.str();
}

}  // namespace tapertrap::config
