#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapertrap/dynamics.hpp"
#include "tapertrap/trapmodel.hpp"

namespace tapertrap::config {

/// Fully resolved run configuration: trap, drive, ion and force settings
/// plus per-command sections. Defaults are the published operating point;
/// see docs/config.md for the schema.
struct RunConfig {
  trapmodel::TrapGeometry geometry = trapmodel::TrapGeometry::paper();
  trapmodel::DriveConfig drive = trapmodel::DriveConfig::paper();
  trapmodel::IonSpecies ion = trapmodel::IonSpecies::calcium40();
  dynamics::ForceConfig forces;
  std::uint64_t seed = 1;

  // field backend selection
  std::string field_backend = "analytic";  // analytic | solved
  std::string field_basis_cache;           // for the solved backend
  std::string field_mesh;                  // input of solve-field

  // calibrate: targets (rad/s)
  double calib_target_radial = constants_radial();
  double calib_target_axial = constants_axial();

  // simulate
  double sim_duration = 1e-3;
  double sim_steps_per_rf = 200.0;
  int sim_sample_stride = 5;
  Eigen::Vector3d sim_position{0.0, 0.0, 0.0};
  Eigen::Vector3d sim_velocity{0.0, 0.0, 0.0};

  // scan-axial
  double scan_z_min = -50e-6;
  double scan_z_max = 100e-6;
  int scan_points = 16;
  bool scan_calibrate = true;
  double scan_record_time = 2e-3;
  double scan_offset = 1e-6;

  // sweep
  double sweep_f_min = 0.0;   // rad/s; 0 selects defaults around the radial mode
  double sweep_f_max = 0.0;
  int sweep_points = 41;
  std::string sweep_direction = "up";  // up | down
  double sweep_settle_periods = 200.0;
  double sweep_measure_periods = 100.0;

  // compensate
  double comp_box13 = 30.0;  // V, half width of the search box
  double comp_box24 = 80.0;
  Eigen::Vector3d comp_stray{0.0, 0.0, 0.0};  // V/m imposed stray field

  // pseudo-map
  double map_x_min = -0.3e-3, map_x_max = 0.3e-3;
  double map_z_min = -1.5e-3, map_z_max = 1.5e-3;
  int map_nx = 61, map_nz = 121;

  // sidebands
  double sideband_b_field = 3e-4;  // T
  double sideband_beam_angle = 0.0;
  int sideband_max_order = 2;
  std::array<double, 3> sideband_secular_hz{1.14e6, 1.15e6, 99.8e3};

  static double constants_radial() { return 2.0 * 3.141592653589793 * 1.145e6; }
  static double constants_axial() { return 2.0 * 3.141592653589793 * 99.8e3; }
};

/// Parses a configuration file. Unknown keys, bad units and malformed
/// lines raise ConfigError with the key name and line number.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Serializes a config back to the file format (used by `calibrate`).
std::string render_config(const RunConfig& cfg);

}  // namespace tapertrap::config
