#include "tapertrap/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <memory>
#include <optional>

#include "tapertrap/analysis.hpp"
#include "tapertrap/config.hpp"
#include "tapertrap/constants.hpp"
#include "tapertrap/dynamics.hpp"
#include "tapertrap/fieldsolve.hpp"
#include "tapertrap/output.hpp"
#include "tapertrap/sidebands.hpp"
#include "tapertrap/trapmodel.hpp"

namespace tapertrap::cli {

namespace {

using config::RunConfig;
using constants::two_pi;
using nlohmann::json;
using output::format_double;
using output::Table;

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
};

struct RunContext {
  RunConfig cfg;
  CommonOpts opts;
  std::uint64_t config_hash = 0;
  std::vector<std::string> outputs;

  std::string data(const Table& t) const {
    return opts.format == "json" ? output::to_json(t) : output::to_csv(t);
  }
  std::string data_ext() const { return opts.format == "json" ? ".json" : ".csv"; }
};

RunContext make_context(const CommonOpts& opts, const std::string& default_out) {
  RunContext ctx;
  ctx.opts = opts;
  std::string config_text;
  if (!opts.config_path.empty()) {
    config_text = output::read_file(opts.config_path);
    ctx.cfg = config::parse_config_text(config_text);
  }
  if (opts.seed) {
    ctx.cfg.seed = *opts.seed;
    ctx.cfg.forces.rng_seed = *opts.seed;
    config_text += "\n--seed " + std::to_string(*opts.seed);
  }
  ctx.config_hash = output::fnv1a64(config_text);
  if (ctx.opts.out_path.empty()) ctx.opts.out_path = default_out;
  return ctx;
}

void write_provenance(RunContext& ctx, const std::string& command) {
  json prov;
  prov["command"] = command;
  prov["config_hash"] = ctx.config_hash;
  prov["seed"] = ctx.cfg.seed;
  prov["version"] = version;
  prov["outputs"] = ctx.outputs;
  output::write_file(ctx.opts.out_path + ".provenance.json", prov.dump(2) + "\n");
}

void emit(RunContext& ctx, const std::string& path, const std::string& content) {
  output::write_file(path, content);
  ctx.outputs.push_back(path);
}

std::shared_ptr<const trapmodel::FieldModel> build_model(const RunConfig& cfg) {
  if (cfg.field_backend == "solved") {
    if (cfg.field_basis_cache.empty())
      throw ConfigError("field.backend = solved requires field.basis_cache");
    const auto cache = fieldsolve::load_basis_cache(cfg.field_basis_cache);
    return std::make_shared<const fieldsolve::SolvedFieldModel>(cache, cfg.drive);
  }
  return std::make_shared<const trapmodel::AnalyticFieldModel>(cfg.geometry,
                                                               cfg.drive);
}

trapmodel::ModelFactory build_factory(const RunConfig& cfg) {
  if (cfg.field_backend == "solved") {
    if (cfg.field_basis_cache.empty())
      throw ConfigError("field.backend = solved requires field.basis_cache");
    auto cache = std::make_shared<fieldsolve::BasisCache>(
        fieldsolve::load_basis_cache(cfg.field_basis_cache));
    return [cache](const trapmodel::DriveConfig& d) {
      return std::make_shared<const fieldsolve::SolvedFieldModel>(*cache, d);
    };
  }
  return trapmodel::analytic_factory(cfg.geometry);
}

double default_dt(const trapmodel::FieldModel& model, const RunConfig& cfg) {
  return two_pi / model.omega_rf() / cfg.sim_steps_per_rf;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_calibrate(RunContext& ctx, std::ostream& out) {
  auto drive = trapmodel::calibrate_drive(ctx.cfg.geometry, ctx.cfg.ion,
                                          ctx.cfg.calib_target_radial,
                                          ctx.cfg.calib_target_axial,
                                          ctx.cfg.drive);
  RunConfig calibrated = ctx.cfg;
  calibrated.drive = drive;
  emit(ctx, ctx.opts.out_path, config::render_config(calibrated));

  const trapmodel::AnalyticFieldModel model(ctx.cfg.geometry, drive);
  const auto modes = trapmodel::secular_frequencies(model, ctx.cfg.ion, 0.0);
  const auto mp = trapmodel::mathieu_parameters(model, ctx.cfg.ion, 0.0);
  out << "calibrated drive written to " << ctx.opts.out_path << "\n"
      << "  v_rf = (" << format_double(drive.v_rf1) << ", "
      << format_double(drive.v_rf2) << ") V, v_d = "
      << format_double(drive.v_d1) << " V\n"
      << "  nu_x = " << format_double(modes.omega[0] / two_pi)
      << " Hz, nu_y = " << format_double(modes.omega[1] / two_pi)
      << " Hz, nu_z = " << format_double(modes.omega[2] / two_pi) << " Hz\n"
      << "  mathieu q = (" << format_double(mp.q_x) << ", "
      << format_double(mp.q_y) << "), stable = " << (mp.stable ? "yes" : "no")
      << "\n";
}

void cmd_pseudo_map(RunContext& ctx, std::ostream& out) {
  const auto model = build_model(ctx.cfg);
  Table t;
  t.comments = {"pseudopotential energy map in the x-z plane (y = 0)",
                "columns: x_m, z_m, u_joule"};
  t.header = {"x_m", "z_m", "u_joule"};
  const auto& c = ctx.cfg;
  for (int ix = 0; ix < c.map_nx; ++ix) {
    const double x = c.map_x_min +
                     (c.map_x_max - c.map_x_min) * ix /
                         std::max(1, c.map_nx - 1);
    for (int iz = 0; iz < c.map_nz; ++iz) {
      const double z = c.map_z_min +
                       (c.map_z_max - c.map_z_min) * iz /
                           std::max(1, c.map_nz - 1);
      const double u = trapmodel::pseudopotential(*model, c.ion,
                                                  Eigen::Vector3d(x, 0.0, z));
      t.rows.push_back({x, z, u});
    }
  }
  emit(ctx, ctx.opts.out_path, ctx.data(t));
  out << "pseudopotential map (" << t.rows.size() << " points) written to "
      << ctx.opts.out_path << "\n";
}

void cmd_simulate(RunContext& ctx, std::ostream& out) {
  const auto model = build_model(ctx.cfg);
  dynamics::IonState init;
  init.position = ctx.cfg.sim_position;
  init.velocity = ctx.cfg.sim_velocity;
  const double dt = default_dt(*model, ctx.cfg);
  const auto traj =
      dynamics::simulate(*model, ctx.cfg.ion, init, ctx.cfg.sim_duration, dt,
                         ctx.cfg.forces, ctx.cfg.sim_sample_stride);

  Table t;
  t.comments = {"single-ion trajectory, SI units",
                "dt = " + format_double(traj.dt) +
                    " s, sample_stride = " + std::to_string(traj.sample_stride),
                "seed = " + std::to_string(ctx.cfg.seed),
                std::string("escaped = ") + (traj.escaped ? "true" : "false")};
  t.header = {"t", "x", "y", "z", "vx", "vy", "vz"};
  for (const auto& s : traj.samples)
    t.rows.push_back({s.time, s.position.x(), s.position.y(), s.position.z(),
                      s.velocity.x(), s.velocity.y(), s.velocity.z()});
  emit(ctx, ctx.opts.out_path, ctx.data(t));
  out << "trajectory with " << traj.samples.size() << " samples written to "
      << ctx.opts.out_path << (traj.escaped ? " (ion escaped)" : "") << "\n";
}

void cmd_scan_axial(RunContext& ctx, std::ostream& out) {
  RunConfig cfg = ctx.cfg;
  if (cfg.scan_calibrate)
    cfg.drive = trapmodel::calibrate_drive(cfg.geometry, cfg.ion,
                                           cfg.calib_target_radial,
                                           cfg.calib_target_axial, cfg.drive);
  const auto factory = build_factory(cfg);

  std::vector<double> z_targets;
  for (int i = 0; i < cfg.scan_points; ++i)
    z_targets.push_back(cfg.scan_z_min +
                        (cfg.scan_z_max - cfg.scan_z_min) * i /
                            std::max(1, cfg.scan_points - 1));

  analysis::ScanOptions opts;
  opts.record_time = cfg.scan_record_time;
  opts.radial_offset = cfg.scan_offset;
  const auto scan = analysis::scan_axial(factory, cfg.drive, cfg.ion, z_targets,
                                         cfg.calib_target_axial, opts);

  Table t;
  t.comments = {"radial mode frequencies vs axial position",
                "columns: z_m, nu_x_hz, nu_y_hz, unc_x_hz, unc_y_hz"};
  t.header = {"z_m", "nu_x_hz", "nu_y_hz", "unc_x_hz", "unc_y_hz"};
  for (const auto& p : scan.points) {
    if (!p.ok) continue;
    t.rows.push_back({p.parameter, p.freq_x, p.freq_y, p.unc_x, p.unc_y});
  }
  emit(ctx, ctx.opts.out_path, ctx.data(t));

  // Eq-form and linear fits per axis, angular units.
  json report;
  for (int axis = 0; axis < 2; ++axis) {
    const auto z = scan.parameters();
    auto nu = scan.freqs(axis);
    std::vector<double> omega(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) omega[i] = two_pi * nu[i];
    const auto eq1 = analysis::fit_eq1(z, omega);
    const auto lin = analysis::fit_linear_epsilon(z, omega);
    json j;
    j["omega0_rad_s"] = eq1.omega0;
    j["nu0_hz"] = eq1.omega0 / two_pi;
    j["p_per_m"] = eq1.p;
    j["p_err_per_m"] = eq1.p_err;
    j["converged"] = eq1.converged;
    j["residual_norm_rad_s"] = eq1.residual_norm;
    j["epsilon_per_m"] = lin.epsilon;
    j["epsilon_err_per_m"] = lin.epsilon_err;
    report[axis == 0 ? "x" : "y"] = j;
    out << (axis == 0 ? "x" : "y") << " mode: nu0 = "
        << format_double(eq1.omega0 / two_pi) << " Hz, p = "
        << format_double(eq1.p) << " 1/m, epsilon = "
        << format_double(lin.epsilon) << " 1/m\n";
  }
  const std::string fit_path = ctx.opts.out_path + ".fit.json";
  emit(ctx, fit_path, report.dump(2) + "\n");
  out << "scan written to " << ctx.opts.out_path << ", fits to " << fit_path
      << "\n";
}

void cmd_sweep(RunContext& ctx, std::ostream& out) {
  const auto model = build_model(ctx.cfg);
  const auto& cfg = ctx.cfg;
  if (!(cfg.forces.mod_force_amp > 0.0))
    throw ConfigError("sweep requires forces.mod_amp > 0");

  double f_lo = cfg.sweep_f_min, f_hi = cfg.sweep_f_max;
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) {
    // Default: a 10% band around the x radial mode.
    const auto modes = trapmodel::secular_frequencies(*model, cfg.ion, 0.0);
    f_lo = 0.95 * modes.omega[0];
    f_hi = 1.05 * modes.omega[0];
  }
  std::vector<double> freqs;
  for (int i = 0; i < cfg.sweep_points; ++i)
    freqs.push_back(f_lo + (f_hi - f_lo) * i / std::max(1, cfg.sweep_points - 1));
  const bool down = cfg.sweep_direction == "down";
  if (down) std::reverse(freqs.begin(), freqs.end());

  const double t_ref = two_pi / f_lo;
  const double settle = cfg.sweep_settle_periods * t_ref;
  const double measure = cfg.sweep_measure_periods * t_ref;
  const double dt = default_dt(*model, cfg);

  dynamics::IonState init;
  init.position = trapmodel::pseudo_minimum(*model, cfg.ion,
                                            Eigen::Vector3d::Zero());
  const auto res = dynamics::excitation_sweep(
      *model, cfg.ion, cfg.forces, freqs,
      down ? dynamics::SweepDirection::down : dynamics::SweepDirection::up,
      settle, measure, dt, init);

  Table t;
  t.comments = {"steady-state oscillation amplitude vs modulation frequency",
                "direction = " + cfg.sweep_direction,
                std::string("escaped = ") + (res.escaped ? "true" : "false")};
  t.header = {"freq_hz", "amp_x_m", "amp_y_m", "amp_z_m"};
  for (const auto& p : res.points)
    t.rows.push_back(
        {p.freq / two_pi, p.amplitude.x(), p.amplitude.y(), p.amplitude.z()});
  emit(ctx, ctx.opts.out_path, ctx.data(t));
  out << "sweep (" << res.points.size() << " points) written to "
      << ctx.opts.out_path << (res.escaped ? " (partial: ion escaped)" : "")
      << "\n";
}

void cmd_compensate(RunContext& ctx, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  const auto base_factory = build_factory(cfg);
  const Eigen::Vector3d stray = cfg.comp_stray;
  trapmodel::ModelFactory factory =
      [base_factory, stray](const trapmodel::DriveConfig& d)
      -> std::shared_ptr<const trapmodel::FieldModel> {
    auto base = base_factory(d);
    if (stray.isZero()) return base;
    return std::make_shared<const trapmodel::UniformFieldOverlay>(base, stray);
  };

  const auto res = analysis::compensate(
      factory, cfg.drive, cfg.ion, {-cfg.comp_box13, cfg.comp_box13},
      {-cfg.comp_box24, cfg.comp_box24});

  json j;
  j["dv13_volt"] = res.dv13;
  j["dv24_volt"] = res.dv24;
  j["metric_m_per_s"] = res.metric;
  j["on_boundary"] = res.on_boundary;
  j["evaluations"] = res.evaluations;
  if (ctx.opts.format == "json") {
    emit(ctx, ctx.opts.out_path, j.dump(2) + "\n");
  } else {
    Table t;
    t.comments = {"micromotion compensation optimum"};
    t.header = {"dv13_volt", "dv24_volt", "metric_m_per_s", "on_boundary"};
    t.rows.push_back({res.dv13, res.dv24, res.metric,
                      res.on_boundary ? 1.0 : 0.0});
    emit(ctx, ctx.opts.out_path, output::to_csv(t));
  }
  out << "optimum dv13 = " << format_double(res.dv13) << " V, dv24 = "
      << format_double(res.dv24) << " V (metric "
      << format_double(res.metric) << " m/s"
      << (res.on_boundary ? ", on search-box boundary" : "") << ")\n";
}

void cmd_sidebands(RunContext& ctx, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  const auto lines = sidebands::zeeman_lines(cfg.sideband_b_field,
                                             cfg.sideband_beam_angle);
  Table t;
  t.comments = {"Zeeman components and motional sidebands of the S1/2 - D5/2 "
                "transition",
                "columns: offset_hz, m_g, m_e, n_x, n_y, n_z"};
  t.header = {"offset_hz", "m_g", "m_e", "n_x", "n_y", "n_z"};
  std::vector<sidebands::SidebandLine> all;
  for (const auto& line : lines) {
    const auto comb = sidebands::sideband_comb(line, cfg.sideband_secular_hz,
                                               cfg.sideband_max_order);
    all.insert(all.end(), comb.begin(), comb.end());
  }
  std::sort(all.begin(), all.end(),
            [](const sidebands::SidebandLine& a, const sidebands::SidebandLine& b) {
              if (a.offset != b.offset) return a.offset < b.offset;
              if (a.base.m_ground != b.base.m_ground)
                return a.base.m_ground < b.base.m_ground;
              if (a.base.m_excited != b.base.m_excited)
                return a.base.m_excited < b.base.m_excited;
              if (a.n_x != b.n_x) return a.n_x < b.n_x;
              if (a.n_y != b.n_y) return a.n_y < b.n_y;
              return a.n_z < b.n_z;
            });
  for (const auto& sb : all)
    t.rows.push_back({sb.offset, sb.base.m_ground, sb.base.m_excited,
                      static_cast<double>(sb.n_x), static_cast<double>(sb.n_y),
                      static_cast<double>(sb.n_z)});
  emit(ctx, ctx.opts.out_path, ctx.data(t));
  out << all.size() << " lines written to " << ctx.opts.out_path << "\n";
}

void cmd_solve_field(RunContext& ctx, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  if (cfg.field_mesh.empty())
    throw ConfigError("solve-field requires field.mesh in the config");
  const auto mesh = fieldsolve::load_mesh(cfg.field_mesh);
  const auto bases = fieldsolve::solve_all_bases(mesh);
  fieldsolve::save_basis_cache(ctx.opts.out_path, mesh, bases);
  ctx.outputs.push_back(ctx.opts.out_path);
  out << "solved " << bases.size() << " electrode bases over "
      << mesh.triangles.size() << " triangles -> " << ctx.opts.out_path << "\n";
  for (const auto& [id, b] : bases)
    out << "  electrode " << id << " (" << mesh.electrode_names.at(id)
        << "): total charge " << format_double(b.total_charge()) << " C\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"tapered Paul trap simulation toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  struct Cmd {
    CLI::App* sub;
    std::string default_out;
    void (*fn)(RunContext&, std::ostream&);
  };
  std::vector<Cmd> cmds;
  auto add = [&](const std::string& name, const std::string& desc,
                 const std::string& default_out,
                 void (*fn)(RunContext&, std::ostream&)) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opts.config_path, "configuration file");
    sub->add_option("--out", opts.out_path, "output path");
    sub->add_option("--seed", [&opts](const std::vector<std::string>& v) {
      opts.seed = std::stoull(v.at(0));
      return true;
    }, "override the RNG seed");
    sub->add_option("--format", opts.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmds.push_back({sub, default_out, fn});
  };

  add("calibrate", "solve drive voltages for target secular frequencies",
      "calibrated.cfg", &cmd_calibrate);
  add("pseudo-map", "pseudopotential map over the x-z plane", "pseudo_map.csv",
      &cmd_pseudo_map);
  add("simulate", "propagate a single ion and export the trajectory",
      "trajectory.csv", &cmd_simulate);
  add("scan-axial", "radial frequencies vs axial position with fits",
      "scan_axial.csv", &cmd_scan_axial);
  add("sweep", "excitation sweep of the modulated push", "sweep.csv",
      &cmd_sweep);
  add("compensate", "minimize micromotion over compensation voltages",
      "compensate.csv", &cmd_compensate);
  add("sidebands", "Zeeman and motional sideband line list", "sidebands.csv",
      &cmd_sidebands);
  add("solve-field", "solve electrode charge bases from a mesh", "bases.tpfc",
      &cmd_solve_field);

  std::vector<const char*> argv;
  argv.push_back("tapertrap");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  for (const auto& cmd : cmds) {
    if (!cmd.sub->parsed()) continue;
    try {
      RunContext ctx = make_context(opts, cmd.default_out);
      cmd.fn(ctx, out);
      write_provenance(ctx, cmd.sub->get_name());
      return 0;
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return 2;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return 3;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 3;
    }
  }
  err << "error: no command given\n";
  return 2;
}

}  // namespace tapertrap::cli
