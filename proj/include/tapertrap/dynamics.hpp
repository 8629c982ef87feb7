#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "tapertrap/trapmodel.hpp"

namespace tapertrap::dynamics {

using Eigen::Vector3d;
using trapmodel::FieldModel;
using trapmodel::IonSpecies;

struct IonState {
  Vector3d position = Vector3d::Zero();  // m
  Vector3d velocity = Vector3d::Zero();  // m/s
  double time = 0.0;                     // s
};

/// Optional non-trap forces: linear drag (Doppler-cooling stand-in),
/// Poisson-distributed recoil kicks, and an intensity-modulated push
///   F(t) = mod_force_amp (1 + sin(mod_freq t)) / 2 along mod_direction.
struct ForceConfig {
  double drag_coefficient = 0.0;  // gamma, kg/s
  double kick_rate = 0.0;         // 1/s
  double kick_momentum = 0.0;     // kg m/s per kick
  double mod_force_amp = 0.0;     // N
  double mod_freq = 0.0;          // rad/s
  Vector3d mod_direction = Vector3d::UnitX();
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool stochastic() const { return kick_rate > 0.0 && kick_momentum != 0.0; }
};

struct TrajectoryRecord {
  double dt = 0.0;        // integrator step, s
  int sample_stride = 1;  // steps between stored samples
  bool escaped = false;
  std::vector<IonState> samples;
  std::string metadata;  // echoed as # comments in CSV export

  double sample_dt() const { return dt * sample_stride; }
  double span() const {
    return samples.empty() ? 0.0
                           : samples.back().time - samples.front().time;
  }
};

/// One velocity-Verlet step. Deterministic; dt may be negative to retrace
/// a trajectory. Drag is evaluated at the half-step velocity estimate.
/// Throws DomainError (escape) if the updated position leaves the model.
IonState step_verlet(const IonState& state, const FieldModel& model,
                     const IonSpecies& ion, const ForceConfig& forces,
                     double dt);

/// Propagates the ion for `duration` and records every sample_stride-th
/// step (including the initial state). Escape truncates the record and
/// sets the flag. Stochastic kicks reproduce bit-identically per rng_seed.
TrajectoryRecord simulate(const FieldModel& model, const IonSpecies& ion,
                          const IonState& initial, double duration, double dt,
                          const ForceConfig& forces, int sample_stride);

enum class SweepDirection { up, down };

/// Steady-state response of one frequency point of a sweep.
struct SweepPoint {
  double freq = 0.0;         // modulation frequency, rad/s
  Vector3d amplitude = Vector3d::Zero();  // per lab axis, m
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool escaped = false;  // partial result: ion lost during the sweep
};

/// Drives the ion with the modulated force at each frequency in turn,
/// carrying the state across frequencies (hysteresis-capable). After
/// settle_time the displacement is demodulated at the drive frequency over
/// measure_time (rounded down to whole modulation periods); the reported
/// amplitude equals sqrt(2) times the RMS of the band-passed displacement.
SweepResult excitation_sweep(const FieldModel& model, const IonSpecies& ion,
                             const ForceConfig& forces_template,
                             const std::vector<double>& freq_list,
                             SweepDirection direction, double settle_time,
                             double measure_time, double dt,
                             const IonState& initial);

}  // namespace tapertrap::dynamics
