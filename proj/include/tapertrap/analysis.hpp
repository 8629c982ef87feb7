#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "tapertrap/dynamics.hpp"
#include "tapertrap/trapmodel.hpp"

namespace tapertrap::analysis {

using dynamics::TrajectoryRecord;
using Eigen::Vector3d;
using trapmodel::DriveConfig;
using trapmodel::IonSpecies;
using trapmodel::ModelFactory;

/// One-sided Hann-windowed periodogram.
struct Spectrum {
  std::vector<double> freq;   // Hz, strictly increasing
  std::vector<double> power;  // arbitrary units, >= 0
  std::string window = "hann";
  double resolution = 0.0;    // Hz, 1 / record span
};

/// Spectrum of the displacement along a lab axis (0,1,2) or an arbitrary
/// direction. Requires >= 1024 uniform samples.
Spectrum power_spectrum(const TrajectoryRecord& traj, int axis);
Spectrum power_spectrum(const TrajectoryRecord& traj, const Vector3d& direction);
/// Spectrum of a raw uniformly sampled signal (test hook and building block).
Spectrum power_spectrum(const std::vector<double>& signal, double sample_dt);

struct PeakEstimate {
  double freq = 0.0;         // Hz
  double uncertainty = 0.0;  // Hz
  double prominence_db = 0.0;
  bool low_confidence = false;  // prominence below 6 dB
};

/// Sub-bin peak location in [f_lo, f_hi] by parabolic interpolation on
/// log-power. Throws SolverError("band too narrow...") if the maximum sits
/// on the band edge.
PeakEstimate peak_frequency(const Spectrum& spec, double f_lo, double f_hi);

/// Frequencies of both radial modes versus a scanned parameter.
struct ScanPoint {
  double parameter = 0.0;  // scan variable (axial position, m)
  double freq_x = 0.0, freq_y = 0.0;  // Hz
  double unc_x = 0.0, unc_y = 0.0;    // Hz
  double freq_z = 0.0;                // Hz, from the Hessian
  bool ok = false;
  std::string error;  // set when ok == false
};

struct ScanResult {
  std::string parameter_name;
  std::vector<ScanPoint> points;

  std::vector<double> parameters(bool only_ok = true) const;
  std::vector<double> freqs(int radial_axis, bool only_ok = true) const;
};

struct ScanOptions {
  double record_time = 2e-3;    // s of trajectory per point
  double dt = 0.0;              // 0: RF period / 200
  double radial_offset = 1e-6;  // m initial excitation along each mode
  int sample_stride = 5;
};

/// Moves the trap minimum to each z target by re-solving the endcap
/// voltages at fixed axial curvature, then measures both radial modes from
/// an FFT of a short trajectory. Mode labels follow the Hessian
/// eigenvectors continuously across the scan. Failed points are recorded
/// and skipped.
ScanResult scan_axial(const ModelFactory& factory, const DriveConfig& base,
                      const IonSpecies& ion,
                      const std::vector<double>& z_targets,
                      double constant_axial, const ScanOptions& opts = {});

/// Fit of omega(z) = omega0 / (1 - p z)^2 by damped Gauss-Newton.
struct Eq1Fit {
  double omega0 = 0.0;      // rad/s (same unit as the input ordinates)
  double p = 0.0;           // 1/m, = tan(theta)/r0
  double omega0_err = 0.0;
  double p_err = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

Eq1Fit fit_eq1(const std::vector<double>& z, const std::vector<double>& omega);

/// Ordinary least squares of omega = omega0 (1 + eps z).
struct LinearEpsFit {
  double epsilon = 0.0;      // 1/m
  double omega0 = 0.0;       // intercept
  double epsilon_err = 0.0;
  double omega0_err = 0.0;
};

LinearEpsFit fit_linear_epsilon(const std::vector<double>& z,
                                const std::vector<double>& omega);

/// RF-synchronous velocity amplitude: |single-bin Fourier component of the
/// velocity at omega_rf|, summed over the three axes. Record must span at
/// least 100 RF cycles.
double micromotion_metric(const TrajectoryRecord& traj, double omega_rf);

struct CompensateOptions {
  double settle_cycles = 100.0;   // RF cycles before measuring
  double measure_cycles = 400.0;  // RF cycles in the metric window
  double dt = 0.0;                // 0: RF period / 200
  double simplex_tol = 0.1;       // V, convergence diameter
  int max_evaluations = 400;
};

struct CompensationResult {
  double dv13 = 0.0;  // V, differential voltage on electrodes 1/3
  double dv24 = 0.0;  // V, differential voltage on electrodes 2/4
  double metric = 0.0;
  bool on_boundary = false;
  int evaluations = 0;
};

/// Minimizes the micromotion metric over the two differential compensation
/// voltages with a Nelder-Mead simplex. The differential voltages are
/// applied on top of `base` as (+d/2, -d/2) per electrode pair, keeping the
/// common mode (and hence the axial position) unchanged.
CompensationResult compensate(const ModelFactory& factory,
                              const DriveConfig& base, const IonSpecies& ion,
                              std::pair<double, double> box13,
                              std::pair<double, double> box24,
                              const CompensateOptions& opts = {});

}  // namespace tapertrap::analysis
