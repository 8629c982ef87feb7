#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "tapertrap/errors.hpp"

namespace tapertrap::trapmodel {

using Eigen::Matrix3d;
using Eigen::Vector3d;

/// Trapped particle. Mass in kg, charge in C (signed, nonzero).
struct IonSpecies {
  double mass = 0.0;
  double charge = 0.0;
  std::string label;

  void validate() const;

  /// 40Ca+ (isotope mass minus one electron).
  static IonSpecies calcium40();
};

/// Static electrode dimensions. Angles in rad, lengths in m.
///
/// The blade pairs incline to the z axis by taper_angle, so the local
/// blade-to-axis distance shrinks linearly along +z:
///   rho(z) = r0 - z * tan(taper_angle).
struct TrapGeometry {
  double taper_angle = 0.0;      // theta, 0 <= theta < pi/4
  double r0 = 0.0;               // blade-to-axis distance at z = 0
  double blade_length = 0.0;     // axial blade extent
  double endcap_gap = 0.0;       // endcap-to-endcap spacing
  double endcap_hole_diam = 0.0;
  double comp_diag_distance = 0.0;
  double comp_diam = 0.0;

  double rho(double z) const { return r0 - z * std::tan(taper_angle); }

  void validate() const;

  /// Published dimensions: theta = 10 deg, blades 4 mm, endcaps 4.8 mm
  /// apart with 0.8 mm holes, compensation electrodes on a 17 mm diagonal.
  /// r0 = 0.6389 mm, fixed by the measured axial frequency gradient
  /// (r0 = 2 tan(theta) / epsilon with epsilon = 0.552 / mm).
  static TrapGeometry paper();
};

/// Geometric efficiency coefficients of the compensation electrodes.
/// beta_dipole in 1/m (uniform field per differential volt), beta_quad_xy
/// in 1/m^2 (xy quadrupole per common-mode volt).
struct CompCoeffs {
  double beta_dipole = 0.0;
  double beta_quad_xy = 0.0;
};

/// RF and DC drive settings. omega_rf and phase_diff in rad(/s), voltages
/// in V. v_comp holds V_C1..V_C4 in electrode order (1,3 and 2,4 are the
/// opposite-positioned pairs along the two diagonals).
struct DriveConfig {
  double omega_rf = 0.0;
  double v_rf1 = 0.0;       // amplitude on the x blade pair
  double v_rf2 = 0.0;       // amplitude on the y blade pair
  double phase_diff = 0.0;  // measured phase between the pairs, ~pi
  double v_d1 = 0.0;        // endcap at +z
  double v_d2 = 0.0;        // endcap at -z
  std::array<double, 4> v_comp{0.0, 0.0, 0.0, 0.0};
  double kappa_axial = 0.0;  // endcap geometric efficiency
  CompCoeffs comp_coeffs;

  double v_rf_mean() const { return 0.5 * (v_rf1 + v_rf2); }
  /// Relative quadrupole asymmetry between the blade pairs,
  /// (v_rf2 - v_rf1) / mean. Positive delta raises omega_y above omega_x.
  double rf_delta() const { return (v_rf2 - v_rf1) / v_rf_mean(); }
  double v_comp_common() const {
    return 0.25 * (v_comp[0] + v_comp[1] + v_comp[2] + v_comp[3]);
  }

  void validate() const;

  /// Drive at the published operating point: 11.17 MHz, 95 V amplitudes
  /// split by the 0.7% asymmetry implied by the 8 kHz mode splitting,
  /// 179.51 deg phase, endcaps at 5 V with kappa chosen for a 99.8 kHz
  /// axial frequency. beta coefficients are calibration constants (see
  /// docs/config.md).
  static DriveConfig paper();
};

/// Time-dependent electrostatic field of the trap.
///
/// The RF part is separated into quadrature envelopes,
///   Phi_RF(r, t) = A(r) cos(omega_rf t) + B(r) sin(omega_rf t),
/// so that both the instantaneous field and the time-averaged
/// pseudopotential can be evaluated consistently from one backend.
class FieldModel {
 public:
  virtual ~FieldModel() = default;

  /// Full potential in V. Throws DomainError outside the validity region.
  double potential(const Vector3d& r, double t) const;
  /// Gradient of the full potential, V/m.
  Vector3d gradient(const Vector3d& r, double t) const;

  virtual double static_potential(const Vector3d& r) const = 0;
  virtual Vector3d static_gradient(const Vector3d& r) const = 0;
  virtual double rf_envelope(const Vector3d& r, double& a, double& b) const = 0;
  virtual void rf_envelope_gradients(const Vector3d& r, Vector3d& grad_a,
                                     Vector3d& grad_b) const = 0;

  virtual double omega_rf() const = 0;
  virtual bool has_rf() const = 0;

  /// Throws DomainError naming the violated bound.
  virtual void check_validity(const Vector3d& r) const = 0;
  /// True while the ion counts as trapped (escape bookkeeping, wider or
  /// equal to the validity region check).
  virtual bool contains(const Vector3d& r) const = 0;
};

/// Closed-form near-axis field of the tapered trap.
///
/// RF part: Phi_RF = [V1(t) x^2 + V2(t) y^2] / rho(z)^2 with
///   V1(t) = v_rf1 cos(wt), V2(t) = -v_rf2 cos(wt + phase_diff - pi).
/// DC part: endcap quadrupole plus axial push,
///   kappa (vd1+vd2)/2 (z^2 - (x^2+y^2)/2)/(gap/2)^2
///     + kappa (vd1-vd2) z / gap.
/// Compensation part: dipole along the electrode diagonals plus an xy
/// quadrupole from the common-mode voltage,
///   beta_dipole [(VC1-VC3) x' + (VC2-VC4) y'] + beta_quad_xy Vc_bar x y,
/// with x' = (x+y)/sqrt2, y' = (y-x)/sqrt2.
///
/// Valid for |z| < blade_length/2 and rho(z) > 0. The RF part violates
/// Laplace's equation at O(tan^2 theta + delta); the static parts are
/// exactly harmonic.
class AnalyticFieldModel final : public FieldModel {
 public:
  AnalyticFieldModel(TrapGeometry geom, DriveConfig drive);

  double static_potential(const Vector3d& r) const override;
  Vector3d static_gradient(const Vector3d& r) const override;
  double rf_envelope(const Vector3d& r, double& a, double& b) const override;
  void rf_envelope_gradients(const Vector3d& r, Vector3d& grad_a,
                             Vector3d& grad_b) const override;

  double omega_rf() const override { return drive_.omega_rf; }
  bool has_rf() const override;
  void check_validity(const Vector3d& r) const override;
  bool contains(const Vector3d& r) const override;

  const TrapGeometry& geometry() const { return geom_; }
  const DriveConfig& drive() const { return drive_; }

 private:
  TrapGeometry geom_;
  DriveConfig drive_;
  double cos_dphi_;  // cos(phase_diff - pi)
  double sin_dphi_;
};

/// Decorator adding a uniform stray field E (V/m) to the static part.
class UniformFieldOverlay final : public FieldModel {
 public:
  UniformFieldOverlay(std::shared_ptr<const FieldModel> base, Vector3d e_stray)
      : base_(std::move(base)), e_stray_(std::move(e_stray)) {}

  double static_potential(const Vector3d& r) const override {
    return base_->static_potential(r) - e_stray_.dot(r);
  }
  Vector3d static_gradient(const Vector3d& r) const override {
    return base_->static_gradient(r) - e_stray_;
  }
  double rf_envelope(const Vector3d& r, double& a, double& b) const override {
    return base_->rf_envelope(r, a, b);
  }
  void rf_envelope_gradients(const Vector3d& r, Vector3d& ga,
                             Vector3d& gb) const override {
    base_->rf_envelope_gradients(r, ga, gb);
  }
  double omega_rf() const override { return base_->omega_rf(); }
  bool has_rf() const override { return base_->has_rf(); }
  void check_validity(const Vector3d& r) const override {
    base_->check_validity(r);
  }
  bool contains(const Vector3d& r) const override { return base_->contains(r); }

 private:
  std::shared_ptr<const FieldModel> base_;
  Vector3d e_stray_;
};

/// Builds a field model from a drive setting; experiments use this to vary
/// voltages while holding everything else fixed.
using ModelFactory =
    std::function<std::shared_ptr<const FieldModel>(const DriveConfig&)>;

ModelFactory analytic_factory(const TrapGeometry& geom);

/// Total effective (pseudopotential) energy of the ion at r, in J:
///   q^2 (|grad A|^2 + |grad B|^2) / (4 m omega_rf^2) + q Phi_static(r).
double pseudopotential(const FieldModel& model, const IonSpecies& ion,
                       const Vector3d& r);

/// 3x3 Hessian of the pseudopotential energy by central differences
/// (step 1e-7 m), J/m^2.
Matrix3d pseudo_hessian(const FieldModel& model, const IonSpecies& ion,
                        const Vector3d& r);

/// Location of the pseudopotential minimum in the x-y plane at fixed z.
Vector3d pseudo_minimum_xy(const FieldModel& model, const IonSpecies& ion,
                           double z);

/// Full 3D pseudopotential minimum (Newton from the given start).
Vector3d pseudo_minimum(const FieldModel& model, const IonSpecies& ion,
                        const Vector3d& start);

/// Secular mode frequencies and principal axes at axial position z.
/// Modes are ordered (x-like, y-like, z-like) by eigenvector dominance;
/// ties on the dominant component give the smaller eigenvalue the lower
/// axis slot.
struct SecularModes {
  std::array<double, 3> omega{};  // rad/s
  Matrix3d axes;                  // unit eigenvectors as columns
  Vector3d minimum;               // where the Hessian was evaluated
};

SecularModes secular_frequencies(const FieldModel& model,
                                 const IonSpecies& ion, double z);

/// Radial frequency of the tapered trap as a function of axial position,
///   omega(z) = omega0 / (1 - z tan(theta) / r0)^2,
/// normalized so confinement strengthens towards +z.
double radial_freq_eq1(double z, double omega0, double taper_angle, double r0);

/// First-region Mathieu parameters per radial axis, from the model's RF
/// envelope curvature kappa_l = d^2A/dl^2 (both quadratures combined) and
/// static curvature:
///   q_l = 2 |Q| kappa_l / (m omega_rf^2),  a_l = 4 Q s_l / (m omega_rf^2).
struct MathieuParams {
  double q_x = 0.0, q_y = 0.0;
  double a_x = 0.0, a_y = 0.0;
  bool stable = false;
};

MathieuParams mathieu_parameters(const FieldModel& model,
                                 const IonSpecies& ion, double z = 0.0);
MathieuParams mathieu_parameters(const TrapGeometry& geom,
                                 const DriveConfig& drive,
                                 const IonSpecies& ion, double z = 0.0);

/// Inverse-solves the RF amplitude and endcap voltages so the secular
/// frequencies at z = 0 hit (target_radial, target_axial). target_radial
/// is the mean of the two radial modes; the template's asymmetry delta,
/// phase and compensation settings are preserved. Round-trip verified to
/// 0.1%.
DriveConfig calibrate_drive(const TrapGeometry& geom, const IonSpecies& ion,
                            double target_radial, double target_axial,
                            const DriveConfig& templ);

/// Angle of the x-like radial principal axis to the lab x axis, folded
/// into (-pi/2, pi/2]. Increasing common-mode compensation voltage
/// (beta_quad_xy > 0) rotates the axes clockwise when looking along +z.
double principal_axis_angle(const FieldModel& model, const IonSpecies& ion,
                            double z);

}  // namespace tapertrap::trapmodel
