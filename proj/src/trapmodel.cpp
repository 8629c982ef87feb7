#include "tapertrap/trapmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tapertrap/constants.hpp"

namespace tapertrap::trapmodel {

namespace {
constexpr double kHessianStep = 1e-7;  // m, central-difference step

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace

void IonSpecies::validate() const {
  if (!(mass > 0.0)) throw ConfigError("ion mass must be > 0");
  if (charge == 0.0) throw ConfigError("ion charge must be nonzero");
}

IonSpecies IonSpecies::calcium40() {
  // 39.962590866 u isotope mass minus one electron mass.
  const double m = (39.962590866 - 5.48579909065e-4) * constants::atomic_mass_unit;
  return IonSpecies{m, constants::elementary_charge, "40Ca+"};
}

void TrapGeometry::validate() const {
  if (!(taper_angle >= 0.0 && taper_angle < constants::pi / 4.0))
    throw ConfigError("taper_angle must lie in [0, pi/4)");
  for (auto [v, name] : {std::pair{r0, "r0"},
                         std::pair{blade_length, "blade_length"},
                         std::pair{endcap_gap, "endcap_gap"},
                         std::pair{endcap_hole_diam, "endcap_hole_diam"},
                         std::pair{comp_diag_distance, "comp_diag_distance"},
                         std::pair{comp_diam, "comp_diam"}}) {
    if (!(v > 0.0))
      throw ConfigError(std::string("geometry length ") + name + " must be > 0");
  }
}

TrapGeometry TrapGeometry::paper() {
  TrapGeometry g;
  g.taper_angle = 10.0 * constants::pi / 180.0;
  g.r0 = 0.6389e-3;
  g.blade_length = 4.0e-3;
  g.endcap_gap = 4.8e-3;
  g.endcap_hole_diam = 0.8e-3;
  g.comp_diag_distance = 17.0e-3;
  g.comp_diam = 2.0e-3;
  return g;
}

void DriveConfig::validate() const {
  if (!(omega_rf > 0.0)) throw ConfigError("omega_rf must be > 0");
  if (std::abs(phase_diff - constants::pi) > 0.2)
    throw ConfigError("phase_diff must lie within pi +/- 0.2 rad");
}

DriveConfig DriveConfig::paper() {
  DriveConfig d;
  d.omega_rf = constants::two_pi * 11.17e6;
  const double v_mean = 95.0;
  const double delta = 0.007;  // 8 kHz splitting at 1.145 MHz
  d.v_rf1 = v_mean * (1.0 - 0.5 * delta);
  d.v_rf2 = v_mean * (1.0 + 0.5 * delta);
  d.phase_diff = 179.51 * constants::pi / 180.0;
  d.v_d1 = 5.0;
  d.v_d2 = 5.0;
  d.kappa_axial = 0.0938;  // 99.8 kHz axial at 5 V endcaps
  d.comp_coeffs = CompCoeffs{3.0, 2400.0};
  return d;
}

// ---------------------------------------------------------------------------
// FieldModel

double FieldModel::potential(const Vector3d& r, double t) const {
  double a = 0.0, b = 0.0;
  rf_envelope(r, a, b);
  const double w = omega_rf();
  return static_potential(r) + a * std::cos(w * t) + b * std::sin(w * t);
}

Vector3d FieldModel::gradient(const Vector3d& r, double t) const {
  Vector3d ga, gb;
  rf_envelope_gradients(r, ga, gb);
  const double w = omega_rf();
  return static_gradient(r) + ga * std::cos(w * t) + gb * std::sin(w * t);
}

// ---------------------------------------------------------------------------
// AnalyticFieldModel

AnalyticFieldModel::AnalyticFieldModel(TrapGeometry geom, DriveConfig drive)
    : geom_(geom), drive_(drive) {
  geom_.validate();
  drive_.validate();
  const double dphi = drive_.phase_diff - constants::pi;
  cos_dphi_ = std::cos(dphi);
  sin_dphi_ = std::sin(dphi);
}

bool AnalyticFieldModel::has_rf() const {
  return drive_.v_rf1 != 0.0 || drive_.v_rf2 != 0.0;
}

void AnalyticFieldModel::check_validity(const Vector3d& r) const {
  const double zmax = 0.5 * geom_.blade_length;
  if (!(std::abs(r.z()) < zmax))
    throw DomainError("position outside model validity: |z| = " +
                      fmt(std::abs(r.z())) + " m >= blade_length/2 = " +
                      fmt(zmax) + " m");
  if (!(geom_.rho(r.z()) > 0.0))
    throw DomainError("position outside model validity: rho(z) <= 0 at z = " +
                      fmt(r.z()) + " m");
  if (!r.allFinite()) throw DomainError("non-finite position");
}

bool AnalyticFieldModel::contains(const Vector3d& r) const {
  // Escape bookkeeping: cylinder of radius 0.9 rho(z) within the endcap gap.
  if (std::abs(r.z()) > 0.5 * geom_.endcap_gap) return false;
  if (std::abs(r.z()) >= 0.5 * geom_.blade_length) return false;
  const double rho = geom_.rho(r.z());
  if (!(rho > 0.0)) return false;
  return r.head<2>().norm() <= 0.9 * rho;
}

double AnalyticFieldModel::static_potential(const Vector3d& r) const {
  check_validity(r);
  const double x = r.x(), y = r.y(), z = r.z();
  const double half_gap = 0.5 * geom_.endcap_gap;
  const double vd_mean = 0.5 * (drive_.v_d1 + drive_.v_d2);
  const double vd_diff = drive_.v_d1 - drive_.v_d2;
  const double k = drive_.kappa_axial;

  const double phi_dc =
      k * vd_mean * (z * z - 0.5 * (x * x + y * y)) / (half_gap * half_gap) +
      k * vd_diff * z / geom_.endcap_gap;

  const auto& vc = drive_.v_comp;
  const double dv13 = vc[0] - vc[2];
  const double dv24 = vc[1] - vc[3];
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double xp = (x + y) * inv_sqrt2;   // electrode diagonal directions
  const double yp = (y - x) * inv_sqrt2;
  const double phi_c =
      drive_.comp_coeffs.beta_dipole * (dv13 * xp + dv24 * yp) +
      drive_.comp_coeffs.beta_quad_xy * drive_.v_comp_common() * x * y;

  return phi_dc + phi_c;
}

Vector3d AnalyticFieldModel::static_gradient(const Vector3d& r) const {
  check_validity(r);
  const double x = r.x(), y = r.y(), z = r.z();
  const double half_gap = 0.5 * geom_.endcap_gap;
  const double vd_mean = 0.5 * (drive_.v_d1 + drive_.v_d2);
  const double vd_diff = drive_.v_d1 - drive_.v_d2;
  const double k = drive_.kappa_axial;
  const double c_dc = k * vd_mean / (half_gap * half_gap);

  Vector3d g(-c_dc * x, -c_dc * y,
             2.0 * c_dc * z + k * vd_diff / geom_.endcap_gap);

  const auto& vc = drive_.v_comp;
  const double dv13 = vc[0] - vc[2];
  const double dv24 = vc[1] - vc[3];
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double bd = drive_.comp_coeffs.beta_dipole;
  const double bq = drive_.comp_coeffs.beta_quad_xy * drive_.v_comp_common();
  g.x() += bd * (dv13 - dv24) * inv_sqrt2 + bq * y;
  g.y() += bd * (dv13 + dv24) * inv_sqrt2 + bq * x;
  return g;
}

double AnalyticFieldModel::rf_envelope(const Vector3d& r, double& a,
                                       double& b) const {
  check_validity(r);
  const double rho = geom_.rho(r.z());
  const double inv_rho2 = 1.0 / (rho * rho);
  const double x2 = r.x() * r.x(), y2 = r.y() * r.y();
  a = (drive_.v_rf1 * x2 - drive_.v_rf2 * cos_dphi_ * y2) * inv_rho2;
  b = drive_.v_rf2 * sin_dphi_ * y2 * inv_rho2;
  return a;
}

void AnalyticFieldModel::rf_envelope_gradients(const Vector3d& r, Vector3d& ga,
                                               Vector3d& gb) const {
  check_validity(r);
  const double rho = geom_.rho(r.z());
  const double inv_rho2 = 1.0 / (rho * rho);
  const double tan_theta = std::tan(geom_.taper_angle);
  const double x = r.x(), y = r.y();
  const double v1 = drive_.v_rf1;
  const double v2c = drive_.v_rf2 * cos_dphi_;
  const double v2s = drive_.v_rf2 * sin_dphi_;

  // d(1/rho^2)/dz = 2 tan(theta)/rho^3
  const double dz_factor = 2.0 * tan_theta * inv_rho2 / rho;
  ga = Vector3d(2.0 * v1 * x * inv_rho2, -2.0 * v2c * y * inv_rho2,
                (v1 * x * x - v2c * y * y) * dz_factor);
  gb = Vector3d(0.0, 2.0 * v2s * y * inv_rho2, v2s * y * y * dz_factor);
}

ModelFactory analytic_factory(const TrapGeometry& geom) {
  return [geom](const DriveConfig& drive) {
    return std::make_shared<const AnalyticFieldModel>(geom, drive);
  };
}

// ---------------------------------------------------------------------------
// Pseudopotential and derived quantities

double pseudopotential(const FieldModel& model, const IonSpecies& ion,
                       const Vector3d& r) {
  Vector3d ga, gb;
  model.rf_envelope_gradients(r, ga, gb);
  const double w = model.omega_rf();
  const double q2 = ion.charge * ion.charge;
  const double rf_term =
      model.has_rf()
          ? q2 * (ga.squaredNorm() + gb.squaredNorm()) / (4.0 * ion.mass * w * w)
          : 0.0;
  return rf_term + ion.charge * model.static_potential(r);
}

Matrix3d pseudo_hessian(const FieldModel& model, const IonSpecies& ion,
                        const Vector3d& r) {
  const double h = kHessianStep;
  Matrix3d hess;
  const double u0 = pseudopotential(model, ion, r);
  for (int i = 0; i < 3; ++i) {
    Vector3d rp = r, rm = r;
    rp[i] += h;
    rm[i] -= h;
    hess(i, i) =
        (pseudopotential(model, ion, rp) - 2.0 * u0 + pseudopotential(model, ion, rm)) /
        (h * h);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      Vector3d rpp = r, rpm = r, rmp = r, rmm = r;
      rpp[i] += h; rpp[j] += h;
      rpm[i] += h; rpm[j] -= h;
      rmp[i] -= h; rmp[j] += h;
      rmm[i] -= h; rmm[j] -= h;
      const double v = (pseudopotential(model, ion, rpp) -
                        pseudopotential(model, ion, rpm) -
                        pseudopotential(model, ion, rmp) +
                        pseudopotential(model, ion, rmm)) /
                       (4.0 * h * h);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

namespace {

Vector3d pseudo_gradient(const FieldModel& model, const IonSpecies& ion,
                         const Vector3d& r) {
  const double h = kHessianStep;
  Vector3d g;
  for (int i = 0; i < 3; ++i) {
    Vector3d rp = r, rm = r;
    rp[i] += h;
    rm[i] -= h;
    g[i] = (pseudopotential(model, ion, rp) - pseudopotential(model, ion, rm)) /
           (2.0 * h);
  }
  return g;
}

// Newton minimization over the coordinates listed in `active`.
Vector3d newton_minimum(const FieldModel& model, const IonSpecies& ion,
                        Vector3d r, const std::array<bool, 3>& active) {
  constexpr int kMaxIter = 60;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Vector3d g = pseudo_gradient(model, ion, r);
    const Matrix3d hess = pseudo_hessian(model, ion, r);

    // Restrict to the active subspace.
    int n = 0;
    int idx[3];
    for (int i = 0; i < 3; ++i)
      if (active[i]) idx[n++] = i;
    Eigen::MatrixXd hs(n, n);
    Eigen::VectorXd gs(n);
    for (int i = 0; i < n; ++i) {
      gs(i) = g[idx[i]];
      for (int j = 0; j < n; ++j) hs(i, j) = hess(idx[i], idx[j]);
    }
    Eigen::VectorXd step = hs.ldlt().solve(gs);
    if (!step.allFinite())
      throw UnstableError("unstable configuration: singular curvature while "
                          "locating the pseudopotential minimum");
    double step_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      r[idx[i]] -= step(i);
      step_norm = std::max(step_norm, std::abs(step(i)));
    }
    if (step_norm < 1e-13) return r;
  }
  throw SolverError("pseudopotential minimum search did not converge");
}

}  // namespace

Vector3d pseudo_minimum_xy(const FieldModel& model, const IonSpecies& ion,
                           double z) {
  return newton_minimum(model, ion, Vector3d(0.0, 0.0, z),
                        {true, true, false});
}

Vector3d pseudo_minimum(const FieldModel& model, const IonSpecies& ion,
                        const Vector3d& start) {
  return newton_minimum(model, ion, start, {true, true, true});
}

SecularModes secular_frequencies(const FieldModel& model,
                                 const IonSpecies& ion, double z) {
  const Vector3d rmin = pseudo_minimum_xy(model, ion, z);
  const Matrix3d hess = pseudo_hessian(model, ion, rmin);

  Eigen::SelfAdjointEigenSolver<Matrix3d> es(hess);
  if (es.info() != Eigen::Success)
    throw SolverError("Hessian eigendecomposition failed");
  const Vector3d evals = es.eigenvalues();
  if (!(evals.minCoeff() > 0.0))
    throw UnstableError("unstable configuration: pseudopotential Hessian not "
                        "positive definite at z = " + fmt(z) + " m");

  // Assign eigenpairs to (x-like, y-like, z-like) slots: maximize the summed
  // |overlap| with the lab axes over all permutations; ties are broken by
  // putting the smaller eigenvalue in the lower slot.
  const Matrix3d vecs = es.eigenvectors();
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  int best = 0;
  double best_score = -1.0;
  for (int p = 0; p < 6; ++p) {
    double score = 0.0;
    for (int axis = 0; axis < 3; ++axis)
      score += std::abs(vecs(axis, kPerms[p][axis]));
    bool better = score > best_score + 1e-12;
    if (!better && score > best_score - 1e-12) {
      // Tie: prefer ascending eigenvalues in slot order.
      for (int axis = 0; axis < 3; ++axis) {
        const double d = evals(kPerms[p][axis]) - evals(kPerms[best][axis]);
        if (std::abs(d) > 0.0) {
          better = d < 0.0;
          break;
        }
      }
    }
    if (better) {
      best = p;
      best_score = score;
    }
  }

  SecularModes modes;
  modes.minimum = rmin;
  for (int axis = 0; axis < 3; ++axis) {
    const int k = kPerms[best][axis];
    modes.omega[axis] = std::sqrt(evals(k) / ion.mass);
    Vector3d v = vecs.col(k);
    if (v(axis) < 0.0) v = -v;  // canonical orientation
    modes.axes.col(axis) = v;
  }
  return modes;
}

double radial_freq_eq1(double z, double omega0, double taper_angle,
                       double r0) {
  const double u = z * std::tan(taper_angle) / r0;
  if (!(std::abs(u) < 1.0))
    throw DomainError("radial_freq_eq1: |z tan(theta)/r0| = " + fmt(std::abs(u)) +
                      " >= 1 (pole of Eq. form)");
  const double d = 1.0 - u;
  return omega0 / (d * d);
}

// ---------------------------------------------------------------------------
// Mathieu parameters

namespace {

// Second derivative of f along axis i at r, step h.
template <typename F>
double second_derivative(const F& f, const Vector3d& r, int i, double h) {
  Vector3d rp = r, rm = r;
  rp[i] += h;
  rm[i] -= h;
  return (f(rp) - 2.0 * f(r) + f(rm)) / (h * h);
}

}  // namespace

MathieuParams mathieu_parameters(const FieldModel& model,
                                 const IonSpecies& ion, double z) {
  const Vector3d r0(0.0, 0.0, z);
  const double h = kHessianStep;
  const double w2 = model.omega_rf() * model.omega_rf();

  MathieuParams p;
  double q_arr[2], a_arr[2];
  for (int i = 0; i < 2; ++i) {
    const double ka = second_derivative(
        [&](const Vector3d& r) {
          double a, b;
          model.rf_envelope(r, a, b);
          return a;
        },
        r0, i, h);
    const double kb = second_derivative(
        [&](const Vector3d& r) {
          double a, b;
          model.rf_envelope(r, a, b);
          return b;
        },
        r0, i, h);
    const double kappa_rf = std::hypot(ka, kb);
    const double kappa_s = second_derivative(
        [&](const Vector3d& r) { return model.static_potential(r); }, r0, i, h);
    q_arr[i] = 2.0 * std::abs(ion.charge) * kappa_rf / (ion.mass * w2);
    a_arr[i] = 4.0 * ion.charge * kappa_s / (ion.mass * w2);
  }
  p.q_x = q_arr[0];
  p.q_y = q_arr[1];
  p.a_x = a_arr[0];
  p.a_y = a_arr[1];

  // First stability region, lowest-order criterion per radial axis:
  // q < 0.908 and 0 < beta^2 = a + q^2/2 < 1.
  auto radial_ok = [](double a, double q) {
    const double beta2 = a + 0.5 * q * q;
    return q < 0.908 && beta2 > 0.0 && beta2 < 1.0;
  };
  p.stable = radial_ok(p.a_x, p.q_x) && radial_ok(p.a_y, p.q_y);
  return p;
}

MathieuParams mathieu_parameters(const TrapGeometry& geom,
                                 const DriveConfig& drive,
                                 const IonSpecies& ion, double z) {
  const AnalyticFieldModel model(geom, drive);
  return mathieu_parameters(model, ion, z);
}

// ---------------------------------------------------------------------------
// Drive calibration

DriveConfig calibrate_drive(const TrapGeometry& geom, const IonSpecies& ion,
                            double target_radial, double target_axial,
                            const DriveConfig& templ) {
  if (!(target_radial > 0.0) || !(target_axial > 0.0))
    throw ConfigError("calibration targets must be > 0");
  geom.validate();
  templ.validate();
  if (!(templ.kappa_axial > 0.0))
    throw ConfigError("calibrate_drive requires kappa_axial > 0");

  DriveConfig d = templ;
  const double q_abs = std::abs(ion.charge);
  const double half_gap = 0.5 * geom.endcap_gap;

  // Closed-form first guess from the ideal-quadrupole relations:
  //   m wz^2 = 2 q kappa vd_mean / (gap/2)^2
  //   w_rf_part = sqrt(2) q v / (m w_rf r0^2), w_r^2 = w_rf_part^2 - wz^2/2
  const double vd_mean = ion.mass * target_axial * target_axial * half_gap *
                         half_gap / (2.0 * q_abs * d.kappa_axial);
  d.v_d1 = d.v_d2 = vd_mean;
  const double w_rf_part =
      std::sqrt(target_radial * target_radial + 0.5 * target_axial * target_axial);
  double v_mean = ion.mass * d.omega_rf * geom.r0 * geom.r0 * w_rf_part /
                  (std::sqrt(2.0) * q_abs);
  const double delta = templ.v_rf_mean() != 0.0 ? templ.rf_delta() : 0.0;

  auto apply = [&](double vm, double vd) {
    d.v_rf1 = vm * (1.0 - 0.5 * delta);
    d.v_rf2 = vm * (1.0 + 0.5 * delta);
    d.v_d1 = d.v_d2 = vd;
  };
  apply(v_mean, vd_mean);

  double vd = vd_mean;
  for (int iter = 0; iter < 40; ++iter) {
    const AnalyticFieldModel model(geom, d);
    const SecularModes modes = secular_frequencies(model, ion, 0.0);
    const double wr = 0.5 * (modes.omega[0] + modes.omega[1]);
    const double wz = modes.omega[2];
    const double err_r = wr / target_radial - 1.0;
    const double err_z = wz / target_axial - 1.0;
    if (std::abs(err_r) < 1e-9 && std::abs(err_z) < 1e-9) break;
    // wz^2 is linear in vd; the radial RF part is linear in v_mean.
    vd *= (target_axial * target_axial) / (wz * wz);
    const double w_rf_needed = std::sqrt(
        std::max(target_radial * target_radial + 0.5 * target_axial * target_axial, 0.0));
    const double w_rf_now =
        std::sqrt(std::max(wr * wr + 0.5 * wz * wz, 1e-300));
    v_mean *= w_rf_needed / w_rf_now;
    apply(v_mean, vd);
  }

  const MathieuParams mp = mathieu_parameters(geom, d, ion);
  if (!mp.stable)
    throw SolverError(
        "calibration produced an unstable drive: q = (" + fmt(mp.q_x) + ", " +
        fmt(mp.q_y) + ") vs bound 0.908, a = (" + fmt(mp.a_x) + ", " +
        fmt(mp.a_y) + ")");

  // Round-trip contract.
  const AnalyticFieldModel model(geom, d);
  const SecularModes modes = secular_frequencies(model, ion, 0.0);
  const double wr = 0.5 * (modes.omega[0] + modes.omega[1]);
  if (std::abs(wr / target_radial - 1.0) > 1e-3 ||
      std::abs(modes.omega[2] / target_axial - 1.0) > 1e-3)
    throw SolverError("calibration round-trip check failed");
  return d;
}

double principal_axis_angle(const FieldModel& model, const IonSpecies& ion,
                            double z) {
  const SecularModes modes = secular_frequencies(model, ion, z);
  const double wx = modes.omega[0], wy = modes.omega[1];
  if (std::abs(wx - wy) <= 1e-9 * 0.5 * (wx + wy))
    throw UnstableError("undefined axes: radial modes are degenerate");
  const Vector3d v = modes.axes.col(0);
  double ang = std::atan2(v.y(), v.x());
  while (ang <= -0.5 * constants::pi) ang += constants::pi;
  while (ang > 0.5 * constants::pi) ang -= constants::pi;
  return ang;
}

}  // namespace tapertrap::trapmodel
