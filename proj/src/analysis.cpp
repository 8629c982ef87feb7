#include "tapertrap/analysis.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "tapertrap/constants.hpp"

namespace tapertrap::analysis {

using constants::two_pi;

// ---------------------------------------------------------------------------
// Spectral estimation

Spectrum power_spectrum(const std::vector<double>& signal, double sample_dt) {
  const std::size_t n = signal.size();
  if (n < 1024)
    throw ConfigError("power_spectrum: need at least 1024 samples, got " +
                      std::to_string(n));
  if (!(sample_dt > 0.0)) throw ConfigError("power_spectrum: sample_dt must be > 0");

  // Hann window on the mean-removed signal.
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) /
                      static_cast<double>(n);
  std::vector<double> windowed(n);
  double window_energy = 0.0;
  double signal_energy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w =
        0.5 * (1.0 - std::cos(two_pi * static_cast<double>(k) /
                              static_cast<double>(n)));
    windowed[k] = (signal[k] - mean) * w;
    window_energy += w * w;
    signal_energy += windowed[k] * windowed[k];
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> out;
  fft.fwd(out, windowed);

  Spectrum spec;
  const std::size_t n_bins = n / 2 + 1;
  spec.freq.resize(n_bins);
  spec.power.resize(n_bins);
  const double df = 1.0 / (sample_dt * static_cast<double>(n));
  double parseval_sum = 0.0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    spec.freq[k] = df * static_cast<double>(k);
    double p = std::norm(out[k]);
    parseval_sum += (k == 0 || (n % 2 == 0 && k == n_bins - 1)) ? p : 2.0 * p;
    spec.power[k] = p;
  }
  spec.resolution = df;

  // Parseval consistency of the transform itself.
  if (signal_energy > 0.0) {
    const double ratio = parseval_sum / (static_cast<double>(n) * signal_energy);
    if (std::abs(ratio - 1.0) > 1e-6)
      throw SolverError("power_spectrum: Parseval check failed (ratio " +
                        std::to_string(ratio) + ")");
  }
  return spec;
}

namespace {

std::vector<double> project(const TrajectoryRecord& traj,
                            const Vector3d& direction) {
  std::vector<double> s;
  s.reserve(traj.samples.size());
  for (const auto& st : traj.samples) s.push_back(st.position.dot(direction));
  return s;
}

}  // namespace

Spectrum power_spectrum(const TrajectoryRecord& traj, int axis) {
  if (axis < 0 || axis > 2) throw ConfigError("power_spectrum: axis must be 0..2");
  Vector3d dir = Vector3d::Zero();
  dir[axis] = 1.0;
  return power_spectrum(traj, dir);
}

Spectrum power_spectrum(const TrajectoryRecord& traj,
                        const Vector3d& direction) {
  return power_spectrum(project(traj, direction), traj.sample_dt());
}

PeakEstimate peak_frequency(const Spectrum& spec, double f_lo, double f_hi) {
  if (spec.freq.size() < 3) throw ConfigError("peak_frequency: empty spectrum");
  if (!(f_lo < f_hi) || f_lo < spec.freq.front() || f_hi > spec.freq.back())
    throw ConfigError("peak_frequency: search band outside the spectrum axis");

  const double df = spec.resolution;
  std::size_t lo = static_cast<std::size_t>(std::ceil(f_lo / df));
  std::size_t hi = static_cast<std::size_t>(std::floor(f_hi / df));
  hi = std::min(hi, spec.freq.size() - 1);
  if (hi <= lo + 1)
    throw SolverError("band too narrow: fewer than 3 bins in [" +
                      std::to_string(f_lo) + ", " + std::to_string(f_hi) + "] Hz");

  std::size_t k_max = lo;
  for (std::size_t k = lo; k <= hi; ++k)
    if (spec.power[k] > spec.power[k_max]) k_max = k;
  if (k_max == lo || k_max == hi)
    throw SolverError("band too narrow: peak sits on the band edge at " +
                      std::to_string(spec.freq[k_max]) + " Hz");

  // Parabolic interpolation on log power, normalized by the peak bin so the
  // result is invariant under amplitude scaling.
  const double pk = spec.power[k_max];
  const double tiny = 1e-300;
  const double y1 = std::log((spec.power[k_max - 1] + tiny) / pk);
  const double y2 = 0.0;
  const double y3 = std::log((spec.power[k_max + 1] + tiny) / pk);
  const double denom = y1 - 2.0 * y2 + y3;
  double shift = 0.0;
  double curv_unc = df / 10.0;
  if (denom < 0.0) {
    shift = 0.5 * (y1 - y3) / denom;
    // Curvature-based width: bins to drop by 3 dB from the vertex.
    const double w3db = std::sqrt(2.0 * std::log(2.0) / -denom);
    curv_unc = df * w3db / 10.0;
  }
  shift = std::clamp(shift, -0.5, 0.5);

  PeakEstimate est;
  est.freq = (static_cast<double>(k_max) + shift) * df;
  est.uncertainty = std::max(df / 10.0, curv_unc);

  // Prominence: peak over the band median, discounted by the expected
  // maximum of exponentially distributed noise bins (max/median ~
  // ln(n)/ln 2), so a noise-only band scores ~0 dB.
  std::vector<double> band(spec.power.begin() + static_cast<long>(lo),
                           spec.power.begin() + static_cast<long>(hi) + 1);
  std::nth_element(band.begin(), band.begin() + band.size() / 2, band.end());
  const double med = band[band.size() / 2];
  const double noise_max = std::log(static_cast<double>(band.size())) /
                           std::log(2.0);
  est.prominence_db =
      10.0 * std::log10((pk + tiny) / (med * noise_max + tiny));
  est.low_confidence = est.prominence_db < 6.0;
  return est;
}

// ---------------------------------------------------------------------------
// Axial scan

std::vector<double> ScanResult::parameters(bool only_ok) const {
  std::vector<double> v;
  for (const auto& p : points)
    if (p.ok || !only_ok) v.push_back(p.parameter);
  return v;
}

std::vector<double> ScanResult::freqs(int radial_axis, bool only_ok) const {
  std::vector<double> v;
  for (const auto& p : points)
    if (p.ok || !only_ok) v.push_back(radial_axis == 0 ? p.freq_x : p.freq_y);
  return v;
}

namespace {

// Axial pseudopotential minimum along the trap axis (radial minimum tracked).
double axial_minimum(const trapmodel::FieldModel& model, const IonSpecies& ion,
                     double z_guess) {
  const Vector3d m =
      trapmodel::pseudo_minimum(model, ion, Vector3d(0.0, 0.0, z_guess));
  return m.z();
}

// Solves (vd_mean, vd_diff) so that the trap minimum sits at z_target with
// the axial curvature (omega_z) held at constant_axial. 2D Newton with a
// numeric Jacobian; works for any backend.
DriveConfig solve_endcaps(const ModelFactory& factory, const DriveConfig& base,
                          const IonSpecies& ion, double z_target,
                          double constant_axial) {
  DriveConfig d = base;
  double vd_mean = 0.5 * (base.v_d1 + base.v_d2);
  double vd_diff = 0.0;
  if (!(vd_mean > 0.0))
    throw ConfigError("solve_endcaps: base drive needs positive endcap voltages");

  auto eval = [&](double vm, double vdiff, double& z_min, double& wz) {
    d.v_d1 = vm + 0.5 * vdiff;
    d.v_d2 = vm - 0.5 * vdiff;
    auto model = factory(d);
    const double zm = axial_minimum(*model, ion, z_target);
    const auto modes = trapmodel::secular_frequencies(*model, ion, zm);
    z_min = modes.minimum.z();
    wz = modes.omega[2];
  };

  for (int iter = 0; iter < 30; ++iter) {
    double z_min, wz;
    eval(vd_mean, vd_diff, z_min, wz);
    const double ez = z_min - z_target;
    const double ew = wz - constant_axial;
    if (std::abs(ez) < 1e-10 && std::abs(ew) < 1e-6 * constant_axial) {
      d.v_d1 = vd_mean + 0.5 * vd_diff;
      d.v_d2 = vd_mean - 0.5 * vd_diff;
      return d;
    }
    const double h_m = std::max(1e-4 * vd_mean, 1e-6);
    const double h_d = std::max(1e-4 * std::abs(vd_diff), 1e-3);
    double z1, w1, z2, w2;
    eval(vd_mean + h_m, vd_diff, z1, w1);
    eval(vd_mean, vd_diff + h_d, z2, w2);
    Eigen::Matrix2d jac;
    jac << (z1 - z_min) / h_m, (z2 - z_min) / h_d,
           (w1 - wz) / h_m,    (w2 - wz) / h_d;
    const Eigen::Vector2d step = jac.fullPivLu().solve(Eigen::Vector2d(ez, ew));
    if (!step.allFinite())
      throw SolverError("endcap solve: singular Jacobian");
    vd_mean -= step(0);
    vd_diff -= step(1);
  }
  throw SolverError("endcap solve did not converge for z = " +
                    std::to_string(z_target));
}

}  // namespace

ScanResult scan_axial(const ModelFactory& factory, const DriveConfig& base,
                      const IonSpecies& ion,
                      const std::vector<double>& z_targets,
                      double constant_axial, const ScanOptions& opts) {
  ScanResult result;
  result.parameter_name = "z";
  result.points.reserve(z_targets.size());

  Eigen::Matrix3d prev_axes = Eigen::Matrix3d::Identity();
  bool have_prev = false;

  for (double z_t : z_targets) {
    ScanPoint pt;
    pt.parameter = z_t;
    try {
      const DriveConfig d = solve_endcaps(factory, base, ion, z_t, constant_axial);
      auto model = factory(d);
      auto modes = trapmodel::secular_frequencies(*model, ion, z_t);

      // Track mode identity by eigenvector overlap with the previous point.
      int ix = 0, iy = 1;
      if (have_prev) {
        const double keep = std::abs(modes.axes.col(0).dot(prev_axes.col(0))) +
                            std::abs(modes.axes.col(1).dot(prev_axes.col(1)));
        const double swap = std::abs(modes.axes.col(0).dot(prev_axes.col(1))) +
                            std::abs(modes.axes.col(1).dot(prev_axes.col(0)));
        if (swap > keep) std::swap(ix, iy);
      }

      const double dt = opts.dt > 0.0
                            ? opts.dt
                            : two_pi / model->omega_rf() / 200.0;
      dynamics::IonState init;
      init.position = modes.minimum +
                      opts.radial_offset * modes.axes.col(ix) +
                      opts.radial_offset * modes.axes.col(iy);
      const auto traj = dynamics::simulate(*model, ion, init, opts.record_time,
                                           dt, dynamics::ForceConfig{},
                                           opts.sample_stride);
      if (traj.escaped) throw SolverError("ion escaped during scan point");

      auto measure = [&](int mode_col) {
        const auto spec = power_spectrum(traj, Vector3d(modes.axes.col(mode_col)));
        const double f_pred = modes.omega[mode_col] / two_pi;
        return peak_frequency(spec, 0.85 * f_pred, 1.15 * f_pred);
      };
      const auto px = measure(ix);
      const auto py = measure(iy);
      pt.freq_x = px.freq;
      pt.unc_x = px.uncertainty;
      pt.freq_y = py.freq;
      pt.unc_y = py.uncertainty;
      pt.freq_z = modes.omega[2] / two_pi;
      pt.ok = true;

      prev_axes = modes.axes;
      if (ix != 0) {
        prev_axes.col(0) = modes.axes.col(1);
        prev_axes.col(1) = modes.axes.col(0);
      }
      have_prev = true;
    } catch (const Error& e) {
      pt.ok = false;
      pt.error = e.what();
    }
    result.points.push_back(pt);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Fits

Eq1Fit fit_eq1(const std::vector<double>& z, const std::vector<double>& omega) {
  const std::size_t n = z.size();
  if (n != omega.size()) throw ConfigError("fit_eq1: input length mismatch");
  if (n < 4) throw ConfigError("fit_eq1: need at least 4 points");

  // Initial guess from the linearized form omega ~ omega0 (1 + 2 p z).
  const LinearEpsFit lin = fit_linear_epsilon(z, omega);
  double w0 = lin.omega0;
  double p = 0.5 * lin.epsilon;

  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, 2);
  auto fill = [&](double w0_, double p_) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = 1.0 - p_ * z[i];
      if (!(std::abs(d) > 1e-12))
        throw SolverError("fit_eq1: model pole inside the data range");
      const double f = w0_ / (d * d);
      r(static_cast<long>(i)) = f - omega[i];
      jac(static_cast<long>(i), 0) = 1.0 / (d * d);
      jac(static_cast<long>(i), 1) = 2.0 * w0_ * z[i] / (d * d * d);
      ssr += (f - omega[i]) * (f - omega[i]);
    }
    return ssr;
  };

  double ssr = fill(w0, p);
  double lambda = 1e-3;
  Eq1Fit fit;
  const int max_iter = 200;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d jtr = jac.transpose() * r;

    // Scaled gradient convergence test.
    const double scale = std::sqrt(ssr / std::max<std::size_t>(n, 1)) *
                             jac.colwise().norm().maxCoeff() +
                         1e-300;
    if (jtr.norm() / scale < 1e-10) {
      fit.converged = true;
      break;
    }

    Eigen::Matrix2d damped = jtj;
    damped(0, 0) *= (1.0 + lambda);
    damped(1, 1) *= (1.0 + lambda);
    if (std::abs(damped.determinant()) <
        1e-14 * std::abs(damped(0, 0) * damped(1, 1)) + 1e-300) {
      throw SolverError("fit_eq1: degenerate data (rank-deficient Jacobian)");
    }
    const Eigen::Vector2d step = damped.ldlt().solve(jtr);
    const double w0_new = w0 - step(0);
    const double p_new = p - step(1);
    double ssr_new;
    try {
      ssr_new = fill(w0_new, p_new);
    } catch (const SolverError&) {
      lambda *= 10.0;
      fill(w0, p);
      continue;
    }
    if (ssr_new <= ssr * (1.0 + 1e-14)) {
      w0 = w0_new;
      p = p_new;
      ssr = ssr_new;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (step.norm() < 1e-14 * std::abs(w0)) {
        fit.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      fill(w0, p);
      if (lambda > 1e12) break;
    }
  }

  fill(w0, p);
  fit.omega0 = w0;
  fit.p = p;
  fit.iterations = iter;
  fit.residual_norm = std::sqrt(ssr);

  // Covariance from the Jacobian at the solution.
  if (n > 2) {
    const double sigma2 = ssr / static_cast<double>(n - 2);
    const Eigen::Matrix2d cov = (jac.transpose() * jac).inverse() * sigma2;
    fit.omega0_err = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.p_err = std::sqrt(std::max(0.0, cov(1, 1)));
  }
  return fit;
}

LinearEpsFit fit_linear_epsilon(const std::vector<double>& z,
                                const std::vector<double>& omega) {
  const std::size_t n = z.size();
  if (n != omega.size())
    throw ConfigError("fit_linear_epsilon: input length mismatch");
  if (n < 2) throw ConfigError("fit_linear_epsilon: need at least 2 points");

  double sz = 0.0, sw = 0.0, szz = 0.0, szw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sz += z[i];
    sw += omega[i];
    szz += z[i] * z[i];
    szw += z[i] * omega[i];
  }
  const double nn = static_cast<double>(n);
  const double det = nn * szz - sz * sz;
  if (!(std::abs(det) > 0.0))
    throw SolverError("fit_linear_epsilon: degenerate abscissae");
  const double slope = (nn * szw - sz * sw) / det;
  const double intercept = (szz * sw - sz * szw) / det;
  if (intercept == 0.0)
    throw SolverError("fit_linear_epsilon: zero intercept");

  LinearEpsFit fit;
  fit.omega0 = intercept;
  fit.epsilon = slope / intercept;

  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = omega[i] - (intercept + slope * z[i]);
      ssr += e * e;
    }
    const double sigma2 = ssr / static_cast<double>(n - 2);
    const double var_slope = sigma2 * nn / det;
    const double var_inter = sigma2 * szz / det;
    fit.omega0_err = std::sqrt(var_inter);
    const double rel = std::sqrt(var_slope / (slope * slope + 1e-300) +
                                 var_inter / (intercept * intercept));
    fit.epsilon_err = std::abs(fit.epsilon) * rel;
    if (slope == 0.0) fit.epsilon_err = std::sqrt(var_slope) / std::abs(intercept);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Micromotion

double micromotion_metric(const TrajectoryRecord& traj, double omega_rf) {
  if (!(omega_rf > 0.0)) throw ConfigError("micromotion_metric: omega_rf must be > 0");
  const double t_rf = two_pi / omega_rf;
  if (traj.span() < 100.0 * t_rf)
    throw ConfigError("micromotion_metric: record must span >= 100 RF cycles");

  // Use the largest whole number of RF cycles that fits the record.
  const double t0 = traj.samples.front().time;
  const double n_cycles = std::floor(traj.span() / t_rf);
  const double t_window = n_cycles * t_rf;

  Eigen::Vector3cd acc = Eigen::Vector3cd::Zero();
  long long count = 0;
  for (const auto& s : traj.samples) {
    const double t = s.time - t0;
    if (t > t_window) break;
    const std::complex<double> w(std::cos(omega_rf * t), -std::sin(omega_rf * t));
    for (int axis = 0; axis < 3; ++axis) acc(axis) += s.velocity(axis) * w;
    ++count;
  }
  double metric = 0.0;
  for (int axis = 0; axis < 3; ++axis)
    metric += 2.0 * std::abs(acc(axis)) / static_cast<double>(count);
  return metric;
}

// ---------------------------------------------------------------------------
// Compensation search

namespace {

double compensation_metric(const ModelFactory& factory, const DriveConfig& base,
                           const IonSpecies& ion, double dv13, double dv24,
                           const CompensateOptions& opts) {
  DriveConfig d = base;
  d.v_comp[0] = base.v_comp[0] + 0.5 * dv13;
  d.v_comp[2] = base.v_comp[2] - 0.5 * dv13;
  d.v_comp[1] = base.v_comp[1] + 0.5 * dv24;
  d.v_comp[3] = base.v_comp[3] - 0.5 * dv24;
  auto model = factory(d);

  const double t_rf = two_pi / model->omega_rf();
  const double dt = opts.dt > 0.0 ? opts.dt : t_rf / 200.0;

  dynamics::IonState init;
  init.position = trapmodel::pseudo_minimum(*model, ion, Vector3d::Zero());

  const double duration = (opts.settle_cycles + opts.measure_cycles) * t_rf;
  const auto traj =
      dynamics::simulate(*model, ion, init, duration, dt, dynamics::ForceConfig{}, 1);
  if (traj.escaped)
    throw SolverError("compensation metric: ion escaped");

  // Drop the settle portion.
  TrajectoryRecord tail;
  tail.dt = traj.dt;
  tail.sample_stride = traj.sample_stride;
  const double t_cut = traj.samples.front().time + opts.settle_cycles * t_rf;
  for (const auto& s : traj.samples)
    if (s.time >= t_cut) tail.samples.push_back(s);
  return micromotion_metric(tail, model->omega_rf());
}

}  // namespace

CompensationResult compensate(const ModelFactory& factory,
                              const DriveConfig& base, const IonSpecies& ion,
                              std::pair<double, double> box13,
                              std::pair<double, double> box24,
                              const CompensateOptions& opts) {
  if (!(box13.first < box13.second) || !(box24.first < box24.second))
    throw ConfigError("compensate: search box bounds must be ordered");

  int evals = 0;
  auto objective = [&](double a, double b) {
    ++evals;
    const double ca = std::clamp(a, box13.first, box13.second);
    const double cb = std::clamp(b, box24.first, box24.second);
    double penalty = 0.0;
    if (ca != a || cb != b)
      penalty = 1e3 * (std::abs(ca - a) + std::abs(cb - b));
    return compensation_metric(factory, base, ion, ca, cb, opts) * (1.0 + penalty) +
           penalty;
  };

  // Nelder-Mead on (dv13, dv24).
  struct Vertex {
    double a, b, f;
  };
  const double c13 = 0.5 * (box13.first + box13.second);
  const double c24 = 0.5 * (box24.first + box24.second);
  const double s13 = 0.25 * (box13.second - box13.first);
  const double s24 = 0.25 * (box24.second - box24.first);
  std::array<Vertex, 3> simplex{
      Vertex{c13, c24, objective(c13, c24)},
      Vertex{c13 + s13, c24, objective(c13 + s13, c24)},
      Vertex{c13, c24 + s24, objective(c13, c24 + s24)}};

  auto diameter = [&]() {
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        d = std::max(d, std::hypot(simplex[i].a - simplex[j].a,
                                   simplex[i].b - simplex[j].b));
    return d;
  };

  while (diameter() > opts.simplex_tol && evals < opts.max_evaluations) {
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& u, const Vertex& v) { return u.f < v.f; });
    const Vertex& best = simplex[0];
    const Vertex& worst = simplex[2];
    const double ca = 0.5 * (simplex[0].a + simplex[1].a);
    const double cb = 0.5 * (simplex[0].b + simplex[1].b);

    Vertex refl{ca + (ca - worst.a), cb + (cb - worst.b), 0.0};
    refl.f = objective(refl.a, refl.b);
    if (refl.f < best.f) {
      Vertex exp_{ca + 2.0 * (ca - worst.a), cb + 2.0 * (cb - worst.b), 0.0};
      exp_.f = objective(exp_.a, exp_.b);
      simplex[2] = exp_.f < refl.f ? exp_ : refl;
    } else if (refl.f < simplex[1].f) {
      simplex[2] = refl;
    } else {
      Vertex contr{ca + 0.5 * (worst.a - ca), cb + 0.5 * (worst.b - cb), 0.0};
      contr.f = objective(contr.a, contr.b);
      if (contr.f < worst.f) {
        simplex[2] = contr;
      } else {
        for (int i = 1; i < 3; ++i) {
          simplex[i].a = best.a + 0.5 * (simplex[i].a - best.a);
          simplex[i].b = best.b + 0.5 * (simplex[i].b - best.b);
          simplex[i].f = objective(simplex[i].a, simplex[i].b);
        }
      }
    }
  }

  std::sort(simplex.begin(), simplex.end(),
            [](const Vertex& u, const Vertex& v) { return u.f < v.f; });
  CompensationResult res;
  res.dv13 = std::clamp(simplex[0].a, box13.first, box13.second);
  res.dv24 = std::clamp(simplex[0].b, box24.first, box24.second);
  res.metric = simplex[0].f;
  res.evaluations = evals;
  const double edge13 = 0.02 * (box13.second - box13.first);
  const double edge24 = 0.02 * (box24.second - box24.first);
  res.on_boundary = res.dv13 < box13.first + edge13 ||
                    res.dv13 > box13.second - edge13 ||
                    res.dv24 < box24.first + edge24 ||
                    res.dv24 > box24.second - edge24;
  return res;
}

}  // namespace tapertrap::analysis
