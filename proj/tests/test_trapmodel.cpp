#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tapertrap/constants.hpp"
#include "tapertrap/trapmodel.hpp"

using namespace tapertrap;
using namespace tapertrap::trapmodel;
using constants::pi;
using constants::two_pi;
using Eigen::Vector3d;

namespace {

DriveConfig symmetric_drive(double v = 95.0) {
  DriveConfig d = DriveConfig::paper();
  d.v_rf1 = d.v_rf2 = v;
  d.phase_diff = pi;
  return d;
}

DriveConfig calibrated_drive() {
  static const DriveConfig d = calibrate_drive(
      TrapGeometry::paper(), IonSpecies::calcium40(), two_pi * 1.145e6,
      two_pi * 99.8e3, DriveConfig::paper());
  return d;
}

}  // namespace

TEST_CASE("type invariants are enforced") {
  CHECK_THROWS_AS((IonSpecies{0.0, 1.0, "bad"}.validate()), ConfigError);
  CHECK_THROWS_AS((IonSpecies{1.0, 0.0, "bad"}.validate()), ConfigError);
  CHECK_NOTHROW(IonSpecies::calcium40().validate());

  TrapGeometry g = TrapGeometry::paper();
  CHECK_NOTHROW(g.validate());
  g.taper_angle = pi / 3.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = TrapGeometry::paper();
  g.r0 = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);

  DriveConfig d = DriveConfig::paper();
  CHECK_NOTHROW(d.validate());
  d.phase_diff = pi / 2.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("analytic potential: RF node, parity and frozen value") {
  const AnalyticFieldModel model(TrapGeometry::paper(), symmetric_drive());

  // quadrupole node on the axis: zero RF contribution at any time
  for (double t : {0.0, 1e-8, 3.7e-8})
    CHECK(model.potential({0.0, 0.0, 0.0}, t) ==
          doctest::Approx(0.0).epsilon(1e-15));

  // even parity in x and y (no compensation voltages)
  const Vector3d r(43e-6, -17e-6, 120e-6);
  const Vector3d r_flip(-r.x(), -r.y(), r.z());
  for (double t : {0.0, 2.3e-8})
    CHECK(model.potential(r, t) == doctest::Approx(model.potential(r_flip, t))
                                       .epsilon(1e-14));

  // frozen oracle: direct evaluation of v1 x^2 / rho0^2 at
  // (50 um, 0, 0), v_rf = 95 V, r0 = 0.639 mm, t = 0, no DC voltages
  TrapGeometry g = TrapGeometry::paper();
  g.r0 = 0.639e-3;
  DriveConfig rf_only = symmetric_drive();
  rf_only.v_d1 = rf_only.v_d2 = 0.0;
  const AnalyticFieldModel m2(g, rf_only);
  CHECK(m2.potential({50e-6, 0.0, 0.0}, 0.0) ==
        doctest::Approx(0.5816502212719894).epsilon(1e-12));
}

TEST_CASE("analytic potential is RF periodic") {
  const AnalyticFieldModel model(TrapGeometry::paper(), DriveConfig::paper());
  const double t_rf = two_pi / model.omega_rf();
  const Vector3d r(30e-6, 20e-6, -40e-6);
  for (double t : {0.0, 0.3e-8, 1.1e-8}) {
    CHECK(model.potential(r, t) ==
          doctest::Approx(model.potential(r, t + t_rf)).epsilon(1e-9));
  }
}

TEST_CASE("validity region errors name the violated bound") {
  const AnalyticFieldModel model(TrapGeometry::paper(), DriveConfig::paper());
  CHECK_THROWS_WITH_AS(model.potential({0.0, 0.0, 2.5e-3}, 0.0),
                       doctest::Contains("blade_length"), DomainError);
  CHECK_NOTHROW(model.potential({0.0, 0.0, 1.9e-3}, 0.0));
}

TEST_CASE("gradient matches central differences at random valid points") {
  const AnalyticFieldModel model(TrapGeometry::paper(), DriveConfig::paper());
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> ux(-3e-4, 3e-4), uz(-1.5e-3, 1.5e-3),
      ut(0.0, two_pi / model.omega_rf());
  const double h = 1e-8;
  for (int i = 0; i < 100; ++i) {
    const Vector3d r(ux(rng), ux(rng), uz(rng));
    const double t = ut(rng);
    const Vector3d g = model.gradient(r, t);
    for (int k = 0; k < 3; ++k) {
      Vector3d rp = r, rm = r;
      rp[k] += h;
      rm[k] -= h;
      const double fd = (model.potential(rp, t) - model.potential(rm, t)) / (2 * h);
      CHECK(std::abs(g[k] - fd) <= 1e-6 * std::max(std::abs(g[k]), 1e-3));
    }
  }
}

TEST_CASE("RF Laplacian residual bounded, static part harmonic") {
  // delta = 1.8% as in the published simulation
  DriveConfig d = symmetric_drive(95.0);
  d.v_rf1 = 95.0 * (1.0 - 0.009);
  d.v_rf2 = 95.0 * (1.0 + 0.009);
  const TrapGeometry g = TrapGeometry::paper();
  const AnalyticFieldModel model(g, d);

  const double h = 1e-7;
  auto laplacian = [&](auto&& f, const Vector3d& r) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      Vector3d rp = r, rm = r;
      rp[k] += h;
      rm[k] -= h;
      acc += (f(rp) - 2.0 * f(r) + f(rm)) / (h * h);
    }
    return acc;
  };
  auto envelope_a = [&](const Vector3d& r) {
    double a, b;
    model.rf_envelope(r, a, b);
    return a;
  };
  auto static_part = [&](const Vector3d& r) { return model.static_potential(r); };

  for (double z : {-100e-6, -50e-6, 0.0, 50e-6, 100e-6}) {
    const double quad_curv = 2.0 * d.v_rf_mean() / (g.rho(z) * g.rho(z));
    for (double x : {-3e-4, -1e-4, 1e-4, 3e-4}) {
      for (double y : {-3e-4, 1e-4, 2e-4}) {
        const Vector3d r(x, y, z);
        CHECK(std::abs(laplacian(envelope_a, r)) / quad_curv < 0.05);
        CHECK(std::abs(laplacian(static_part, r)) / quad_curv < 1e-6);
      }
    }
  }
}

TEST_CASE("pseudopotential: node, quadratic scaling and gradient oracle") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();

  SUBCASE("zero RF term on the axis") {
    DriveConfig d = symmetric_drive();
    d.v_d1 = d.v_d2 = 0.0;  // isolate the RF term
    const AnalyticFieldModel model(g, d);
    for (double z : {-1e-3, 0.0, 1e-3})
      CHECK(pseudopotential(model, ion, {0.0, 0.0, z}) ==
            doctest::Approx(0.0).epsilon(1e-18));
  }

  SUBCASE("doubling both RF amplitudes quadruples the RF term exactly") {
    DriveConfig d = DriveConfig::paper();
    d.v_d1 = d.v_d2 = 0.0;
    DriveConfig d2 = d;
    d2.v_rf1 *= 2.0;
    d2.v_rf2 *= 2.0;
    const AnalyticFieldModel m1(g, d), m2(g, d2);
    for (const Vector3d& r :
         {Vector3d(10e-6, 0, 0), Vector3d(25e-6, -40e-6, 80e-6),
          Vector3d(0, 55e-6, -35e-6)}) {
      CHECK(pseudopotential(m2, ion, r) == 4.0 * pseudopotential(m1, ion, r));
    }
  }

  SUBCASE("matches the finite-difference envelope-gradient oracle") {
    const AnalyticFieldModel model(g, DriveConfig::paper());
    const Vector3d r(10e-6, 0.0, 0.0);
    // oracle: central differences of the quadrature envelopes
    const double h = 1e-9;
    double ga2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      Vector3d rp = r, rm = r;
      rp[k] += h;
      rm[k] -= h;
      double ap, bp, am, bm;
      model.rf_envelope(rp, ap, bp);
      model.rf_envelope(rm, am, bm);
      const double da = (ap - am) / (2 * h);
      const double db = (bp - bm) / (2 * h);
      ga2 += da * da + db * db;
    }
    const double q = ion.charge;
    const double expect =
        q * q * ga2 / (4.0 * ion.mass * model.omega_rf() * model.omega_rf());
    const double rf_term = pseudopotential(model, ion, r) -
                           q * model.static_potential(r);
    CHECK(rf_term == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("secular frequencies: degeneracy, calibration and paper values") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();

  SUBCASE("symmetric drive gives degenerate radial modes") {
    const AnalyticFieldModel model(g, symmetric_drive());
    const auto modes = secular_frequencies(model, ion, 0.0);
    CHECK(modes.omega[0] == doctest::Approx(modes.omega[1]).epsilon(1e-6));
    CHECK(modes.omega[2] > 0.0);
  }

  SUBCASE("calibrated drive reproduces the published operating point") {
    const AnalyticFieldModel model(g, calibrated_drive());
    const auto modes = secular_frequencies(model, ion, 0.0);
    // 1.14 / 1.15 MHz radial pair (8 kHz splitting at 1.145 MHz mean)
    CHECK(modes.omega[0] / two_pi == doctest::Approx(1.141e6).epsilon(2e-3));
    CHECK(modes.omega[1] / two_pi == doctest::Approx(1.149e6).epsilon(2e-3));
    CHECK(modes.omega[2] / two_pi == doctest::Approx(99.8e3).epsilon(1e-4));
    CHECK(modes.omega[1] - modes.omega[0] ==
          doctest::Approx(two_pi * 8e3).epsilon(0.02));
  }

  SUBCASE("unstable configuration raises") {
    DriveConfig d = symmetric_drive(0.1);  // far too weak vs the endcap defocus
    const AnalyticFieldModel model(g, d);
    CHECK_THROWS_AS(secular_frequencies(model, ion, 0.0), UnstableError);
  }
}

TEST_CASE("radial_freq_eq1: identity, slope, frozen value, domain") {
  const double theta = 10.0 * pi / 180.0;
  const double r0 = 0.6389e-3;
  const double w0 = two_pi * 1.14e6;

  CHECK(radial_freq_eq1(0.0, w0, theta, r0) == w0);

  // first-order slope: eps = 2 tan(theta) / r0 = 0.552 / mm
  const double dz = 1e-9;
  const double eps = (radial_freq_eq1(dz, w0, theta, r0) -
                      radial_freq_eq1(-dz, w0, theta, r0)) /
                     (2.0 * dz * w0);
  CHECK(eps == doctest::Approx(0.552e3).epsilon(1e-3));

  // frozen oracle: z = 100 um -> omega0 / (1 - 0.027599)^2
  CHECK(radial_freq_eq1(100e-6, w0, theta, r0) / w0 ==
        doctest::Approx(1.0575691721281664).epsilon(1e-12));

  // strictly increasing for positive taper
  double prev = radial_freq_eq1(-200e-6, w0, theta, r0);
  for (double z = -150e-6; z <= 200e-6; z += 50e-6) {
    const double w = radial_freq_eq1(z, w0, theta, r0);
    CHECK(w > prev);
    prev = w;
  }

  CHECK_THROWS_AS(radial_freq_eq1(4e-3, w0, theta, r0), DomainError);
}

TEST_CASE("Eq-form consistency of the analytic model over the scan range") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();
  const AnalyticFieldModel model(g, calibrated_drive());
  const auto modes0 = secular_frequencies(model, ion, 0.0);

  for (double z = -50e-6; z <= 100.5e-6; z += 25e-6) {
    const auto modes = secular_frequencies(model, ion, z);
    for (int axis = 0; axis < 2; ++axis) {
      const double predicted =
          radial_freq_eq1(z, modes0.omega[axis], g.taper_angle, g.r0);
      CHECK(modes.omega[axis] ==
            doctest::Approx(predicted).epsilon(5e-3));
    }
  }
}

TEST_CASE("radial splitting is linear in the drive asymmetry") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();
  const double v_mean = calibrated_drive().v_rf_mean();
  for (double delta : {0.005, 0.01, 0.02, 0.03}) {
    DriveConfig d = calibrated_drive();
    d.v_rf1 = v_mean * (1.0 - 0.5 * delta);
    d.v_rf2 = v_mean * (1.0 + 0.5 * delta);
    const AnalyticFieldModel model(g, d);
    const auto modes = secular_frequencies(model, ion, 0.0);
    const double rel_split = (modes.omega[1] - modes.omega[0]) /
                             (0.5 * (modes.omega[0] + modes.omega[1]));
    CHECK(rel_split == doctest::Approx(delta).epsilon(0.05));
  }
}

TEST_CASE("mathieu parameters") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();

  SUBCASE("endcap-only static curvature gives a_x = a_y < 0") {
    const auto p = mathieu_parameters(g, symmetric_drive(), ion);
    CHECK(p.a_x == doctest::Approx(p.a_y).epsilon(1e-9));
    CHECK(p.a_x < 0.0);
    CHECK(p.stable);
  }

  SUBCASE("operating point: q ~ 2 sqrt2 nu_sec / nu_rf ~ 0.289") {
    const auto p = mathieu_parameters(g, calibrated_drive(), ion);
    // derived from the published 1.14 MHz / 11.17 MHz ratio
    CHECK(p.q_x == doctest::Approx(0.289).epsilon(0.035));
    CHECK(p.q_y == doctest::Approx(0.289).epsilon(0.035));
    CHECK(p.stable);
  }

  SUBCASE("q scales linearly with the RF amplitude") {
    DriveConfig d = calibrated_drive();
    DriveConfig d2 = d;
    d2.v_rf1 *= 2.0;
    d2.v_rf2 *= 2.0;
    const auto p1 = mathieu_parameters(g, d, ion);
    const auto p2 = mathieu_parameters(g, d2, ion);
    CHECK(p2.q_x == doctest::Approx(2.0 * p1.q_x).epsilon(1e-12));
    CHECK(p2.q_y == doctest::Approx(2.0 * p1.q_y).epsilon(1e-12));
  }

  SUBCASE("over-driven trap is flagged unstable") {
    DriveConfig d = calibrated_drive();
    d.v_rf1 *= 4.0;
    d.v_rf2 *= 4.0;  // q ~ 1.16
    const auto p = mathieu_parameters(g, d, ion);
    CHECK_FALSE(p.stable);
  }
}

TEST_CASE("calibrate_drive") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();

  SUBCASE("fixed point: calibrating to the model's own frequencies") {
    const DriveConfig d = calibrated_drive();
    const AnalyticFieldModel model(g, d);
    const auto modes = secular_frequencies(model, ion, 0.0);
    const DriveConfig d2 = calibrate_drive(
        g, ion, 0.5 * (modes.omega[0] + modes.omega[1]), modes.omega[2], d);
    CHECK(d2.v_rf1 == doctest::Approx(d.v_rf1).epsilon(1e-3));
    CHECK(d2.v_rf2 == doctest::Approx(d.v_rf2).epsilon(1e-3));
    CHECK(d2.v_d1 == doctest::Approx(d.v_d1).epsilon(1e-3));
  }

  SUBCASE("round trip at the published targets") {
    const DriveConfig d = calibrated_drive();
    const AnalyticFieldModel model(g, d);
    const auto modes = secular_frequencies(model, ion, 0.0);
    CHECK(0.5 * (modes.omega[0] + modes.omega[1]) ==
          doctest::Approx(two_pi * 1.145e6).epsilon(1e-3));
    CHECK(modes.omega[2] == doctest::Approx(two_pi * 99.8e3).epsilon(1e-3));
  }

  SUBCASE("doubling the targets doubles v_rf within 0.1%") {
    const DriveConfig d1 = calibrate_drive(g, ion, two_pi * 1.145e6,
                                           two_pi * 99.8e3, DriveConfig::paper());
    const DriveConfig d2 = calibrate_drive(g, ion, two_pi * 2.29e6,
                                           two_pi * 199.6e3, DriveConfig::paper());
    CHECK(d2.v_rf_mean() ==
          doctest::Approx(2.0 * d1.v_rf_mean()).epsilon(1e-3));
    // with the axial target held instead, the endcap defocus shifts the
    // scaling by ~(3/8)(wz/wr)^2 ~ 0.14%
    const DriveConfig d3 = calibrate_drive(g, ion, two_pi * 2.29e6,
                                           two_pi * 99.8e3, DriveConfig::paper());
    CHECK(d3.v_rf_mean() ==
          doctest::Approx(2.0 * d1.v_rf_mean()).epsilon(2.5e-3));
  }

  SUBCASE("unreachable target raises a calibration error") {
    CHECK_THROWS_AS(calibrate_drive(g, ion, two_pi * 5e6, two_pi * 99.8e3,
                                    DriveConfig::paper()),
                    SolverError);
    CHECK_THROWS_AS(calibrate_drive(g, ion, -1.0, two_pi * 99.8e3,
                                    DriveConfig::paper()),
                    ConfigError);
  }
}

TEST_CASE("principal axis angle") {
  const TrapGeometry g = TrapGeometry::paper();
  const IonSpecies ion = IonSpecies::calcium40();

  auto with_common_mode = [](DriveConfig d, double vc) {
    d.v_comp = {vc, vc, vc, vc};
    return d;
  };

  SUBCASE("pure blade asymmetry without cross term: angle 0") {
    const AnalyticFieldModel model(g, calibrated_drive());
    CHECK(std::abs(principal_axis_angle(model, ion, 0.0)) < 1e-6);
  }

  SUBCASE("increasing common-mode voltage rotates clockwise") {
    double prev = 0.1;  // above any reachable angle
    for (double vc : {10.0, 30.0, 62.5, 100.0, 150.0}) {
      const AnalyticFieldModel model(g, with_common_mode(calibrated_drive(), vc));
      const double ang = principal_axis_angle(model, ion, 0.0);
      CHECK(ang < prev);
      CHECK(ang > -pi / 4.0);
      prev = ang;
    }
  }

  SUBCASE("calibrated beta_quad_xy puts the half rotation at 62.5 V") {
    const AnalyticFieldModel model(g, with_common_mode(calibrated_drive(), 62.5));
    const double ang = principal_axis_angle(model, ion, 0.0);
    CHECK(ang == doctest::Approx(-pi / 8.0).epsilon(0.05));
  }

  SUBCASE("odd symmetry for a symmetric drive") {
    DriveConfig base = calibrated_drive();
    const double v_mean = base.v_rf_mean();
    base.v_rf1 = base.v_rf2 = v_mean;  // kill the intrinsic asymmetry
    const AnalyticFieldModel mp(g, with_common_mode(base, 40.0));
    const AnalyticFieldModel mm(g, with_common_mode(base, -40.0));
    const double ap = principal_axis_angle(mp, ion, 0.0);
    const double am = principal_axis_angle(mm, ion, 0.0);
    CHECK(ap == doctest::Approx(-am).epsilon(1e-9));
    CHECK(std::abs(ap) == doctest::Approx(pi / 4.0).epsilon(1e-9));
  }

  SUBCASE("degenerate modes raise an undefined-axes error") {
    DriveConfig base = calibrated_drive();
    base.v_rf1 = base.v_rf2 = base.v_rf_mean();
    const AnalyticFieldModel model(g, base);
    CHECK_THROWS_WITH_AS(principal_axis_angle(model, ion, 0.0),
                         doctest::Contains("undefined axes"), UnstableError);
  }
}
