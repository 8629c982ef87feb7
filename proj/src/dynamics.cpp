#include "tapertrap/dynamics.hpp"

#include <cmath>
#include <complex>
#include <random>

#include "tapertrap/constants.hpp"

namespace tapertrap::dynamics {

void ForceConfig::validate() const {
  if (drag_coefficient < 0.0) throw ConfigError("drag_coefficient must be >= 0");
  if (kick_rate < 0.0) throw ConfigError("kick_rate must be >= 0");
  if (mod_force_amp != 0.0 &&
      std::abs(mod_direction.norm() - 1.0) > 1e-9)
    throw ConfigError("mod_direction must be a unit vector");
}

namespace {

// Acceleration from trap field, modulated push and drag. Modulation time is
// measured from t_mod0 so a sweep can restart the phase per segment.
struct Forcing {
  const FieldModel& model;
  const IonSpecies& ion;
  const ForceConfig& forces;
  double t_mod0 = 0.0;

  Vector3d accel(const Vector3d& r, const Vector3d& v, double t) const {
    Vector3d f = -ion.charge * model.gradient(r, t);
    if (forces.mod_force_amp != 0.0) {
      const double s =
          0.5 * (1.0 + std::sin(forces.mod_freq * (t - t_mod0)));
      f += forces.mod_force_amp * s * forces.mod_direction;
    }
    if (forces.drag_coefficient != 0.0) f -= forces.drag_coefficient * v;
    return f / ion.mass;
  }
};

struct KickSource {
  std::mt19937_64 rng;
  std::poisson_distribution<int> n_kicks;
  std::uniform_real_distribution<double> uni{0.0, 1.0};
  double dv = 0.0;  // speed increment per kick

  KickSource(const ForceConfig& forces, const IonSpecies& ion, double dt)
      : rng(forces.rng_seed),
        n_kicks(forces.kick_rate * std::abs(dt)),
        dv(forces.kick_momentum / ion.mass) {}

  void apply(Vector3d& v) {
    const int n = n_kicks(rng);
    for (int k = 0; k < n; ++k) {
      // isotropic direction via uniform cos(theta)
      const double cos_t = 2.0 * uni(rng) - 1.0;
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const double phi = constants::two_pi * uni(rng);
      v += dv * Vector3d(sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t);
    }
  }
};

// Core stepper: keeps the acceleration of the current state so each step
// costs one field evaluation.
class VerletWalker {
 public:
  VerletWalker(const Forcing& forcing, IonState state, double dt)
      : forcing_(forcing), s_(std::move(state)), dt_(dt) {
    a_ = forcing_.accel(s_.position, s_.velocity, s_.time);
  }

  const IonState& state() const { return s_; }

  // Advances one step; throws DomainError if the field evaluation leaves the
  // validity region.
  void step() {
    const Vector3d v_half = s_.velocity + 0.5 * dt_ * a_;
    s_.position += dt_ * v_half;
    const double t_new = s_.time + dt_;
    const Vector3d a_new = forcing_.accel(s_.position, v_half, t_new);
    s_.velocity = v_half + 0.5 * dt_ * a_new;
    s_.time = t_new;
    a_ = a_new;
  }

  void add_velocity_noise(KickSource& kicks) {
    kicks.apply(s_.velocity);
  }

  void refresh_accel() {
    a_ = forcing_.accel(s_.position, s_.velocity, s_.time);
  }

 private:
  Forcing forcing_;
  IonState s_;
  double dt_;
  Vector3d a_;
};

void check_dt_bound(const FieldModel& model, double dt) {
  if (model.has_rf() && model.omega_rf() > 0.0) {
    const double bound = constants::two_pi / 50.0 / model.omega_rf();
    if (std::abs(dt) > bound * (1.0 + 1e-12))
      throw ConfigError("dt too coarse: need >= 50 steps per RF cycle (dt <= " +
                        std::to_string(bound) + " s)");
  }
}

}  // namespace

IonState step_verlet(const IonState& state, const FieldModel& model,
                     const IonSpecies& ion, const ForceConfig& forces,
                     double dt) {
  if (dt == 0.0) throw ConfigError("step_verlet: dt must be nonzero");
  forces.validate();
  model.check_validity(state.position);
  VerletWalker walker(Forcing{model, ion, forces}, state, dt);
  walker.step();
  model.check_validity(walker.state().position);
  return walker.state();
}

TrajectoryRecord simulate(const FieldModel& model, const IonSpecies& ion,
                          const IonState& initial, double duration, double dt,
                          const ForceConfig& forces, int sample_stride) {
  if (!(dt > 0.0)) throw ConfigError("simulate: dt must be > 0");
  if (!(duration > 0.0)) throw ConfigError("simulate: duration must be > 0");
  if (sample_stride < 1) throw ConfigError("simulate: sample_stride must be >= 1");
  check_dt_bound(model, dt);
  forces.validate();
  model.check_validity(initial.position);

  TrajectoryRecord rec;
  rec.dt = dt;
  rec.sample_stride = sample_stride;

  const long long n_steps =
      static_cast<long long>(std::floor(duration / dt * (1.0 + 1e-12)));
  rec.samples.reserve(static_cast<std::size_t>(n_steps / sample_stride) + 1);

  VerletWalker walker(Forcing{model, ion, forces}, initial, dt);
  KickSource kicks(forces, ion, dt);
  const bool stochastic = forces.stochastic();

  rec.samples.push_back(walker.state());
  for (long long step = 1; step <= n_steps; ++step) {
    try {
      walker.step();
    } catch (const DomainError&) {
      rec.escaped = true;
      break;
    }
    if (stochastic) {
      walker.add_velocity_noise(kicks);
      walker.refresh_accel();
    }
    if (!model.contains(walker.state().position)) {
      rec.escaped = true;
      rec.samples.push_back(walker.state());
      break;
    }
    if (step % sample_stride == 0) rec.samples.push_back(walker.state());
  }
  return rec;
}

SweepResult excitation_sweep(const FieldModel& model, const IonSpecies& ion,
                             const ForceConfig& forces_template,
                             const std::vector<double>& freq_list,
                             SweepDirection direction, double settle_time,
                             double measure_time, double dt,
                             const IonState& initial) {
  if (!(dt > 0.0)) throw ConfigError("excitation_sweep: dt must be > 0");
  check_dt_bound(model, dt);
  for (std::size_t i = 1; i < freq_list.size(); ++i) {
    const bool ordered = direction == SweepDirection::up
                             ? freq_list[i] > freq_list[i - 1]
                             : freq_list[i] < freq_list[i - 1];
    if (!ordered)
      throw ConfigError("excitation_sweep: freq_list not sorted for the "
                        "requested direction");
  }
  model.check_validity(initial.position);

  SweepResult result;
  result.points.reserve(freq_list.size());
  IonState state = initial;

  for (double freq : freq_list) {
    ForceConfig forces = forces_template;
    forces.mod_freq = freq;
    Forcing forcing{model, ion, forces, state.time};

    const double period = constants::two_pi / freq;
    const long long n_settle =
        static_cast<long long>(std::ceil(settle_time / dt));
    const long long periods =
        std::max<long long>(1, static_cast<long long>(measure_time / period));
    const long long n_measure =
        static_cast<long long>(std::llround(periods * period / dt));

    VerletWalker walker(forcing, state, dt);
    KickSource kicks(forces, ion, dt);
    const bool stochastic = forces.stochastic();

    auto advance = [&]() -> bool {
      try {
        walker.step();
      } catch (const DomainError&) {
        return false;
      }
      if (stochastic) {
        walker.add_velocity_noise(kicks);
        walker.refresh_accel();
      }
      return model.contains(walker.state().position);
    };

    bool alive = true;
    for (long long i = 0; i < n_settle && alive; ++i) alive = advance();

    // Single-bin demodulation of the displacement at the drive frequency.
    Eigen::Vector3cd acc = Eigen::Vector3cd::Zero();
    Vector3d mean = Vector3d::Zero();
    const double t0 = walker.state().time;
    long long n_acc = 0;
    for (long long i = 0; i < n_measure && alive; ++i) {
      alive = advance();
      if (!alive) break;
      const double ph = freq * (walker.state().time - t0);
      const std::complex<double> w(std::cos(ph), -std::sin(ph));
      for (int axis = 0; axis < 3; ++axis)
        acc(axis) += walker.state().position(axis) * w;
      mean += walker.state().position;
      ++n_acc;
    }

    if (!alive) {
      result.escaped = true;
      break;
    }

    SweepPoint pt;
    pt.freq = freq;
    // The mean only shifts the zero-frequency bin; over whole periods the
    // demodulated component is unaffected, so no explicit subtraction needed
    // beyond guarding against tiny leakage:
    mean /= static_cast<double>(n_acc);
    Eigen::Vector3cd dc_leak = Eigen::Vector3cd::Zero();
    {
      // Remove the residual leakage of the DC offset into the bin (finite
      // window): subtract mean * sum(w).
      std::complex<double> wsum(0.0, 0.0);
      // Recompute sum of the demodulation phasor over the same samples.
      // sum_{k=1..n} e^{-i w k dt} closed form:
      const std::complex<double> z(std::cos(freq * dt), -std::sin(freq * dt));
      if (std::abs(z - 1.0) > 1e-15)
        wsum = z * (std::complex<double>(1.0, 0.0) -
                    std::pow(z, static_cast<double>(n_acc))) /
               (std::complex<double>(1.0, 0.0) - z);
      else
        wsum = static_cast<double>(n_acc);
      for (int axis = 0; axis < 3; ++axis) dc_leak(axis) = mean(axis) * wsum;
    }
    for (int axis = 0; axis < 3; ++axis)
      pt.amplitude(axis) =
          2.0 * std::abs(acc(axis) - dc_leak(axis)) / static_cast<double>(n_acc);
    result.points.push_back(pt);
    state = walker.state();
  }
  return result;
}

}  // namespace tapertrap::dynamics
