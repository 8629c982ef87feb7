#include <iostream>
#include "support/testfields.hpp"
#include "tapertrap/dynamics.hpp"
#include "tapertrap/constants.hpp"
using namespace tapertrap; using namespace tapertrap::dynamics;
using constants::two_pi; using Eigen::Vector3d;
int main() {
  const auto ion = trapmodel::IonSpecies::calcium40();
  const auto d = trapmodel::calibrate_drive(trapmodel::TrapGeometry::paper(), ion,
      two_pi*1.145e6, two_pi*99.8e3, trapmodel::DriveConfig::paper());
  const trapmodel::AnalyticFieldModel model(trapmodel::TrapGeometry::paper(), d);
  const auto modes = trapmodel::secular_frequencies(model, ion, 0.0);
  const double fz = modes.omega[2];
  std::cout << "fz = " << fz/two_pi << " Hz\n";
  ForceConfig forces;
  forces.drag_coefficient = 4.2e-22;
  forces.mod_force_amp = 1e-21;
  forces.mod_direction = Vector3d::UnitZ();
  std::vector<double> freqs;
  for (int i = -3; i <= 3; ++i) freqs.push_back(fz * (1.0 + 0.01 * i));
  const double dt = two_pi / model.omega_rf() / 50.0;
  const double t_mod = two_pi / fz;
  IonState init;
  const auto res = excitation_sweep(model, ion, forces, freqs, SweepDirection::up,
                                    120.0*t_mod, 30.0*t_mod, dt, init);
  for (auto& p : res.points)
    std::cout << p.freq/two_pi << "  ampz=" << p.amplitude.z() << "\n";
}
