// Scratch probe for solver accuracy; not registered with ctest.
#include <chrono>
#include <iostream>

#include "support/meshgen.hpp"
#include "tapertrap/constants.hpp"
#include "tapertrap/fieldsolve.hpp"
#include "tapertrap/trapmodel.hpp"

using namespace tapertrap;

int main() {
  using clock = std::chrono::steady_clock;
  const double c_exact = 4.0 * constants::pi * constants::vacuum_permittivity;

  for (auto [stacks, slices] : {std::pair{14, 20}, {26, 40}, {51, 80}}) {
    const auto mesh = testsupport::uv_sphere(1.0, stacks, slices);
    const auto t0 = clock::now();
    const auto basis = fieldsolve::solve_unit_basis(mesh, 0);
    const auto dt = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << "uv " << mesh.triangles.size() << " tri: C/C_exact = "
              << basis.total_charge() / c_exact << "  (" << dt << " s)\n";
  }
  for (int sub : {2, 3, 4}) {
    const auto mesh = testsupport::icosphere(1.0, sub);
    const auto t0 = clock::now();
    const auto basis = fieldsolve::solve_unit_basis(mesh, 0);
    const auto dt = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << "ico " << mesh.triangles.size() << " tri: C/C_exact = "
              << basis.total_charge() / c_exact << "  (" << dt << " s)\n";
  }

  // Parallel plates: field at the midpoint vs V/gap.
  {
    const auto mesh = testsupport::parallel_plates(1.0, 0.05, 20);
    const auto bases = fieldsolve::solve_all_bases(mesh);
    trapmodel::DriveConfig d;
    d.omega_rf = 1.0;
    d.phase_diff = constants::pi;
    // plate_top/plate_bottom are not canonical names; evaluate via bases:
    const auto& top = bases.at(0);
    Eigen::Vector3d e = fieldsolve::basis_gradient(mesh, top, {0, 0, 0});
    std::cout << "plates: |E_mid| per volt = " << e.norm()
              << " vs 1/gap = " << 1.0 / 0.05 << " ratio "
              << e.norm() * 0.05 << "\n";
  }

  // Tapered blade mesh: solved radial curvature vs analytic model.
  {
    const auto geom = trapmodel::TrapGeometry::paper();
    const auto mesh = testsupport::tapered_blade_mesh(geom, 0.8 * geom.r0, 24, 10);
    std::cout << "blade mesh: " << mesh.triangles.size() << " triangles\n";
    const auto t0 = clock::now();
    const auto bases = fieldsolve::solve_all_bases(mesh);
    std::cout << "  solve: "
              << std::chrono::duration<double>(clock::now() - t0).count()
              << " s\n";
    auto drive = trapmodel::DriveConfig::paper();
    const fieldsolve::SolvedFieldModel solved(mesh, bases, drive);
    const trapmodel::AnalyticFieldModel analytic(geom, drive);
    const auto ion = trapmodel::IonSpecies::calcium40();
    const auto ms = trapmodel::secular_frequencies(solved, ion, 0.0);
    const auto ma = trapmodel::secular_frequencies(analytic, ion, 0.0);
    std::cout << "  solved nu_r = " << ms.omega[0] / constants::two_pi
              << ", analytic = " << ma.omega[0] / constants::two_pi
              << ", ratio = " << ms.omega[0] / ma.omega[0] << "\n";
  }
  return 0;
}
