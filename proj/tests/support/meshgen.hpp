#pragma once

#include "tapertrap/fieldsolve.hpp"
#include "tapertrap/trapmodel.hpp"

// Test-only mesh generators for the collocation solver suites.
namespace tapertrap::testsupport {

using fieldsolve::TriMesh;

/// Latitude/longitude sphere with 2 * slices * (stacks - 1) triangles.
TriMesh uv_sphere(double radius, int stacks, int slices, int electrode_id = 0);

/// Subdivided icosahedron with 20 * 4^subdivisions near-equilateral
/// triangles projected onto the sphere.
TriMesh icosphere(double radius, int subdivisions, int electrode_id = 0);

/// Two square plates of side `side` at z = +-gap/2, each triangulated into
/// 2 n^2 triangles. Electrode ids: 0 top (+z), 1 bottom.
TriMesh parallel_plates(double side, double gap, int n);

/// Simplified four-blade tapered trap with endcap discs, electrode naming
/// per the solved-backend convention (rf_x, rf_y, endcap_p, endcap_m).
/// Blade faces follow the hyperbola u^2 - v^2 = rho(z)^2 with half-width
/// `half_width` and the geometry's taper.
TriMesh tapered_blade_mesh(const trapmodel::TrapGeometry& geom,
                           double half_width, int nz, int nw);

}  // namespace tapertrap::testsupport
