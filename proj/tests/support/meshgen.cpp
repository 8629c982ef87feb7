#include "meshgen.hpp"

#include <cmath>
#include <map>

#include "tapertrap/constants.hpp"

namespace tapertrap::testsupport {

using Eigen::Vector3d;
using constants::pi;

TriMesh uv_sphere(double radius, int stacks, int slices, int electrode_id) {
  TriMesh mesh;
  mesh.electrode_names[electrode_id] = "sphere";

  // vertices: poles plus (stacks - 1) rings of `slices` points
  mesh.vertices.emplace_back(0.0, 0.0, radius);
  for (int i = 1; i < stacks; ++i) {
    const double theta = pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double phi = 2.0 * pi * j / slices;
      mesh.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi),
                                 radius * std::sin(theta) * std::sin(phi),
                                 radius * std::cos(theta));
    }
  }
  mesh.vertices.emplace_back(0.0, 0.0, -radius);
  const int south = static_cast<int>(mesh.vertices.size()) - 1;

  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  auto add = [&](int a, int b, int c) {
    mesh.triangles.push_back({a, b, c});
    mesh.electrode_id.push_back(electrode_id);
  };

  for (int j = 0; j < slices; ++j) add(0, ring(1, j), ring(1, j + 1));
  for (int i = 1; i < stacks - 1; ++i) {
    for (int j = 0; j < slices; ++j) {
      add(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1));
      add(ring(i, j), ring(i + 1, j + 1), ring(i, j + 1));
    }
  }
  for (int j = 0; j < slices; ++j)
    add(south, ring(stacks - 1, j + 1), ring(stacks - 1, j));
  return mesh;
}

TriMesh icosphere(double radius, int subdivisions, int electrode_id) {
  TriMesh mesh;
  mesh.electrode_names[electrode_id] = "sphere";

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vector3d> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vector3d m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  for (const auto& v : verts) mesh.vertices.push_back(radius * v);
  for (const auto& f : faces) {
    mesh.triangles.push_back(f);
    mesh.electrode_id.push_back(electrode_id);
  }
  return mesh;
}

TriMesh parallel_plates(double side, double gap, int n) {
  TriMesh mesh;
  mesh.electrode_names[0] = "plate_top";
  mesh.electrode_names[1] = "plate_bottom";

  auto add_plate = [&](double z, int id) {
    const int base = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        mesh.vertices.emplace_back(-0.5 * side + side * i / n,
                                   -0.5 * side + side * j / n, z);
    auto at = [&](int i, int j) { return base + i * (n + 1) + j; };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        mesh.triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
        mesh.electrode_id.push_back(id);
        mesh.triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        mesh.electrode_id.push_back(id);
      }
  };
  add_plate(0.5 * gap, 0);
  add_plate(-0.5 * gap, 1);
  return mesh;
}

TriMesh tapered_blade_mesh(const trapmodel::TrapGeometry& geom,
                           double half_width, int nz, int nw) {
  TriMesh mesh;
  mesh.electrode_names[0] = "rf_x";
  mesh.electrode_names[1] = "rf_y";
  mesh.electrode_names[2] = "endcap_p";
  mesh.electrode_names[3] = "endcap_m";

  const double half_len = 0.45 * geom.blade_length;  // keep clear of endcaps
  const double tan_theta = std::tan(geom.taper_angle);

  // One hyperbolic blade face u = sqrt(rho(z)^2 + v^2); sign picks the side,
  // swap_xy picks the pair.
  auto add_blade = [&](double sign, bool swap_xy, int id) {
    const int base = static_cast<int>(mesh.vertices.size());
    for (int iz = 0; iz <= nz; ++iz) {
      const double z = -half_len + 2.0 * half_len * iz / nz;
      const double rho = geom.r0 - z * tan_theta;
      for (int iw = 0; iw <= nw; ++iw) {
        const double v = -half_width + 2.0 * half_width * iw / nw;
        const double u = sign * std::sqrt(rho * rho + v * v);
        if (swap_xy)
          mesh.vertices.emplace_back(v, u, z);
        else
          mesh.vertices.emplace_back(u, v, z);
      }
    }
    auto at = [&](int iz, int iw) { return base + iz * (nw + 1) + iw; };
    for (int iz = 0; iz < nz; ++iz)
      for (int iw = 0; iw < nw; ++iw) {
        mesh.triangles.push_back({at(iz, iw), at(iz + 1, iw), at(iz + 1, iw + 1)});
        mesh.electrode_id.push_back(id);
        mesh.triangles.push_back({at(iz, iw), at(iz + 1, iw + 1), at(iz, iw + 1)});
        mesh.electrode_id.push_back(id);
      }
  };
  add_blade(+1.0, false, 0);
  add_blade(-1.0, false, 0);
  add_blade(+1.0, true, 1);
  add_blade(-1.0, true, 1);

  // Endcap faces: annular discs with the optical through-hole.
  auto add_endcap = [&](double z, int id) {
    const double r_in = 0.5 * geom.endcap_hole_diam;
    const double r_out = 4.0 * r_in;
    const int n_ring = 3, n_sec = 16;
    const int base = static_cast<int>(mesh.vertices.size());
    for (int ir = 0; ir <= n_ring; ++ir) {
      const double r = r_in + (r_out - r_in) * ir / n_ring;
      for (int is = 0; is < n_sec; ++is) {
        const double phi = 2.0 * pi * is / n_sec;
        mesh.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
      }
    }
    auto at = [&](int ir, int is) { return base + ir * n_sec + (is % n_sec); };
    for (int ir = 0; ir < n_ring; ++ir)
      for (int is = 0; is < n_sec; ++is) {
        mesh.triangles.push_back({at(ir, is), at(ir + 1, is), at(ir + 1, is + 1)});
        mesh.electrode_id.push_back(id);
        mesh.triangles.push_back({at(ir, is), at(ir + 1, is + 1), at(ir, is + 1)});
        mesh.electrode_id.push_back(id);
      }
  };
  add_endcap(0.5 * geom.endcap_gap, 2);
  add_endcap(-0.5 * geom.endcap_gap, 3);
  return mesh;
}

}  // namespace tapertrap::testsupport
