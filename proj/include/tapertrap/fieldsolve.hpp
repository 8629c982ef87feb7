#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tapertrap/trapmodel.hpp"

namespace tapertrap::fieldsolve {

using Eigen::Vector3d;

/// Triangle surface mesh with per-triangle electrode labels.
///
/// TRAPMESH ASCII format (one record per line, 0-based indices, meters):
///   TRAPMESH 1
///   # name <electrode_id> <electrode_name>
///   v <x> <y> <z>
///   f <i> <j> <k> <electrode_id>
struct TriMesh {
  std::vector<Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> electrode_id;  // per triangle
  std::map<int, std::string> electrode_names;

  Vector3d centroid(std::size_t t) const;
  double area(std::size_t t) const;
  double diameter() const;  // bounding-sphere diameter estimate

  void validate() const;
};

/// Parses the TRAPMESH format; errors carry 1-based line numbers.
TriMesh parse_mesh(std::istream& in);
TriMesh parse_mesh(const std::string& text);
TriMesh load_mesh(const std::string& path);

std::string serialize_mesh(const TriMesh& mesh);

/// Per-triangle charges (C) for 1 V on one electrode and 0 V elsewhere.
struct ChargeBasis {
  int electrode_id = -1;
  std::vector<double> charge;  // one entry per mesh triangle

  double total_charge() const;
};

struct SolveOptions {
  int max_triangles = 20000;
};

/// Surface-charge collocation solve: uniform charge per triangle, potential
/// matched at triangle centroids with the 1/(4 pi eps0 r) kernel; the
/// self-term uses the equal-area disc approximation. Dense partial-pivoting
/// LU.
ChargeBasis solve_unit_basis(const TriMesh& mesh, int electrode_id,
                             const SolveOptions& opts = {});

/// All electrode bases of a mesh, keyed by electrode id.
std::map<int, ChargeBasis> solve_all_bases(const TriMesh& mesh,
                                           const SolveOptions& opts = {});

/// Potential at r from one unit basis (V at 1 V electrode drive).
double basis_potential(const TriMesh& mesh, const ChargeBasis& basis,
                       const Vector3d& r);
Vector3d basis_gradient(const TriMesh& mesh, const ChargeBasis& basis,
                        const Vector3d& r);

/// Contents of a solved-basis cache file.
struct BasisCache {
  std::vector<Vector3d> centroids;
  std::vector<double> areas;
  std::map<int, std::string> names;
  std::map<int, std::vector<double>> charges;
};

/// Time-dependent voltage assignment for the solved backend. Electrodes
/// are looked up by name:
///   rf_x       -> v_rf1 cos(w t)
///   rf_y       -> -v_rf2 cos(w t + phase_diff - pi)
///   endcap_p   -> v_d1        endcap_m -> v_d2
///   comp_1..4  -> v_comp[0..3]
/// Missing electrodes referenced by a nonzero voltage raise ConfigError.
class SolvedFieldModel final : public trapmodel::FieldModel {
 public:
  SolvedFieldModel(const TriMesh& mesh, const std::map<int, ChargeBasis>& bases,
                   const trapmodel::DriveConfig& drive);
  SolvedFieldModel(const BasisCache& cache, const trapmodel::DriveConfig& drive);

  double static_potential(const Vector3d& r) const override;
  Vector3d static_gradient(const Vector3d& r) const override;
  double rf_envelope(const Vector3d& r, double& a, double& b) const override;
  void rf_envelope_gradients(const Vector3d& r, Vector3d& ga,
                             Vector3d& gb) const override;
  double omega_rf() const override { return drive_.omega_rf; }
  bool has_rf() const override;
  void check_validity(const Vector3d& r) const override;
  bool contains(const Vector3d& r) const override;

  const trapmodel::DriveConfig& drive() const { return drive_; }

 private:
  void build(const std::vector<Vector3d>& centroids,
             const std::vector<double>& areas,
             const std::map<int, std::string>& names,
             const std::map<int, const std::vector<double>*>& charges);

  std::vector<Vector3d> centroids_;
  std::vector<double> prox_radius_;     // per-panel kernel proximity guard
  std::vector<double> q_static_;        // combined charge per triangle
  std::vector<double> q_cos_;
  std::vector<double> q_sin_;
  trapmodel::DriveConfig drive_;
  bool has_rf_ = false;
};

/// Binary basis-cache layout (little endian):
///   magic "TPFC", u32 version = 1, u32 n_triangles, u32 n_electrodes,
///   f64 centroids[3*n], f64 areas[n],
///   then per electrode: i32 id, u32 name_len, name bytes,
///   f64 charges[n_triangles].
void save_basis_cache(const std::string& path, const TriMesh& mesh,
                      const std::map<int, ChargeBasis>& bases);
BasisCache load_basis_cache(const std::string& path);

}  // namespace tapertrap::fieldsolve
