#include "tapertrap/fieldsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tapertrap/constants.hpp"

namespace tapertrap::fieldsolve {

using constants::coulomb;
using constants::pi;

// ---------------------------------------------------------------------------
// TriMesh

Vector3d TriMesh::centroid(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double TriMesh::area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vector3d e1 = vertices[tri[1]] - vertices[tri[0]];
  const Vector3d e2 = vertices[tri[2]] - vertices[tri[0]];
  return 0.5 * e1.cross(e2).norm();
}

double TriMesh::diameter() const {
  if (vertices.empty()) return 0.0;
  Vector3d lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

void TriMesh::validate() const {
  if (triangles.empty()) throw ConfigError("mesh validation: no triangles");
  const int nv = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int k : triangles[t])
      if (k < 0 || k >= nv)
        throw ConfigError("mesh validation: triangle " + std::to_string(t) +
                          " references vertex " + std::to_string(k) +
                          " out of range");
    if (area(t) <= 1e-18)
      throw ConfigError("mesh validation: zero-area triangle at index " +
                        std::to_string(t));
  }
  for (int id : electrode_id)
    if (!electrode_names.count(id))
      throw ConfigError("mesh validation: electrode id " + std::to_string(id) +
                        " has no name binding");
}

// ---------------------------------------------------------------------------
// Parsing / serialization

TriMesh parse_mesh(std::istream& in) {
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  bool have_header = false;

  auto fail = [&](const std::string& what) {
    throw ConfigError("mesh parse error at line " + std::to_string(line_no) +
                      ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    // strip trailing CR for tolerant parsing of DOS files
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    if (!have_header) {
      int version = 0;
      if (tok != "TRAPMESH" || !(ls >> version))
        fail("expected header 'TRAPMESH 1'");
      if (version != 1) fail("unsupported TRAPMESH version " + std::to_string(version));
      have_header = true;
      continue;
    }

    if (tok == "#") {
      std::string kind;
      if (ls >> kind && kind == "name") {
        int id;
        std::string name;
        if (!(ls >> id >> name)) fail("malformed '# name <id> <text>' line");
        mesh.electrode_names[id] = name;
      }
      continue;  // other comments ignored
    }
    if (tok == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("malformed vertex line");
      mesh.vertices.emplace_back(x, y, z);
      continue;
    }
    if (tok == "f") {
      int i, j, k, id;
      if (!(ls >> i >> j >> k >> id)) fail("malformed face line");
      mesh.triangles.push_back({i, j, k});
      mesh.electrode_id.push_back(id);
      continue;
    }
    fail("unknown record '" + tok + "'");
  }
  if (!have_header)
    throw ConfigError("mesh parse error: missing 'TRAPMESH 1' header");
  mesh.validate();
  return mesh;
}

TriMesh parse_mesh(const std::string& text) {
  std::istringstream is(text);
  return parse_mesh(is);
}

TriMesh load_mesh(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open mesh file: " + path);
  return parse_mesh(f);
}

std::string serialize_mesh(const TriMesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  os << "TRAPMESH 1\n";
  for (const auto& [id, name] : mesh.electrode_names)
    os << "# name " << id << " " << name << "\n";
  for (const auto& v : mesh.vertices)
    os << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    os << "f " << tri[0] << " " << tri[1] << " " << tri[2] << " "
       << mesh.electrode_id[t] << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Collocation solve

double ChargeBasis::total_charge() const {
  double q = 0.0;
  for (double c : charge) q += c;
  return q;
}

namespace {

// Influence matrix: potential at centroid i per unit charge on triangle j.
// Self-term: potential at the centre of a uniformly charged disc of equal
// area, V = q / (2 pi eps0 a) with a = sqrt(A/pi).
Eigen::MatrixXd influence_matrix(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.triangles.size());
  std::vector<Vector3d> cent(n);
  std::vector<double> self(n);
  for (int t = 0; t < n; ++t) {
    cent[t] = mesh.centroid(t);
    const double a_disc = std::sqrt(mesh.area(t) / pi);
    self[t] = 1.0 / (2.0 * pi * constants::vacuum_permittivity * a_disc);
  }
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        g(i, j) = self[i];
      } else {
        g(i, j) = coulomb / (cent[i] - cent[j]).norm();
      }
    }
  }
  return g;
}

}  // namespace

ChargeBasis solve_unit_basis(const TriMesh& mesh, int electrode_id,
                             const SolveOptions& opts) {
  mesh.validate();
  const int n = static_cast<int>(mesh.triangles.size());
  if (n > opts.max_triangles)
    throw ConfigError("solve_unit_basis: " + std::to_string(n) +
                      " triangles exceeds the cap of " +
                      std::to_string(opts.max_triangles));
  if (std::find(mesh.electrode_id.begin(), mesh.electrode_id.end(),
                electrode_id) == mesh.electrode_id.end())
    throw ConfigError("solve_unit_basis: electrode id " +
                      std::to_string(electrode_id) + " absent from mesh");

  const Eigen::MatrixXd g = influence_matrix(mesh);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i)
    b(i) = mesh.electrode_id[i] == electrode_id ? 1.0 : 0.0;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(g);
  // Crude conditioning estimate from the U factor.
  const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  if (!(dmin > 0.0) || dmin / dmax < 1e-14)
    throw SolverError("collocation system is singular or ill-conditioned "
                      "(pivot ratio " + std::to_string(dmin / dmax) + ")");

  Eigen::VectorXd q = lu.solve(b);

  // Boundary-condition residual at the collocation points.
  const double resid = (g * q - b).norm() / std::max(b.norm(), 1.0);
  if (resid > 1e-3)
    throw SolverError("collocation residual too large: " + std::to_string(resid));

  ChargeBasis basis;
  basis.electrode_id = electrode_id;
  basis.charge.assign(q.data(), q.data() + n);
  return basis;
}

std::map<int, ChargeBasis> solve_all_bases(const TriMesh& mesh,
                                           const SolveOptions& opts) {
  mesh.validate();
  const int n = static_cast<int>(mesh.triangles.size());
  if (n > opts.max_triangles)
    throw ConfigError("solve_all_bases: triangle count exceeds cap");

  const Eigen::MatrixXd g = influence_matrix(mesh);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(g);
  const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 0.0) || diag.minCoeff() / diag.maxCoeff() < 1e-14)
    throw SolverError("collocation system is singular or ill-conditioned");

  std::map<int, ChargeBasis> bases;
  for (const auto& [id, name] : mesh.electrode_names) {
    if (std::find(mesh.electrode_id.begin(), mesh.electrode_id.end(), id) ==
        mesh.electrode_id.end())
      continue;  // name binding without faces: nothing to solve
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = mesh.electrode_id[i] == id ? 1.0 : 0.0;
    Eigen::VectorXd q = lu.solve(b);
    const double resid = (g * q - b).norm() / std::max(b.norm(), 1.0);
    if (resid > 1e-3)
      throw SolverError("collocation residual too large for electrode " +
                        std::to_string(id));
    ChargeBasis basis;
    basis.electrode_id = id;
    basis.charge.assign(q.data(), q.data() + n);
    bases.emplace(id, std::move(basis));
  }
  return bases;
}

double basis_potential(const TriMesh& mesh, const ChargeBasis& basis,
                       const Vector3d& r) {
  double phi = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    phi += coulomb * basis.charge[t] / (r - mesh.centroid(t)).norm();
  return phi;
}

Vector3d basis_gradient(const TriMesh& mesh, const ChargeBasis& basis,
                        const Vector3d& r) {
  Vector3d g = Vector3d::Zero();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vector3d d = r - mesh.centroid(t);
    const double dist = d.norm();
    g -= coulomb * basis.charge[t] / (dist * dist * dist) * d;
  }
  return g;
}

// ---------------------------------------------------------------------------
// SolvedFieldModel

namespace {

// Electrode-name to drive-voltage mapping. Returns (static, cos, sin)
// coefficients for the given electrode.
struct VoltageCoeffs {
  double stat = 0.0, cos_part = 0.0, sin_part = 0.0;
};

VoltageCoeffs voltage_for(const std::string& name,
                          const trapmodel::DriveConfig& d) {
  const double dphi = d.phase_diff - pi;
  VoltageCoeffs v;
  if (name == "rf_x") {
    v.cos_part = d.v_rf1;
  } else if (name == "rf_y") {
    // -v2 cos(wt + dphi) = -v2 cos(dphi) cos + v2 sin(dphi) sin
    v.cos_part = -d.v_rf2 * std::cos(dphi);
    v.sin_part = d.v_rf2 * std::sin(dphi);
  } else if (name == "endcap_p") {
    v.stat = d.v_d1;
  } else if (name == "endcap_m") {
    v.stat = d.v_d2;
  } else if (name == "comp_1") {
    v.stat = d.v_comp[0];
  } else if (name == "comp_2") {
    v.stat = d.v_comp[1];
  } else if (name == "comp_3") {
    v.stat = d.v_comp[2];
  } else if (name == "comp_4") {
    v.stat = d.v_comp[3];
  } else if (name == "ground" || name == "shield") {
    // grounded surfaces contribute no source terms
  } else {
    throw ConfigError("solved field: unknown electrode name '" + name +
                      "' (expected rf_x, rf_y, endcap_p, endcap_m, comp_1..4, "
                      "ground)");
  }
  return v;
}

bool drive_references(const std::string& name, const trapmodel::DriveConfig& d) {
  const VoltageCoeffs v = voltage_for(name, d);
  return v.stat != 0.0 || v.cos_part != 0.0 || v.sin_part != 0.0;
}

}  // namespace

void SolvedFieldModel::build(
    const std::vector<Vector3d>& centroids, const std::vector<double>& areas,
    const std::map<int, std::string>& names,
    const std::map<int, const std::vector<double>*>& charges) {
  const std::size_t n = centroids.size();
  centroids_ = centroids;
  prox_radius_.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    prox_radius_[t] = 2.0 * std::sqrt(areas[t] / pi);

  q_static_.assign(n, 0.0);
  q_cos_.assign(n, 0.0);
  q_sin_.assign(n, 0.0);

  // Every electrode the drive references must have a charge basis.
  for (const auto& [id, name] : names) {
    if (!charges.count(id) && drive_references(name, drive_))
      throw ConfigError("solved field: no charge basis for driven electrode '" +
                        name + "' (id " + std::to_string(id) + ")");
  }
  for (const auto& [id, q] : charges) {
    auto it = names.find(id);
    if (it == names.end())
      throw ConfigError("solved field: basis electrode id " +
                        std::to_string(id) + " has no name binding");
    const VoltageCoeffs v = voltage_for(it->second, drive_);
    if (q->size() != n)
      throw ConfigError("solved field: basis size mismatch");
    for (std::size_t t = 0; t < n; ++t) {
      q_static_[t] += v.stat * (*q)[t];
      q_cos_[t] += v.cos_part * (*q)[t];
      q_sin_[t] += v.sin_part * (*q)[t];
    }
    if (v.cos_part != 0.0 || v.sin_part != 0.0) has_rf_ = true;
  }
}

SolvedFieldModel::SolvedFieldModel(const TriMesh& mesh,
                                   const std::map<int, ChargeBasis>& bases,
                                   const trapmodel::DriveConfig& drive)
    : drive_(drive) {
  drive_.validate();
  std::vector<Vector3d> cent(mesh.triangles.size());
  std::vector<double> areas(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    cent[t] = mesh.centroid(t);
    areas[t] = mesh.area(t);
  }
  std::map<int, const std::vector<double>*> charges;
  for (const auto& [id, b] : bases) charges.emplace(id, &b.charge);
  build(cent, areas, mesh.electrode_names, charges);
}

SolvedFieldModel::SolvedFieldModel(const BasisCache& cache,
                                   const trapmodel::DriveConfig& drive)
    : drive_(drive) {
  drive_.validate();
  std::map<int, const std::vector<double>*> charges;
  for (const auto& [id, q] : cache.charges) charges.emplace(id, &q);
  build(cache.centroids, cache.areas, cache.names, charges);
}

bool SolvedFieldModel::has_rf() const { return has_rf_; }

void SolvedFieldModel::check_validity(const Vector3d& r) const {
  if (!r.allFinite()) throw DomainError("non-finite position");
  for (std::size_t t = 0; t < centroids_.size(); ++t) {
    const double d = (r - centroids_[t]).norm();
    if (d < prox_radius_[t])
      throw DomainError(
          "position within the kernel proximity guard of panel " +
          std::to_string(t) + " (distance " + std::to_string(d) + " m < " +
          std::to_string(prox_radius_[t]) + " m)");
  }
}

bool SolvedFieldModel::contains(const Vector3d& r) const {
  if (!r.allFinite()) return false;
  for (std::size_t t = 0; t < centroids_.size(); ++t)
    if ((r - centroids_[t]).norm() < prox_radius_[t]) return false;
  return true;
}

double SolvedFieldModel::static_potential(const Vector3d& r) const {
  check_validity(r);
  double phi = 0.0;
  for (std::size_t t = 0; t < centroids_.size(); ++t)
    phi += q_static_[t] / (r - centroids_[t]).norm();
  return coulomb * phi;
}

Vector3d SolvedFieldModel::static_gradient(const Vector3d& r) const {
  check_validity(r);
  Vector3d g = Vector3d::Zero();
  for (std::size_t t = 0; t < centroids_.size(); ++t) {
    const Vector3d d = r - centroids_[t];
    const double dist = d.norm();
    g -= q_static_[t] / (dist * dist * dist) * d;
  }
  return coulomb * g;
}

double SolvedFieldModel::rf_envelope(const Vector3d& r, double& a,
                                     double& b) const {
  check_validity(r);
  double pa = 0.0, pb = 0.0;
  for (std::size_t t = 0; t < centroids_.size(); ++t) {
    const double inv = 1.0 / (r - centroids_[t]).norm();
    pa += q_cos_[t] * inv;
    pb += q_sin_[t] * inv;
  }
  a = coulomb * pa;
  b = coulomb * pb;
  return a;
}

void SolvedFieldModel::rf_envelope_gradients(const Vector3d& r, Vector3d& ga,
                                             Vector3d& gb) const {
  check_validity(r);
  ga = Vector3d::Zero();
  gb = Vector3d::Zero();
  for (std::size_t t = 0; t < centroids_.size(); ++t) {
    const Vector3d d = r - centroids_[t];
    const double dist = d.norm();
    const Vector3d kern = d / (dist * dist * dist);
    ga -= q_cos_[t] * kern;
    gb -= q_sin_[t] * kern;
  }
  ga *= coulomb;
  gb *= coulomb;
}

// ---------------------------------------------------------------------------
// Basis cache file

namespace {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("basis cache: truncated file");
  return v;
}

}  // namespace

void save_basis_cache(const std::string& path, const TriMesh& mesh,
                      const std::map<int, ChargeBasis>& bases) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open basis cache for writing: " + path);
  f.write("TPFC", 4);
  write_raw<std::uint32_t>(f, 1);
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  write_raw<std::uint32_t>(f, n);
  write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(bases.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vector3d c = mesh.centroid(t);
    write_raw<double>(f, c.x());
    write_raw<double>(f, c.y());
    write_raw<double>(f, c.z());
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    write_raw<double>(f, mesh.area(t));
  for (const auto& [id, basis] : bases) {
    write_raw<std::int32_t>(f, id);
    const std::string& name = mesh.electrode_names.at(id);
    write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (double q : basis.charge) write_raw<double>(f, q);
  }
  if (!f) throw ConfigError("write failure on basis cache: " + path);
}

BasisCache load_basis_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open basis cache: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "TPFC", 4) != 0)
    throw ConfigError("basis cache: bad magic");
  const auto version = read_raw<std::uint32_t>(f);
  if (version != 1)
    throw ConfigError("basis cache: unsupported version " +
                      std::to_string(version));
  const auto n = read_raw<std::uint32_t>(f);
  const auto n_el = read_raw<std::uint32_t>(f);

  BasisCache cache;
  cache.centroids.resize(n);
  for (auto& c : cache.centroids) {
    const double x = read_raw<double>(f);
    const double y = read_raw<double>(f);
    const double z = read_raw<double>(f);
    c = Vector3d(x, y, z);
  }
  cache.areas.resize(n);
  for (auto& a : cache.areas) a = read_raw<double>(f);
  for (std::uint32_t e = 0; e < n_el; ++e) {
    const auto id = read_raw<std::int32_t>(f);
    const auto len = read_raw<std::uint32_t>(f);
    std::string name(len, '\0');
    f.read(name.data(), len);
    if (!f) throw ConfigError("basis cache: truncated electrode name");
    std::vector<double> q(n);
    for (auto& v : q) v = read_raw<double>(f);
    cache.names[id] = name;
    cache.charges[id] = std::move(q);
  }
  return cache;
}

}  // namespace tapertrap::fieldsolve
