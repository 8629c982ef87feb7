#pragma once

#include "tapertrap/trapmodel.hpp"

// Minimal static field models for integrator tests.
namespace tapertrap::testsupport {

using Eigen::Vector3d;

/// Static anisotropic harmonic potential, phi = 0.5 (kx x^2 + ky y^2 + kz z^2)
/// in V/m^2; no RF part, unbounded validity.
class HarmonicField final : public trapmodel::FieldModel {
 public:
  explicit HarmonicField(const Vector3d& curvature) : k_(curvature) {}

  double static_potential(const Vector3d& r) const override {
    return 0.5 * (k_.x() * r.x() * r.x() + k_.y() * r.y() * r.y() +
                  k_.z() * r.z() * r.z());
  }
  Vector3d static_gradient(const Vector3d& r) const override {
    return k_.cwiseProduct(r);
  }
  double rf_envelope(const Vector3d&, double& a, double& b) const override {
    a = b = 0.0;
    return 0.0;
  }
  void rf_envelope_gradients(const Vector3d&, Vector3d& ga,
                             Vector3d& gb) const override {
    ga.setZero();
    gb.setZero();
  }
  double omega_rf() const override { return 0.0; }
  bool has_rf() const override { return false; }
  void check_validity(const Vector3d& r) const override {
    if (!r.allFinite()) throw DomainError("non-finite position");
  }
  bool contains(const Vector3d&) const override { return true; }

 private:
  Vector3d k_;
};

/// Field-free region (free flight).
inline HarmonicField free_space() { return HarmonicField(Vector3d::Zero()); }

}  // namespace tapertrap::testsupport
