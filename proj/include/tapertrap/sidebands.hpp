#pragma once

#include <array>
#include <vector>

#include "tapertrap/trapmodel.hpp"

namespace tapertrap::sidebands {

using trapmodel::IonSpecies;

/// Lande g factors of the S1/2 and D5/2 levels of 40Ca+ (standard atomic
/// data; see README for the source).
inline constexpr double g_s_half = 2.00225;
inline constexpr double g_d_five_half = 1.2003;

/// One Zeeman component of the S1/2 <-> D5/2 quadrupole transition.
/// Offset is the first-order shift from the zero-field line centre:
///   offset = mu_B B (g_D m_e - g_S m_g) / h.
struct ZeemanLine {
  double m_ground = 0.0;   // +-1/2
  double m_excited = 0.0;  // -5/2 .. +5/2
  int delta_m = 0;
  double offset = 0.0;  // Hz
};

/// All allowed components (|delta m| <= 2) at field B, sorted by offset.
/// A beam parallel to the quantization axis (angle 0) drives only the four
/// |delta m| = 1 components.
std::vector<ZeemanLine> zeeman_lines(double b_field, double beam_angle);

/// Zeeman line plus a motional sideband order per mode.
struct SidebandLine {
  ZeemanLine base;
  int n_x = 0, n_y = 0, n_z = 0;
  double offset = 0.0;  // Hz, base.offset + n.nu
};

/// Sideband comb around one Zeeman line: all integer order combinations
/// with |n_x|+|n_y|+|n_z| <= max_total_order, sorted by offset. Includes
/// the carrier; hybrid (multi-mode) entries appear from order 2.
std::vector<SidebandLine> sideband_comb(const ZeemanLine& line,
                                        const std::array<double, 3>& secular_hz,
                                        int max_total_order);

/// Lamb-Dicke parameter of a mode at angular frequency omega probed at
/// `wavelength` with the beam at `projection_angle` to the mode axis:
///   eta = (2 pi / lambda) cos(angle) sqrt(hbar / (2 m omega)).
double lamb_dicke(double omega, const IonSpecies& ion, double wavelength,
                  double projection_angle);

}  // namespace tapertrap::sidebands
