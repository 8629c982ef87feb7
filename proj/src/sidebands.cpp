#include "tapertrap/sidebands.hpp"

#include <algorithm>
#include <cmath>

#include "tapertrap/constants.hpp"

namespace tapertrap::sidebands {

std::vector<ZeemanLine> zeeman_lines(double b_field, double beam_angle) {
  if (b_field < 0.0) throw ConfigError("zeeman_lines: B must be >= 0");
  const bool parallel = std::abs(std::sin(beam_angle)) < 1e-9;
  const double unit = constants::bohr_magneton * b_field / constants::planck;

  std::vector<ZeemanLine> lines;
  for (double mg : {-0.5, 0.5}) {
    for (int k = -5; k <= 5; k += 2) {
      const double me = 0.5 * k;
      const int dm = static_cast<int>(std::lround(me - mg));
      if (std::abs(dm) > 2) continue;
      if (parallel && std::abs(dm) != 1) continue;
      lines.push_back(
          {mg, me, dm, unit * (g_d_five_half * me - g_s_half * mg)});
    }
  }
  std::sort(lines.begin(), lines.end(), [](const ZeemanLine& a, const ZeemanLine& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.m_ground < b.m_ground;
  });
  return lines;
}

std::vector<SidebandLine> sideband_comb(const ZeemanLine& line,
                                        const std::array<double, 3>& secular_hz,
                                        int max_total_order) {
  for (double nu : secular_hz)
    if (!(nu > 0.0)) throw ConfigError("sideband_comb: secular frequencies must be > 0");
  if (max_total_order < 1)
    throw ConfigError("sideband_comb: max_total_order must be >= 1");

  std::vector<SidebandLine> comb;
  const int m = max_total_order;
  for (int nx = -m; nx <= m; ++nx)
    for (int ny = -m; ny <= m; ++ny)
      for (int nz = -m; nz <= m; ++nz) {
        if (std::abs(nx) + std::abs(ny) + std::abs(nz) > m) continue;
        SidebandLine sb;
        sb.base = line;
        sb.n_x = nx;
        sb.n_y = ny;
        sb.n_z = nz;
        sb.offset = line.offset + nx * secular_hz[0] + ny * secular_hz[1] +
                    nz * secular_hz[2];
        comb.push_back(sb);
      }
  std::sort(comb.begin(), comb.end(), [](const SidebandLine& a, const SidebandLine& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    if (a.n_x != b.n_x) return a.n_x < b.n_x;
    if (a.n_y != b.n_y) return a.n_y < b.n_y;
    return a.n_z < b.n_z;
  });
  return comb;
}

double lamb_dicke(double omega, const IonSpecies& ion, double wavelength,
                  double projection_angle) {
  if (!(omega > 0.0)) throw ConfigError("lamb_dicke: omega must be > 0");
  if (!(wavelength > 0.0)) throw ConfigError("lamb_dicke: wavelength must be > 0");
  ion.validate();
  const double k = constants::two_pi / wavelength;
  return k * std::cos(projection_angle) *
         std::sqrt(constants::hbar / (2.0 * ion.mass * omega));
}

}  // namespace tapertrap::sidebands
