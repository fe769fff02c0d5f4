#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vfl/geometry.hpp"

namespace vfl {

struct ImpulseSeries {
  std::vector<double> times;
  std::vector<Vec3> values;
  std::vector<double> moduli;

  void push(double t, const Vec3& v) {
    times.push_back(t);
    values.push_back(v);
    moduli.push_back(norm(v));
  }
  std::size_t size() const { return times.size(); }
};

/// Trajectory of the node at s = 0.
struct CornerTrack {
  std::vector<double> times;
  std::vector<Vec3> positions;
  std::vector<double> moduli;

  void push(double t, const Vec3& x) {
    times.push_back(t);
    positions.push_back(x);
    moduli.push_back(norm(x));
  }
  std::size_t size() const { return times.size(); }
};

/// Integrand X ^ X_s at the nodes (so that X ^ T ds = integrand * h).
std::vector<Vec3> impulse_density(const Filament& f);

/// 1/2 int_{-l/2}^{l/2} X ^ T ds over the parameter window centred on s = 0,
/// trapezoid rule with linear interpolation at fractional window ends.
Vec3 fluid_impulse(const Filament& f, double l);

/// Full impulse over one parameter period [0, 2pi).
Vec3 fluid_impulse(const Filament& f);

/// Impulse of the closed loop built from a MirrorAntisymmetric segment and its
/// D-image: P + D P, P being the segment's own impulse.
Vec3 loop_impulse(const Filament& f);

struct SliceProfile {
  std::vector<double> q;  ///< lower bin edge
  std::vector<Vec3> vectors;
  std::vector<double> moduli;
};

/// Bins [k dq, (k+1) dq) in x3 covering the node range.
SliceProfile sliced_impulse_by_coordinate(const Filament& f, double dq);

/// Bins [k dq, (k+1) dq) in the parameter over [0, 2pi). The last bin may be
/// short when dq does not divide 2pi.
SliceProfile sliced_impulse_by_parameter(const Filament& f, double dq);

/// Fraction of the total turning angle carried by nodes within half_width
/// (parameter distance, periodic) of any of the given stations. With
/// chord_stride m > 1 the angles are those of the polygon through every m-th
/// node, which filters out grid-scale oscillation; m must divide the node count.
double curvature_mass_fraction(const Filament& f, std::span<const double> stations, double half_width,
                               int chord_stride = 1);

// Vorticity on a uniform grid; sample (i, j, k) sits at origin + (i dx, j dy, k dz).
struct VorticityGrid {
  int nx = 0, ny = 0, nz = 0;
  double dx = 0.0, dy = 0.0, dz = 0.0;
  Vec3 origin{};
  /// Component-major, x fastest: omega[c * N + (k * ny + j) * nx + i].
  std::vector<double> omega;

  std::size_t cells() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  Vec3 position(int i, int j, int k) const { return origin + Vec3{i * dx, j * dy, k * dz}; }
};

void validate(const VorticityGrid& g);

/// Slabs [z0 + k dz, z0 + (k+1) dz) with z0 the grid origin; per-slab
/// 1/2 sum x ^ omega dV by midpoint quadrature.
SliceProfile grid_impulse(const VorticityGrid& g, double slab_dz);

/// Gaussian-core ring of radius R and circulation gamma about the x3 axis,
/// centred at (0, 0, z_center), on an n^3 grid spanning [-half_width, half_width)^3.
VorticityGrid make_vortex_ring_grid(int n, double half_width, double radius, double gamma, double core,
                                    double z_center = 0.0);

/// Adds `other` to `g` sample by sample; layouts must match.
void accumulate(VorticityGrid& g, const VorticityGrid& other);

/// Header JSON {nx, ny, nz, dx, dy, dz, origin, component_order, scalar,
/// data_file}; data_file is resolved relative to the header and defaults to
/// the header path with extension .bin.
VorticityGrid read_vorticity_grid(const std::filesystem::path& header);
void write_vorticity_grid(const VorticityGrid& g, const std::filesystem::path& header);

struct Spectrum {
  std::vector<int> k;
  std::vector<std::complex<double>> coeff;
  std::vector<double> coeff_modulus;
  std::vector<double> weighted;  ///< k |c(k)|
  std::vector<bool> is_square;
};

inline constexpr int kMinSpectrumSamples = 64;

/// c(k) = (1/N) sum_j (f_j - mean) exp(-2 pi i k j / N) for k = 0..N/2.
Spectrum spectrum(std::span<const double> samples);

struct DominanceReport {
  std::vector<int> n;
  std::vector<bool> dominant;
  double fraction = 0.0;
};

/// For n = 2..n_max (limited to (n+1)^2 within the spectrum), checks that the
/// weighted coefficient at n^2 beats every k in ((n-1)^2, (n+1)^2).
DominanceReport square_dominance(const Spectrum& s, int n_max);

struct ExponentFit {
  double exponent = 0.0;
  double stderr_exponent = 0.0;
  double log_prefactor = 0.0;
  int points = 0;
};

inline constexpr int kMinFitPoints = 10;

/// Least-squares slope of log z against log(t - t_ref).
ExponentFit separation_exponent_fit(std::span<const double> t, std::span<const double> z, double t_ref);

}  // namespace vfl
