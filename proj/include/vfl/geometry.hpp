#pragma once

#include <complex>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "vfl/vec3.hpp"

namespace vfl {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Uniform grid s_j = j*h, j = 0..n-1, on the parameter interval [0, 2pi).
class ParamGrid {
 public:
  static constexpr int kMinNodes = 16;

  explicit ParamGrid(int n_nodes);

  int size() const { return n_; }
  double h() const { return h_; }
  double s(int j) const { return j * h_; }

 private:
  int n_;
  double h_;
};

/// X(s + 2pi) = X(s) + shift. A zero shift is a closed curve.
struct PeriodicShift {
  Vec3 shift{};
};

/// X(s + 2pi) = D X(s) with D = diag(-1, 1, -1). The segment on [0, 2pi)
/// joined with its D-image is a closed loop of parameter length 4pi.
struct MirrorAntisymmetric {};

using BoundaryMap = std::variant<PeriodicShift, MirrorAntisymmetric>;

inline bool is_mirror(const BoundaryMap& b) { return std::holds_alternative<MirrorAntisymmetric>(b); }

/// Discrete filament: node positions X(s_j, t) plus end conditions.
struct Filament {
  ParamGrid grid;
  std::vector<Vec3> nodes;
  BoundaryMap boundary;
  double time = 0.0;

  Filament(ParamGrid g, std::vector<Vec3> x, BoundaryMap b, double t = 0.0);

  int size() const { return grid.size(); }
  double h() const { return grid.h(); }
};

/// Checks node count, finiteness and positive consecutive distances.
void validate(const Filament& f);

/// Node array padded with `width` ghost nodes on each side; index i + width
/// holds node i. Ghosts follow the filament's boundary map.
std::vector<Vec3> ghost_extend(const Filament& f, int width);

/// Same padding for a derivative-like field (X_s, X_ss, ...). Such fields carry
/// no translation, so PeriodicShift ghosts are plain periodic copies.
std::vector<Vec3> ghost_extend_field(std::span<const Vec3> field, const BoundaryMap& boundary, int width);

/// Image of node-indexed position j, for any integer j, under the boundary map.
Vec3 node_at(const Filament& f, int j);

struct DerivativeFields {
  std::vector<Vec3> xs;
  std::vector<Vec3> xss;
};

/// Centered 8th-order finite differences of X in s.
DerivativeFields derivative_fields(const Filament& f);

/// 8th-order centered first derivative of an already ghost-extended array
/// (stencil half-width 4). Output has ext.size() - 8 entries.
void central_d1(std::span<const Vec3> ext, double h, std::span<Vec3> out);
void central_d2(std::span<const Vec3> ext, double h, std::span<Vec3> out);

inline constexpr double kTorsionCurvatureFloor = 1e-8;

struct FrenetData {
  std::vector<Vec3> xs;
  std::vector<Vec3> xss;
  std::vector<Vec3> tangent;
  std::vector<double> curvature;
  std::vector<double> torsion;
  /// True where curvature is below the floor and torsion is reported as 0.
  std::vector<bool> torsion_degenerate;
};

FrenetData frenet_curvature_torsion(const Filament& f, double curvature_floor = kTorsionCurvatureFloor);

/// psi(s_j) = kappa(s_j) exp(i * int_0^{s_j} tau ds), the integral taken over
/// the grid parameter by the trapezoid rule.
std::vector<std::complex<double>> hasimoto_psi(const Filament& f);
std::vector<std::complex<double>> hasimoto_psi(const Filament& f, const FrenetData& frenet);

/// Resamples the curve at equal arc-length stations (node 0 is kept fixed)
/// and scales it about the origin so that its length is target_total_length.
Filament arclength_reparametrize(const Filament& f, double target_total_length);

/// Arc length over one parameter period: each chord is corrected by the
/// circular-arc factor of the locally subtended angle, so circles are exact and
/// corners do not pollute their neighbours.
double curve_length(const Filament& f);

/// Length of the closed polygon through the nodes and the ghost at s = 2pi.
double polygon_length(const Filament& f);

struct AssembledLoop {
  std::vector<Vec3> points;
  double max_junction_gap = 0.0;
  double max_spacing = 0.0;
  bool gap_warning = false;
};

/// Joins a MirrorAntisymmetric segment with its D-image into a closed loop of
/// 2n points. Flags a warning when a junction gap exceeds twice the largest
/// interior node spacing.
AssembledLoop closed_curve_assemble(const Filament& f);

/// Turning angle between consecutive chords at each node; sums to the total
/// discrete curvature of the curve.
std::vector<double> turning_angles(const Filament& f);

/// Symmetric Hausdorff distance between two point sets (brute force).
double hausdorff_distance(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace vfl
