#pragma once

#include <cstdint>

#include "vfl/geometry.hpp"

namespace vfl {

/// Eye-shaped vortex: two arcs X = (b sin s, s - pi/2, -b~ sin s) on (0, pi]
/// and (b sin s, 3pi/2 - s, b~ sin s) on (pi, 2pi), meeting at two corners.
struct EyeParams {
  double b = 1.0;
  double b_tilde = 2.0;
  int n_nodes = 1024;
};

/// Interior corner angle of the eye: arccos((1 + b~^2 - b^2) / (1 + b~^2 + b^2)).
double eye_corner_angle(double b, double b_tilde);

/// Samples the eye at equal arc length with corners on nodes 0 and n/2,
/// without rescaling (total length is the length of the analytic curve).
Filament sample_eye_curve(const EyeParams& p);

/// Eye rescaled to total length 2pi, closed (zero shift).
Filament make_eye(const EyeParams& p);

struct PolyEyeParams {
  int M = 12;  ///< sides of the parent regular polygon, even
  int K = 4;   ///< sides kept from each half, K | M
};

struct PolygonalEye {
  Filament filament;
  double corner_angle;  ///< theta_M = 2 pi (M - l) / (l M), l = M / K
  std::vector<Vec3> vertices;
};

/// Joins the first K sides of each half of a regular M-gon and rescales the
/// result to length 2pi. Vertices sit on nodes; node 0 is a junction corner.
PolygonalEye make_polygonal_eye(const PolyEyeParams& p, int nodes_per_side);

double polygonal_eye_corner_angle(int M, int K);

struct PairPerturbation {
  int mode_count = 1;
  double amplitude = 0.0;    ///< upper bound on |delta_1|
  std::uint64_t seed = 0;
  double tilt = 1.0;         ///< delta_2 = tilt * delta_1 (1 is the 45 degree Crow plane)
  double decay = 2.0;        ///< mode m carries weight m^-decay before normalisation
  bool random_phase = true;  ///< false: all cosines peak at s = 0
};

/// One vortex of an antiparallel pair; the partner is its mirror image in x1 = 0.
struct PairParams {
  double b = 0.22;
  PairPerturbation perturbation{};
  int n_nodes = 1500;
  double axis_period = kTwoPi;
};

/// Nodes (b + d1(s), d2(s), L s / 2pi) with shift (0, 0, L).
Filament make_antiparallel_pair(const PairParams& p);

/// c0 with sin(theta/2) = exp(-pi c0^2 / 2).
double corner_c0(double theta);

struct CircleRef {
  double radius = 1.0;
};
struct LineRef {
  double b = 0.22;
  double axis_period = kTwoPi;
};
struct HelixRef {
  double a = 1.0;
  double pitch = 1.0;  ///< axial advance per radian
};

Filament make_reference(const CircleRef& c, int n_nodes);
Filament make_reference(const LineRef& l, int n_nodes);
Filament make_reference(const HelixRef& hx, int n_nodes);

}  // namespace vfl
