#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>

#include "vfl/vec3.hpp"

namespace vfl {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& a);
double trace(const Mat3& a);
double determinant(const Mat3& a);

/// Corner rotations of a rhombus-shaped skew polygon.
struct RhombusAngles {
  double rho0 = 0.0;
  double theta0 = 0.0;
  double rho1 = 0.0;
  double theta1 = 0.0;
};

/// Maps the frame (T, e1, e2) across a corner with turning data rho e^{i theta}.
Mat3 rotation_matrix(double rho, double theta);

/// |cos(theta0 - theta1) - cot(rho0/2) cot(rho1/2)|; zero exactly when the
/// product of the two corner rotations is a half turn.
double constraint_residual(const RhombusAngles& a);

inline constexpr double kConstraintTolerance = 1e-10;

/// trace(M1 M0) = -1 + 4 sin^2(rho0/2) sin^2(rho1/2) (cos(theta0 - theta1) - cot(rho0/2) cot(rho1/2))^2.
double trace_closed_form(const RhombusAngles& a);

/// Trace of the explicit product M1 M0.
double trace_product(const RhombusAngles& a);

/// Uniform random angles (rho in (0, pi), theta in [-pi, pi)).
RhombusAngles random_angles(std::mt19937_64& rng);

/// Random angles on the constraint surface: rho0, rho1 drawn until
/// |cot(rho0/2) cot(rho1/2)| <= 1, then theta0 = theta1 +- acos of it.
RhombusAngles random_constrained_angles(std::mt19937_64& rng);

struct SkewPolygon {
  std::array<Vec3, 4> tangents;
  double side_length = 0.0;
};

/// Frames propagated from T = e1, e1 = e2, e2 = e3 by M0, M1, M0. Rejects
/// angles off the constraint surface (the message carries the residual).
SkewPolygon build_rhombus(const RhombusAngles& a);

/// Vertices X_0 = 0, X_{k+1} = X_k + side * T_k.
std::array<Vec3, 4> rhombus_vertices(const SkewPolygon& p);

struct RhombusImpulse {
  Vec3 F{};                  ///< pi^2/8 (T0 ^ T1 + T2 ^ T3)
  double f_sq_direct = 0.0;  ///< |T0 ^ T1 + T2 ^ T3|^2
  double f_sq_closed = 0.0;  ///< 4 (1 + T0.T1) (1 + T1.T2)
  /// (pi^4/16) sin^2 rho0 (1 - sin^2(rho1/2) sin^2(theta0 - theta1)), when angles are given.
  std::optional<double> F_sq_from_angles;
};

inline constexpr double kClosureTolerance = 1e-9;

/// Rejects polygons whose tangents do not sum to zero.
RhombusImpulse rhombus_impulse(const SkewPolygon& p, const std::optional<RhombusAngles>& angles = std::nullopt);

struct ThetaSeriesParams {
  int K = 1;
  int r = 0;
  int Q = 1;
};

/// sum_{q=-Q}^{Q} exp(-4i (Kq + r)^2 t + 2i (Kq + r) s). Phases are reduced
/// with t taken modulo pi/2 and s modulo pi, so that whole turns are dropped
/// exactly before any rounding.
std::complex<double> theta_series(const ThetaSeriesParams& p, double s, double t);

/// exp(4i r^2 t) theta_r(s, t), the time-dependent factor pulled out.
std::complex<double> theta_series_scaled(const ThetaSeriesParams& p, double s, double t);

/// sum_{k=1}^{Q} exp(i t k^2) / k^2, with t reduced modulo 2 pi.
std::complex<double> riemann_function(double t, int truncation);

}  // namespace vfl
