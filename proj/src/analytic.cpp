#include "vfl/analytic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

constexpr double kPi = std::numbers::pi;

// exp(-i * 4 n2 t) with n2 an integer: t = m pi/2 + tau, and 4 n2 m pi/2 is a
// whole number of turns.
std::complex<double> quartic_phase(long long n2, double t) {
  const double quarter = 0.5 * kPi;
  const double m = std::floor(t / quarter);
  const double tau = t - m * quarter;
  return std::polar(1.0, -4.0 * static_cast<double>(n2) * tau);
}

double reduce(double x, double period) { return x - std::floor(x / period) * period; }

double cot(double x) { return std::cos(x) / std::sin(x); }

Vec3 row(const Mat3& m, int i, const std::array<Vec3, 3>& frame) {
  return m[i][0] * frame[0] + m[i][1] * frame[1] + m[i][2] * frame[2];
}

}  // namespace

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

double trace(const Mat3& a) { return a[0][0] + a[1][1] + a[2][2]; }

double determinant(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Mat3 rotation_matrix(double rho, double theta) {
  const double c = std::cos(rho);
  const double s = std::sin(rho);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  return Mat3{{{c, s * ct, s * st},
               {-s * ct, c * ct * ct + st * st, (c - 1.0) * ct * st},
               {-s * st, (c - 1.0) * ct * st, c * st * st + ct * ct}}};
}

double constraint_residual(const RhombusAngles& a) {
  return std::abs(std::cos(a.theta0 - a.theta1) - cot(0.5 * a.rho0) * cot(0.5 * a.rho1));
}

double trace_closed_form(const RhombusAngles& a) {
  const double s0 = std::sin(0.5 * a.rho0);
  const double s1 = std::sin(0.5 * a.rho1);
  // cot * sin written as cos to stay finite at rho = 0.
  const double d = std::cos(a.theta0 - a.theta1) * s0 * s1 - std::cos(0.5 * a.rho0) * std::cos(0.5 * a.rho1);
  return -1.0 + 4.0 * d * d;
}

double trace_product(const RhombusAngles& a) {
  return trace(rotation_matrix(a.rho1, a.theta1) * rotation_matrix(a.rho0, a.theta0));
}

RhombusAngles random_angles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rho(0.0, kPi);
  std::uniform_real_distribution<double> theta(-kPi, kPi);
  RhombusAngles a;
  a.rho0 = rho(rng);
  a.theta0 = theta(rng);
  a.rho1 = rho(rng);
  a.theta1 = theta(rng);
  return a;
}

RhombusAngles random_constrained_angles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rho(0.0, kPi);
  std::uniform_real_distribution<double> theta(-kPi, kPi);
  std::bernoulli_distribution sign(0.5);
  for (;;) {
    const double r0 = rho(rng);
    const double r1 = rho(rng);
    if (r0 <= 0.0 || r1 <= 0.0) continue;
    const double c = cot(0.5 * r0) * cot(0.5 * r1);
    if (std::abs(c) > 1.0) continue;
    RhombusAngles a;
    a.rho0 = r0;
    a.rho1 = r1;
    a.theta1 = theta(rng);
    a.theta0 = a.theta1 + (sign(rng) ? 1.0 : -1.0) * std::acos(c);
    return a;
  }
}

SkewPolygon build_rhombus(const RhombusAngles& a) {
  const double res = constraint_residual(a);
  if (!(res <= kConstraintTolerance)) {
    std::ostringstream msg;
    msg << "build_rhombus: angles violate the half-turn constraint, residual " << res;
    throw std::invalid_argument(msg.str());
  }
  const Mat3 m[2] = {rotation_matrix(a.rho0, a.theta0), rotation_matrix(a.rho1, a.theta1)};
  std::array<Vec3, 3> frame = {kE1, kE2, kE3};
  SkewPolygon p;
  p.side_length = 0.5 * kPi;
  for (int k = 0; k < 4; ++k) {
    p.tangents[static_cast<std::size_t>(k)] = frame[0];
    const Mat3& mk = m[k % 2];
    frame = {row(mk, 0, frame), row(mk, 1, frame), row(mk, 2, frame)};
  }
  return p;
}

std::array<Vec3, 4> rhombus_vertices(const SkewPolygon& p) {
  std::array<Vec3, 4> x{};
  for (std::size_t k = 1; k < 4; ++k) x[k] = x[k - 1] + p.side_length * p.tangents[k - 1];
  return x;
}

RhombusImpulse rhombus_impulse(const SkewPolygon& p, const std::optional<RhombusAngles>& angles) {
  const auto& T = p.tangents;
  const double gap = norm(T[0] + T[1] + T[2] + T[3]);
  if (!(gap <= kClosureTolerance)) {
    std::ostringstream msg;
    msg << "rhombus_impulse: tangents do not close, |sum T| = " << gap;
    throw std::invalid_argument(msg.str());
  }
  const Vec3 f = cross(T[0], T[1]) + cross(T[2], T[3]);
  RhombusImpulse out;
  out.F = (kPi * kPi / 8.0) * f;
  out.f_sq_direct = norm2(f);
  out.f_sq_closed = 4.0 * (1.0 + dot(T[0], T[1])) * (1.0 + dot(T[1], T[2]));
  if (angles) {
    const double s0 = std::sin(angles->rho0);
    const double h1 = std::sin(0.5 * angles->rho1);
    const double d = std::sin(angles->theta0 - angles->theta1);
    out.F_sq_from_angles = std::pow(kPi, 4) / 16.0 * s0 * s0 * (1.0 - h1 * h1 * d * d);
  }
  return out;
}

std::complex<double> theta_series(const ThetaSeriesParams& p, double s, double t) {
  if (p.Q < 1) throw std::invalid_argument("theta_series: truncation must be >= 1");
  if (p.K < 1) throw std::invalid_argument("theta_series: K must be >= 1");
  const double sr = reduce(s, kPi);
  std::complex<double> acc{};
  for (long long q = -p.Q; q <= p.Q; ++q) {
    const long long n = static_cast<long long>(p.K) * q + p.r;
    acc += quartic_phase(n * n, t) * std::polar(1.0, 2.0 * static_cast<double>(n) * sr);
  }
  return acc;
}

std::complex<double> theta_series_scaled(const ThetaSeriesParams& p, double s, double t) {
  const long long r2 = static_cast<long long>(p.r) * p.r;
  return std::conj(quartic_phase(r2, t)) * theta_series(p, s, t);
}

std::complex<double> riemann_function(double t, int truncation) {
  if (truncation < 1) throw std::invalid_argument("riemann_function: truncation must be >= 1");
  const double tr = reduce(t, 2.0 * kPi);
  std::complex<double> acc{};
  // Smallest terms first.
  for (long long k = truncation; k >= 1; --k) {
    const double k2 = static_cast<double>(k * k);
    acc += std::polar(1.0 / k2, reduce(k2 * tr, 2.0 * kPi));
  }
  return acc;
}

}  // namespace vfl
