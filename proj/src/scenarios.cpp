#include "vfl/scenarios.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace vfl {

namespace {

constexpr double kPi = std::numbers::pi;

// Five-point Gauss-Legendre on [-1, 1].
constexpr double kGl5x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                             0.9061798459386640};
constexpr double kGl5w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                             0.2369268850561891};

// Arc length along one branch of the eye, s in [0, pi].
class EyeArc {
 public:
  EyeArc(double b, double b_tilde) : c2_(b * b + b_tilde * b_tilde), cumulative_(kPanels + 1, 0.0) {
    for (int p = 0; p < kPanels; ++p) cumulative_[p + 1] = cumulative_[p] + integrate(edge(p), edge(p + 1));
  }

  double speed(double s) const {
    const double c = std::cos(s);
    return std::sqrt(1.0 + c2_ * c * c);
  }
  double length() const { return cumulative_.back(); }

  double arc(double s) const {
    int p = static_cast<int>(s / edge(1));
    if (p >= kPanels) p = kPanels - 1;
    if (p < 0) p = 0;
    return cumulative_[p] + integrate(edge(p), s);
  }

  double invert(double target) const {
    double s = kPi * target / length();
    for (int it = 0; it < 60; ++it) {
      const double step = (arc(s) - target) / speed(s);
      s -= step;
      if (std::abs(step) < 1e-16) break;
    }
    return s;
  }

 private:
  static constexpr int kPanels = 4096;
  static double edge(int p) { return kPi * p / kPanels; }

  double integrate(double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int q = 0; q < 5; ++q) acc += kGl5w[q] * speed(mid + half * kGl5x[q]);
    return acc * half;
  }

  double c2_;
  std::vector<double> cumulative_;
};

Vec3 eye_point(double b, double b_tilde, double s) {
  if (s <= kPi) return {b * std::sin(s), s - kPi / 2.0, -b_tilde * std::sin(s)};
  return {b * std::sin(s), 3.0 * kPi / 2.0 - s, b_tilde * std::sin(s)};
}

double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

double eye_corner_angle(double b, double b_tilde) {
  if (!(b > 0.0)) throw std::invalid_argument("eye_corner_angle: b must be > 0");
  const double bt2 = b_tilde * b_tilde;
  return std::acos((1.0 + bt2 - b * b) / (1.0 + bt2 + b * b));
}

Filament sample_eye_curve(const EyeParams& p) {
  if (!(p.b > 0.0)) throw std::invalid_argument("make_eye: b must be > 0");
  if (!(p.b_tilde >= 0.0)) throw std::invalid_argument("make_eye: b_tilde must be >= 0");
  if (p.n_nodes % 2 != 0) throw std::invalid_argument("make_eye: n_nodes must be even");
  const ParamGrid grid(p.n_nodes);
  const int half = p.n_nodes / 2;
  const EyeArc arc(p.b, p.b_tilde);
  std::vector<Vec3> nodes(static_cast<std::size_t>(p.n_nodes));
  for (int j = 0; j < half; ++j) {
    const double s = (j == 0) ? 0.0 : arc.invert(arc.length() * j / half);
    nodes[static_cast<std::size_t>(j)] = eye_point(p.b, p.b_tilde, s);
    // The second arc has the same speed profile shifted by pi.
    nodes[static_cast<std::size_t>(j + half)] = eye_point(p.b, p.b_tilde, s + kPi);
  }
  // Corners exactly: s = 0 is the limit from the second arc, s = pi closes the first.
  nodes[0] = {0.0, -kPi / 2.0, 0.0};
  nodes[static_cast<std::size_t>(half)] = {0.0, kPi / 2.0, 0.0};
  return Filament(grid, std::move(nodes), PeriodicShift{});
}

Filament make_eye(const EyeParams& p) {
  Filament f = sample_eye_curve(p);
  const double length = 2.0 * EyeArc(p.b, p.b_tilde).length();
  const double scale = kTwoPi / length;
  for (auto& v : f.nodes) v *= scale;
  return f;
}

double polygonal_eye_corner_angle(int M, int K) {
  const double l = static_cast<double>(M) / K;
  return kTwoPi * (M - l) / (l * M);
}

PolygonalEye make_polygonal_eye(const PolyEyeParams& p, int nodes_per_side) {
  if (p.M <= 0 || p.M % 2 != 0) throw std::invalid_argument("make_polygonal_eye: M must be a positive even integer");
  if (p.K <= 0 || p.M % p.K != 0) {
    throw std::invalid_argument("make_polygonal_eye: K = " + std::to_string(p.K) + " does not divide M = " +
                                std::to_string(p.M));
  }
  if (2 * p.K > p.M) throw std::invalid_argument("make_polygonal_eye: l = M/K must be >= 2");
  if (nodes_per_side < 1) throw std::invalid_argument("make_polygonal_eye: nodes_per_side must be >= 1");

  const int M = p.M;
  const int K = p.K;
  const double side = kPi / K;
  const double radius = side / (2.0 * std::sin(kPi / M));
  auto vertex = [&](int m) {
    const double a = kTwoPi * m / M;
    return Vec3{radius * std::sin(a), radius * std::cos(a), 0.0};
  };

  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>(2 * K));
  for (int m = 0; m <= K; ++m) verts.push_back(vertex(m));
  const Vec3 offset = vertex(K) - vertex(M / 2);
  for (int j = 1; j < K; ++j) verts.push_back(vertex(M / 2 + j) + offset);

  Vec3 centroid{};
  for (const auto& v : verts) centroid += v;
  centroid = centroid / static_cast<double>(verts.size());
  for (auto& v : verts) v -= centroid;

  const int n = 2 * K * nodes_per_side;
  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const Vec3& a = verts[k];
    const Vec3& b = verts[(k + 1) % verts.size()];
    for (int q = 0; q < nodes_per_side; ++q) {
      const double t = static_cast<double>(q) / nodes_per_side;
      nodes.push_back((1.0 - t) * a + t * b);
    }
  }
  return PolygonalEye{Filament(ParamGrid(n), std::move(nodes), PeriodicShift{}), polygonal_eye_corner_angle(M, K),
                      std::move(verts)};
}

Filament make_antiparallel_pair(const PairParams& p) {
  const auto& pert = p.perturbation;
  if (!(p.b > 0.0)) throw std::invalid_argument("make_antiparallel_pair: b must be > 0");
  if (!(pert.amplitude >= 0.0) || pert.amplitude >= p.b) {
    throw std::invalid_argument("make_antiparallel_pair: amplitude must lie in [0, b)");
  }
  if (pert.mode_count < 0) throw std::invalid_argument("make_antiparallel_pair: mode_count must be >= 0");
  if (!(p.axis_period > 0.0)) throw std::invalid_argument("make_antiparallel_pair: axis_period must be > 0");

  std::mt19937_64 rng(pert.seed);
  std::vector<double> weight(static_cast<std::size_t>(pert.mode_count));
  std::vector<double> phase(static_cast<std::size_t>(pert.mode_count));
  double weight_sum = 0.0;
  for (int m = 1; m <= pert.mode_count; ++m) {
    weight[static_cast<std::size_t>(m - 1)] = std::pow(static_cast<double>(m), -pert.decay);
    weight_sum += weight[static_cast<std::size_t>(m - 1)];
    const double u = unit_from_bits(rng());
    phase[static_cast<std::size_t>(m - 1)] = pert.random_phase ? kTwoPi * u : 0.0;
  }

  const ParamGrid grid(p.n_nodes);
  std::vector<Vec3> nodes(static_cast<std::size_t>(p.n_nodes));
  for (int j = 0; j < p.n_nodes; ++j) {
    const double s = grid.s(j);
    double d1 = 0.0;
    for (int m = 1; m <= pert.mode_count; ++m) {
      const auto k = static_cast<std::size_t>(m - 1);
      d1 += pert.amplitude * weight[k] / weight_sum * std::cos(m * s + phase[k]);
    }
    nodes[static_cast<std::size_t>(j)] = {p.b + d1, pert.tilt * d1, p.axis_period * s / kTwoPi};
  }
  return Filament(grid, std::move(nodes), PeriodicShift{{0.0, 0.0, p.axis_period}});
}

double corner_c0(double theta) {
  if (!(theta > 0.0 && theta <= kPi)) throw std::invalid_argument("corner_c0: theta must lie in (0, pi]");
  const double v = -2.0 * std::log(std::sin(theta / 2.0)) / kPi;
  return std::sqrt(std::max(v, 0.0));
}

Filament make_reference(const CircleRef& c, int n_nodes) {
  if (!(c.radius > 0.0)) throw std::invalid_argument("make_reference: radius must be > 0");
  const ParamGrid grid(n_nodes);
  std::vector<Vec3> nodes(static_cast<std::size_t>(n_nodes));
  for (int j = 0; j < n_nodes; ++j) {
    const double s = grid.s(j);
    nodes[static_cast<std::size_t>(j)] = {c.radius * std::cos(s), c.radius * std::sin(s), 0.0};
  }
  return Filament(grid, std::move(nodes), PeriodicShift{});
}

Filament make_reference(const LineRef& l, int n_nodes) {
  PairParams p;
  p.b = l.b;
  p.n_nodes = n_nodes;
  p.axis_period = l.axis_period;
  p.perturbation.mode_count = 0;
  return make_antiparallel_pair(p);
}

Filament make_reference(const HelixRef& hx, int n_nodes) {
  if (!(hx.a > 0.0) || !(hx.pitch > 0.0)) throw std::invalid_argument("make_reference: helix parameters must be > 0");
  const ParamGrid grid(n_nodes);
  std::vector<Vec3> nodes(static_cast<std::size_t>(n_nodes));
  for (int j = 0; j < n_nodes; ++j) {
    const double s = grid.s(j);
    nodes[static_cast<std::size_t>(j)] = {hx.a * std::cos(s), hx.a * std::sin(s), hx.pitch * s};
  }
  return Filament(grid, std::move(nodes), PeriodicShift{{0.0, 0.0, kTwoPi * hx.pitch}});
}

}  // namespace vfl
