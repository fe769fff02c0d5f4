#include "vfl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>

namespace vfl {

namespace {

// Centered 8th-order weights for offsets 1..4.
constexpr double kD1[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
constexpr double kD2Center = -205.0 / 72.0;
constexpr double kD2[4] = {8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
constexpr int kHalfWidth = 4;

int wrap(int j, int n) {
  const int r = j % n;
  return r < 0 ? r + n : r;
}

// Number of whole periods to move index j into [0, n).
int period_count(int j, int n) { return (j - wrap(j, n)) / n; }

Vec3 apply_mirror_power(Vec3 v, int k) { return (k % 2 == 0) ? v : mirror_d(v); }

// Six-point Lagrange interpolation on nodes -2..3 at t in [0, 1].
void lagrange6_weights(double t, double w[6]) {
  for (int k = 0; k < 6; ++k) {
    const double xk = k - 2;
    double num = 1.0;
    double den = 1.0;
    for (int m = 0; m < 6; ++m) {
      if (m == k) continue;
      const double xm = m - 2;
      num *= (t - xm);
      den *= (xk - xm);
    }
    w[k] = num / den;
  }
}

// Derivative of the six-point Lagrange basis at t.
void lagrange6_derivative_weights(double t, double w[6]) {
  for (int k = 0; k < 6; ++k) {
    const double xk = k - 2;
    double den = 1.0;
    for (int m = 0; m < 6; ++m) {
      if (m != k) den *= (xk - (m - 2));
    }
    double acc = 0.0;
    for (int m = 0; m < 6; ++m) {
      if (m == k) continue;
      double prod = 1.0;
      for (int l = 0; l < 6; ++l) {
        if (l != k && l != m) prod *= (t - (l - 2));
      }
      acc += prod;
    }
    w[k] = acc / den;
  }
}

// Gauss-Legendre 5-point rule on [0, 1].
constexpr double kGlNodes[5] = {0.5 - 0.4530899229693320, 0.5 - 0.2692346550528416, 0.5,
                                0.5 + 0.2692346550528416, 0.5 + 0.4530899229693320};
constexpr double kGlWeights[5] = {0.1184634425280945, 0.2393143352496832, 0.2844444444444444,
                                  0.2393143352496832, 0.1184634425280945};

Vec3 interp_vec(const std::vector<Vec3>& ext, int pad, int cell, double t) {
  double w[6];
  lagrange6_weights(t, w);
  Vec3 v{};
  for (int k = 0; k < 6; ++k) v += w[k] * ext[static_cast<std::size_t>(cell - 2 + k + pad)];
  return v;
}

// |dP/dt| of the cell interpolant; t runs over [0, 1] across one cell.
double interp_speed(const std::vector<Vec3>& ext, int pad, int cell, double t) {
  double w[6];
  lagrange6_derivative_weights(t, w);
  Vec3 v{};
  for (int k = 0; k < 6; ++k) v += w[k] * ext[static_cast<std::size_t>(cell - 2 + k + pad)];
  return norm(v);
}

// Arc length of `cell` from its start up to fraction t.
double partial_cell_length(const std::vector<Vec3>& ext, int pad, int cell, double t) {
  double acc = 0.0;
  for (int q = 0; q < 5; ++q) acc += kGlWeights[q] * interp_speed(ext, pad, cell, t * kGlNodes[q]);
  return acc * t;
}

// Arc over chord for a circular arc subtending angle phi.
double arc_over_chord(double phi) {
  const double half = 0.5 * phi;
  if (half < 1e-4) return 1.0 + half * half / 6.0;
  return half / std::sin(half);
}

double turning_angle_at(const Filament& f, int j) {
  const Vec3 a = node_at(f, j) - node_at(f, j - 1);
  const Vec3 b = node_at(f, j + 1) - node_at(f, j);
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

struct ArcTable {
  std::vector<Vec3> pos_ext;       // nodes padded by kPad ghosts on each side
  std::vector<double> cumulative;  // size n + 1
  static constexpr int kPad = 3;
};

// Cell i spans nodes i and i + 1. Its length is the chord times the circular
// arc factor, with the subtended angle estimated from the turning angles at
// both ends. A turning angle far above its partner marks a corner and is
// ignored, since the arc on either side of a corner is smooth.
ArcTable build_arc_table(const Filament& f) {
  const int n = f.size();
  ArcTable table;
  table.pos_ext = ghost_extend(f, ArcTable::kPad);
  std::vector<double> turn(static_cast<std::size_t>(n + 1));
  for (int j = 0; j <= n; ++j) turn[static_cast<std::size_t>(j)] = turning_angle_at(f, j);
  table.cumulative.assign(static_cast<std::size_t>(n + 1), 0.0);
  for (int i = 0; i < n; ++i) {
    const double a = turn[static_cast<std::size_t>(i)];
    const double b = turn[static_cast<std::size_t>(i + 1)];
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double phi = (hi > 4.0 * lo + 1e-3) ? lo : 0.5 * (a + b);
    const double chord = norm(table.pos_ext[static_cast<std::size_t>(i + 1 + ArcTable::kPad)] -
                              table.pos_ext[static_cast<std::size_t>(i + ArcTable::kPad)]);
    table.cumulative[static_cast<std::size_t>(i + 1)] =
        table.cumulative[static_cast<std::size_t>(i)] + chord * arc_over_chord(phi);
  }
  return table;
}

}  // namespace

ParamGrid::ParamGrid(int n_nodes) : n_(n_nodes), h_(kTwoPi / n_nodes) {
  if (n_nodes < kMinNodes) {
    throw std::invalid_argument("ParamGrid: n_nodes must be >= " + std::to_string(kMinNodes) + ", got " +
                                std::to_string(n_nodes));
  }
}

Filament::Filament(ParamGrid g, std::vector<Vec3> x, BoundaryMap b, double t)
    : grid(g), nodes(std::move(x)), boundary(b), time(t) {
  if (static_cast<int>(nodes.size()) != grid.size()) {
    throw std::invalid_argument("Filament: node count " + std::to_string(nodes.size()) +
                                " does not match grid size " + std::to_string(grid.size()));
  }
}

void validate(const Filament& f) {
  const int n = f.size();
  if (static_cast<int>(f.nodes.size()) != n) throw std::invalid_argument("Filament: node count mismatch");
  for (int j = 0; j < n; ++j) {
    if (!is_finite(f.nodes[static_cast<std::size_t>(j)])) {
      throw std::invalid_argument("Filament: non-finite node at index " + std::to_string(j));
    }
  }
  for (int j = 0; j < n; ++j) {
    if (norm(node_at(f, j + 1) - node_at(f, j)) <= 0.0) {
      throw std::invalid_argument("Filament: coincident consecutive nodes at index " + std::to_string(j));
    }
  }
}

Vec3 node_at(const Filament& f, int j) {
  const int n = f.size();
  const int k = period_count(j, n);
  const Vec3& base = f.nodes[static_cast<std::size_t>(wrap(j, n))];
  if (k == 0) return base;
  return std::visit(
      [&](const auto& b) -> Vec3 {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PeriodicShift>) {
          return base + static_cast<double>(k) * b.shift;
        } else {
          return apply_mirror_power(base, k);
        }
      },
      f.boundary);
}

std::vector<Vec3> ghost_extend(const Filament& f, int width) {
  const int n = f.size();
  if (width < 0 || width > n / 2) {
    throw std::invalid_argument("ghost_extend: width " + std::to_string(width) + " exceeds n_nodes/2 = " +
                                std::to_string(n / 2));
  }
  std::vector<Vec3> ext(static_cast<std::size_t>(n + 2 * width));
  for (int j = -width; j < n + width; ++j) ext[static_cast<std::size_t>(j + width)] = node_at(f, j);
  return ext;
}

std::vector<Vec3> ghost_extend_field(std::span<const Vec3> field, const BoundaryMap& boundary, int width) {
  const int n = static_cast<int>(field.size());
  if (width < 0 || width > n / 2) throw std::invalid_argument("ghost_extend_field: width too large");
  const bool mirror = is_mirror(boundary);
  std::vector<Vec3> ext(static_cast<std::size_t>(n + 2 * width));
  for (int j = -width; j < n + width; ++j) {
    const Vec3& v = field[static_cast<std::size_t>(wrap(j, n))];
    ext[static_cast<std::size_t>(j + width)] = mirror ? apply_mirror_power(v, period_count(j, n)) : v;
  }
  return ext;
}

void central_d1(std::span<const Vec3> ext, double h, std::span<Vec3> out) {
  const double inv_h = 1.0 / h;
  const std::size_t n = out.size();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j + kHalfWidth;
    Vec3 acc{};
    for (int k = 0; k < kHalfWidth; ++k) {
      const std::size_t o = static_cast<std::size_t>(k + 1);
      acc += kD1[k] * (ext[c + o] - ext[c - o]);
    }
    out[j] = acc * inv_h;
  }
}

void central_d2(std::span<const Vec3> ext, double h, std::span<Vec3> out) {
  const double inv_h2 = 1.0 / (h * h);
  const std::size_t n = out.size();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j + kHalfWidth;
    Vec3 acc = kD2Center * ext[c];
    for (int k = 0; k < kHalfWidth; ++k) {
      const std::size_t o = static_cast<std::size_t>(k + 1);
      acc += kD2[k] * (ext[c + o] + ext[c - o]);
    }
    out[j] = acc * inv_h2;
  }
}

DerivativeFields derivative_fields(const Filament& f) {
  const auto ext = ghost_extend(f, kHalfWidth);
  const std::size_t n = static_cast<std::size_t>(f.size());
  DerivativeFields d{std::vector<Vec3>(n), std::vector<Vec3>(n)};
  central_d1(ext, f.h(), d.xs);
  central_d2(ext, f.h(), d.xss);
  return d;
}

FrenetData frenet_curvature_torsion(const Filament& f, double curvature_floor) {
  auto d = derivative_fields(f);
  const std::size_t n = d.xs.size();
  std::vector<Vec3> xsss(n);
  central_d1(ghost_extend_field(d.xss, f.boundary, kHalfWidth), f.h(), xsss);

  FrenetData out;
  out.tangent.resize(n);
  out.curvature.resize(n);
  out.torsion.resize(n);
  out.torsion_degenerate.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const double speed = norm(d.xs[j]);
    if (!(speed > 0.0)) {
      throw std::invalid_argument("frenet_curvature_torsion: zero tangent at node " + std::to_string(j));
    }
    out.tangent[j] = d.xs[j] / speed;
    const Vec3 b = cross(d.xs[j], d.xss[j]);
    const double b_norm = norm(b);
    out.curvature[j] = b_norm / (speed * speed * speed);
    if (out.curvature[j] < curvature_floor) {
      out.torsion[j] = 0.0;
      out.torsion_degenerate[j] = true;
    } else {
      out.torsion[j] = dot(b, xsss[j]) / (b_norm * b_norm);
    }
  }
  out.xs = std::move(d.xs);
  out.xss = std::move(d.xss);
  return out;
}

std::vector<std::complex<double>> hasimoto_psi(const Filament& f) {
  return hasimoto_psi(f, frenet_curvature_torsion(f));
}

std::vector<std::complex<double>> hasimoto_psi(const Filament& f, const FrenetData& fr) {
  const std::size_t n = fr.curvature.size();
  std::vector<std::complex<double>> psi(n);
  double phase = 0.0;
  auto rate = [&](std::size_t j) { return fr.torsion_degenerate[j] ? 0.0 : fr.torsion[j]; };
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) phase += 0.5 * f.h() * (rate(j - 1) + rate(j));
    psi[j] = std::polar(fr.curvature[j], phase);
  }
  return psi;
}

double curve_length(const Filament& f) { return build_arc_table(f).cumulative.back(); }

double polygon_length(const Filament& f) {
  double len = 0.0;
  for (int j = 0; j < f.size(); ++j) len += norm(node_at(f, j + 1) - node_at(f, j));
  return len;
}

Filament arclength_reparametrize(const Filament& f, double target_total_length) {
  if (!(target_total_length > 0.0)) throw std::invalid_argument("arclength_reparametrize: target length must be > 0");
  const int n = f.size();
  const ArcTable table = build_arc_table(f);
  const double total = table.cumulative.back();
  if (!(total > 1e-12)) throw std::invalid_argument("arclength_reparametrize: degenerate curve of near-zero length");

  std::vector<Vec3> out(static_cast<std::size_t>(n));
  out[0] = f.nodes[0];
  int cell = 0;
  for (int j = 1; j < n; ++j) {
    const double target = total * j / n;
    while (cell < n - 1 && table.cumulative[static_cast<std::size_t>(cell + 1)] <= target) ++cell;
    const double base = table.cumulative[static_cast<std::size_t>(cell)];
    const double cell_len = table.cumulative[static_cast<std::size_t>(cell + 1)] - base;
    // Within the cell, distribute arc length like the interpolant's speed.
    const double frac = cell_len > 0.0 ? (target - base) / cell_len : 0.0;
    const double interp_len = partial_cell_length(table.pos_ext, ArcTable::kPad, cell, 1.0);
    double t = frac;
    for (int it = 0; it < 50; ++it) {
      const double residual = partial_cell_length(table.pos_ext, ArcTable::kPad, cell, t) - frac * interp_len;
      const double slope = interp_speed(table.pos_ext, ArcTable::kPad, cell, t);
      if (!(slope > 0.0)) break;
      const double step = residual / slope;
      t = std::clamp(t - step, 0.0, 1.0);
      if (std::abs(step) < 1e-15) break;
    }
    out[static_cast<std::size_t>(j)] = interp_vec(table.pos_ext, ArcTable::kPad, cell, t);
  }

  const double scale = target_total_length / total;
  BoundaryMap boundary = f.boundary;
  if (auto* p = std::get_if<PeriodicShift>(&boundary)) p->shift *= scale;
  if (scale != 1.0) {
    for (auto& v : out) v *= scale;
  }
  return Filament(f.grid, std::move(out), boundary, f.time);
}

AssembledLoop closed_curve_assemble(const Filament& f) {
  if (!is_mirror(f.boundary)) {
    throw std::invalid_argument("closed_curve_assemble: requires a MirrorAntisymmetric filament");
  }
  const std::size_t n = f.nodes.size();
  AssembledLoop loop;
  loop.points.reserve(2 * n);
  for (const auto& v : f.nodes) loop.points.push_back(v);
  for (const auto& v : f.nodes) loop.points.push_back(mirror_d(v));
  for (std::size_t j = 0; j + 1 < n; ++j) {
    loop.max_spacing = std::max(loop.max_spacing, norm(f.nodes[j + 1] - f.nodes[j]));
  }
  const double gap_a = norm(mirror_d(f.nodes.front()) - f.nodes.back());
  const double gap_b = norm(f.nodes.front() - mirror_d(f.nodes.back()));
  loop.max_junction_gap = std::max(gap_a, gap_b);
  if (loop.max_junction_gap > 2.0 * loop.max_spacing) {
    loop.gap_warning = true;
    std::cerr << "warning: closed_curve_assemble junction gap " << loop.max_junction_gap
              << " exceeds twice the node spacing " << loop.max_spacing << '\n';
  }
  return loop;
}

std::vector<double> turning_angles(const Filament& f) {
  const int n = f.size();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const Vec3 a = node_at(f, j) - node_at(f, j - 1);
    const Vec3 b = node_at(f, j + 1) - node_at(f, j);
    out[static_cast<std::size_t>(j)] = std::atan2(norm(cross(a, b)), dot(a, b));
  }
  return out;
}

double hausdorff_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  auto directed = [](std::span<const Vec3> p, std::span<const Vec3> q) {
    double worst = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) best = std::min(best, norm2(x - y));
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, b), directed(b, a));
}

}  // namespace vfl
