#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "vfl/diagnostics.hpp"
#include "vfl/error.hpp"
#include "vfl/scenarios.hpp"

using namespace vfl;
using vfl::test::make_curve;

namespace {

constexpr double kPi = std::numbers::pi;

Filament wavy_ring(int n, double amp) {
  return make_curve(
      n, [&](double s) { return Vec3{std::cos(s), std::sin(s), amp * std::sin(3 * s)}; }, PeriodicShift{});
}

std::vector<double> sample(int n, double window, const std::function<double(double)>& f) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = f(j * window / n);
  return v;
}

}  // namespace

TEST_CASE("impulse of a circle is its area vector") {
  for (double R : {1.0, 1.5}) {
    const auto f = make_reference(CircleRef{R}, 256);
    const Vec3 F = fluid_impulse(f);
    CHECK(std::abs(F.x3 - kPi * R * R) < 1e-12);
    CHECK(std::hypot(F.x1, F.x2) < 1e-12);
    CHECK(norm(fluid_impulse(f, kTwoPi) - F) < 1e-12);
  }
}

TEST_CASE("impulse window on a circle grows linearly") {
  // 1/2 int X ^ X_s over a window of length l is l R^2 / 2 along e3.
  const double R = 1.3;
  const auto f = make_reference(CircleRef{R}, 128);
  for (double l : {0.0, 0.01, 0.3, 1.0, kPi, 5.0}) {
    CHECK(norm(fluid_impulse(f, l) - Vec3{0, 0, 0.5 * l * R * R}) < 1e-12);
  }
  CHECK_THROWS_AS(fluid_impulse(f, 7.0), std::invalid_argument);
  CHECK_THROWS_AS(fluid_impulse(f, -0.1), std::invalid_argument);
}

TEST_CASE("small windows on a generic curve vanish linearly") {
  const auto f = wavy_ring(256, 0.3);
  const double r1 = norm(fluid_impulse(f, 1e-3)) / 1e-3;
  const double r2 = norm(fluid_impulse(f, 1e-4)) / 1e-4;
  CHECK(r1 > 0.0);
  // Linear interpolation across the kink at s = 0 leaves an O(l / h) term.
  CHECK(std::abs(r1 - r2) < 1e-4 * r1);
  CHECK(norm(fluid_impulse(f, 0.0)) == 0.0);
}

TEST_CASE("planar eye encloses area 4") {
  // Green's theorem: the two arcs (sin s, +-(s - pi/2)) bound area 2 int_0^pi sin = 4.
  const auto f = sample_eye_curve(EyeParams{1.0, 0.0, 4096});
  const Vec3 F = fluid_impulse(f);
  CHECK(std::abs(norm(F) - 4.0) < 1e-5);
  CHECK(std::abs(F.x1) < 1e-12);
  CHECK(std::abs(F.x2) < 1e-12);
}

TEST_CASE("mirror loop impulse") {
  // Half of a unit circle in the x1-x3 plane closes under D into the full circle.
  const auto f = make_curve(
      128, [](double s) { return Vec3{std::cos(s / 2), 0.0, std::sin(s / 2)}; }, MirrorAntisymmetric{});
  const Vec3 F = loop_impulse(f);
  CHECK(std::abs(std::abs(F.x2) - kPi) < 1e-12);
  CHECK(std::hypot(F.x1, F.x3) < 1e-12);
  CHECK_THROWS_AS(loop_impulse(make_reference(CircleRef{1.0}, 64)), std::invalid_argument);
}

TEST_CASE("coordinate slices of a straight line") {
  // (b, 0, z) ^ (0, 0, 1) = (0, -b, 0): each full bin carries b dq / 2.
  const double b = 0.22;
  const int n = 256;
  const auto f = make_reference(LineRef{b, kTwoPi}, n);
  const double dq = 8 * f.h() * (1 - 1e-9);
  const auto p = sliced_impulse_by_coordinate(f, dq);
  REQUIRE(p.q.size() == 32);
  for (std::size_t i = 0; i < p.q.size(); ++i) {
    CHECK(std::abs(p.moduli[i] - 0.5 * b * 8 * f.h()) < 1e-12);
    CHECK(p.vectors[i].x2 < 0.0);
  }
  CHECK_THROWS_AS(sliced_impulse_by_coordinate(f, 0.0), std::invalid_argument);
}

TEST_CASE("coordinate slices of a planar circle use one bin") {
  const auto f = make_reference(CircleRef{1.0}, 128);
  const auto p = sliced_impulse_by_coordinate(f, 0.1);
  REQUIRE(p.q.size() == 1);
  CHECK(std::abs(p.moduli[0] - kPi) < 1e-12);
}

TEST_CASE("parameter slices are additive") {
  const auto f = wavy_ring(256, 0.3);
  const Vec3 full = fluid_impulse(f);
  for (double dq : {0.1, 0.5, kPi / 4, kTwoPi}) {
    const auto p = sliced_impulse_by_parameter(f, dq);
    Vec3 sum{};
    for (const auto& v : p.vectors) sum += v;
    CHECK(norm(sum - full) < 1e-10);
  }
  CHECK_THROWS_AS(sliced_impulse_by_parameter(f, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sliced_impulse_by_parameter(f, 7.0), std::invalid_argument);
}

TEST_CASE("parameter slices of a circle are equal") {
  const auto f = make_reference(CircleRef{1.0}, 256);
  const auto p = sliced_impulse_by_parameter(f, kTwoPi / 16);
  REQUIRE(p.q.size() == 16);
  for (double m : p.moduli) CHECK(std::abs(m - p.moduli[0]) < 1e-12);
}

TEST_CASE("parameter slices of the planar eye peak at the corners") {
  // Bin impulse scales with |X|; for b~ = 2 the middle of each arc is farther
  // from the origin than the corners and wins instead.
  const auto f = make_eye(EyeParams{1.0, 0.0, 1024});
  const auto p = sliced_impulse_by_parameter(f, kTwoPi / 32);
  const auto top = std::max_element(p.moduli.begin(), p.moduli.end()) - p.moduli.begin();
  // Corners sit at s = 0 and s = pi: first bin of each half, or the bin ending there.
  CHECK((top == 0 || top == 15 || top == 16 || top == 31));
}

TEST_CASE("curvature mass near stations") {
  const auto circle = make_reference(CircleRef{1.0}, 256);
  const double c[] = {0.0};
  const double frac = curvature_mass_fraction(circle, c, kPi / 4);
  CHECK(std::abs(frac - 65.0 / 256.0) < 1e-12);
  // 64 chords of 4 nodes each: 17 coarse vertices within pi/4 of s = 0.
  CHECK(std::abs(curvature_mass_fraction(circle, c, kPi / 4, 4) - 17.0 / 64.0) < 1e-12);
  CHECK_THROWS_AS(curvature_mass_fraction(circle, c, kPi / 4, 3), std::invalid_argument);

  const auto eye = make_eye(EyeParams{1.0, 2.0, 1024});
  const double corners[] = {0.0, kPi};
  const double quarter[] = {kPi / 2, 3 * kPi / 2};
  CHECK(curvature_mass_fraction(eye, corners, kPi / 16) > 0.5);
  CHECK(curvature_mass_fraction(eye, quarter, kPi / 16) < curvature_mass_fraction(eye, corners, kPi / 16));
  CHECK(curvature_mass_fraction(eye, corners, kPi / 16, 8) > 0.5);
}

TEST_CASE("grid impulse of a thin ring") {
  const double R = 1.0;
  const double gamma = 1.0;
  const double core = 0.2;
  const auto g = make_vortex_ring_grid(64, 2.0, R, gamma, core);
  const auto p = grid_impulse(g, 4.0);
  REQUIRE(p.q.size() == 1);
  // Gaussian core: pi gamma (R^2 + core^2 / 2) exactly, pi gamma R^2 when thin.
  CHECK(std::abs(p.moduli[0] - kPi * gamma * R * R) < 0.05 * kPi * gamma * R * R);
  CHECK(std::abs(p.vectors[0].x3 - kPi * gamma * (R * R + 0.5 * core * core)) < 1e-3);

  // Thinner slabs partition the same vector.
  const auto thin = grid_impulse(g, 0.5);
  Vec3 sum{};
  for (const auto& v : thin.vectors) sum += v;
  CHECK(norm(sum - p.vectors[0]) < 1e-12);
  CHECK_THROWS_AS(grid_impulse(g, 0.01), std::invalid_argument);
}

TEST_CASE("grid impulse is origin independent") {
  auto g = make_vortex_ring_grid(64, 2.0, 1.0, 1.0, 0.2);
  const Vec3 ref = grid_impulse(g, 4.0).vectors[0];
  g.origin += Vec3{0.3, -0.2, 0.1};
  const Vec3 moved = grid_impulse(g, 4.0).vectors[0];
  CHECK(norm(moved - ref) < 0.01 * norm(ref));
}

TEST_CASE("grid impulse of zero and cancelling fields") {
  auto g = make_vortex_ring_grid(32, 2.0, 1.0, 1.0, 0.2);
  VorticityGrid zero = g;
  std::fill(zero.omega.begin(), zero.omega.end(), 0.0);
  for (double m : grid_impulse(zero, 0.5).moduli) CHECK(m == 0.0);

  auto pair = make_vortex_ring_grid(32, 2.0, 1.0, 1.0, 0.2, 0.5);
  accumulate(pair, make_vortex_ring_grid(32, 2.0, 1.0, -1.0, 0.2, -0.5));
  // Grid symmetric about z = 0 needs an even count and a node at the centre.
  CHECK(grid_impulse(pair, 4.0).moduli[0] < 1e-10);

  VorticityGrid bad = g;
  bad.omega.pop_back();
  CHECK_THROWS_AS(grid_impulse(bad, 1.0), std::invalid_argument);
}

TEST_CASE("vorticity grid file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "vfl_grid_test";
  std::filesystem::create_directories(dir);
  const auto g = make_vortex_ring_grid(8, 1.0, 0.5, 1.0, 0.2);
  write_vorticity_grid(g, dir / "ring.json");
  const auto back = read_vorticity_grid(dir / "ring.json");
  CHECK(back.nx == 8);
  CHECK(back.dz == g.dz);
  CHECK(back.origin == g.origin);
  CHECK(back.omega == g.omega);

  std::filesystem::resize_file(dir / "ring.bin", 100);
  CHECK_THROWS_AS(read_vorticity_grid(dir / "ring.json"), ConfigError);
  CHECK_THROWS_AS(read_vorticity_grid(dir / "missing.json"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("spectrum of a cosine") {
  const int N = 256;
  const auto v = sample(N, kTwoPi, [](double t) { return 5.0 + 2.0 * std::cos(3 * t); });
  const auto s = spectrum(v);
  REQUIRE(s.k.size() == N / 2 + 1);
  CHECK(s.coeff_modulus[0] < 1e-14);
  CHECK(std::abs(s.coeff_modulus[3] - 1.0) < 1e-13);
  CHECK(std::abs(s.weighted[3] - 3.0) < 1e-12);
  for (std::size_t k = 0; k < s.k.size(); ++k) {
    if (k != 3) CHECK(s.coeff_modulus[k] < 1e-13);
  }
  const auto d = square_dominance(s, 8);
  CHECK(d.n.front() == 2);
  CHECK_FALSE(d.dominant.front());
  CHECK(d.fraction < 1.0);
  CHECK_THROWS_AS(spectrum(std::vector<double>(63, 1.0)), std::invalid_argument);
}

TEST_CASE("square flags") {
  const auto s = spectrum(std::vector<double>(128, 0.0));
  for (std::size_t k = 0; k < s.k.size(); ++k) {
    const int r = static_cast<int>(std::round(std::sqrt(k)));
    CHECK(s.is_square[k] == (r * r == static_cast<int>(k)));
  }
  CHECK(s.is_square[0]);
  CHECK(s.is_square[49]);
  CHECK_FALSE(s.is_square[50]);
}

TEST_CASE("square dominance of the Riemann series") {
  // Re sum_{m <= 20} e^{i m^2 t} / m^2: coefficient 1/(2 m^2) at k = m^2 only.
  const int N = 1024;
  const auto v = sample(N, kTwoPi, [](double t) {
    double acc = 0.0;
    for (int m = 1; m <= 20; ++m) acc += std::cos(m * m * t) / (m * m);
    return acc;
  });
  const auto s = spectrum(v);
  for (std::size_t k = 1; k < s.k.size(); ++k) {
    if (s.is_square[k] && k <= 400) {
      CHECK(std::abs(s.coeff_modulus[k] - 0.5 / static_cast<double>(k)) < 1e-14);
    } else {
      CHECK(s.coeff_modulus[k] < 1e-15);
    }
  }
  const auto d = square_dominance(s, 8);
  CHECK(d.n.size() == 7);
  CHECK(d.fraction == 1.0);
}

TEST_CASE("spectrum linearity and Parseval") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  const int N = 200;
  std::vector<double> f(N), g(N), h(N);
  const double a = 1.7, b = -0.4;
  for (int j = 0; j < N; ++j) {
    f[j] = nd(rng);
    g[j] = nd(rng);
    h[j] = a * f[j] + b * g[j];
  }
  const auto sf = spectrum(f);
  const auto sg = spectrum(g);
  const auto sh = spectrum(h);
  for (std::size_t k = 0; k < sh.k.size(); ++k) {
    CHECK(std::abs(sh.coeff[k] - (a * sf.coeff[k] + b * sg.coeff[k])) < 1e-12);
  }

  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= N;
  double ms = 0.0;
  for (double v : h) ms += (v - mean) * (v - mean);
  ms /= N;
  double energy = sh.coeff_modulus[0] * sh.coeff_modulus[0];
  for (std::size_t k = 1; k < sh.k.size(); ++k) {
    const double c2 = sh.coeff_modulus[k] * sh.coeff_modulus[k];
    energy += (2 * k == static_cast<std::size_t>(N)) ? c2 : 2 * c2;
  }
  CHECK(std::abs(energy - ms) < 1e-10);
}

TEST_CASE("power-law fits") {
  std::vector<double> t, z3, z2;
  for (int i = 1; i <= 20; ++i) {
    t.push_back(1.0 + 0.05 * i);
    z3.push_back(3.0 * std::sqrt(0.05 * i));
    z2.push_back(2.0 * 0.05 * i);
  }
  const auto a = separation_exponent_fit(t, z3, 1.0);
  CHECK(std::abs(a.exponent - 0.5) < 1e-6);
  CHECK(a.stderr_exponent < 1e-6);
  CHECK(std::abs(std::exp(a.log_prefactor) - 3.0) < 1e-9);
  CHECK(std::abs(separation_exponent_fit(t, z2, 1.0).exponent - 1.0) < 1e-6);

  std::vector<double> few(t.begin(), t.begin() + 9), fewz(z3.begin(), z3.begin() + 9);
  CHECK_THROWS_AS(separation_exponent_fit(few, fewz, 1.0), std::invalid_argument);
  z3[4] = 0.0;
  CHECK_THROWS_AS(separation_exponent_fit(t, z3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(separation_exponent_fit(t, z2, 1.2), std::invalid_argument);
}
