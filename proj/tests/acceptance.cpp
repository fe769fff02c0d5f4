// Acceptance report: one line per criterion. Exits non-zero on a crash, and on
// a failed criterion only when VFL_ACCEPTANCE_STRICT=1.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vfl/analytic.hpp"
#include "vfl/diagnostics.hpp"
#include "vfl/error.hpp"
#include "vfl/evolution.hpp"
#include "vfl/runner.hpp"
#include "vfl/scenarios.hpp"

using namespace vfl;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::Pass : Status::Fail, detail}; }

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v && std::string(v) == "1";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const Metric* find(const RunManifest& m, const std::string& name) {
  for (const auto& x : m.metrics)
    if (x.name == name) return &x;
  return nullptr;
}

double metric(const RunManifest& m, const std::string& name) {
  const auto* x = find(m, name);
  return x ? x->value : std::nan("");
}

std::string note(const RunManifest& m, const std::string& prefix) {
  for (const auto& n : m.notes)
    if (n.rfind(prefix, 0) == 0) return n;
  return {};
}

RunManifest run(json cfg, const std::string& name) {
  cfg["output_dir"] = "acceptance_out/" + name;
  return run_scenario(parse_run_config(cfg));
}

json eye_config(double b_tilde, int n) {
  return json{{"scenario", "eye"},
              {"eye", {{"b", 1.0}, {"b_tilde", b_tilde}, {"n_nodes", n}}},
              {"t_end", kPi / 2},
              {"observers", {{"sample_dt", kPi / 2048}, {"impulse_window", kPi}}}};
}

// Desk-scale reconnection, shared by two criteria. The single long-wave mode
// with tilt 1 and amplitude 0.071 reconnects at t = 1.402 when the
// trigger is the core radius.
json pair_config(int n, double r_c, double th_x1) {
  return json{{"scenario", "pair_reconnection"},
              {"pair",
               {{"b", 0.22},
                {"n_nodes", n},
                {"t_max", 3.0},
                {"t_after", kPi},
                {"t_rec_reference", 1.397},
                {"exponent_reference", 0.5},
                {"perturbation",
                 {{"mode_count", 1}, {"amplitude", 0.071}, {"seed", 1}, {"tilt", 1.0}, {"random_phase", false}}}}},
              {"rhs", {{"epsilon", 0.03}, {"r_c", r_c}, {"interaction_enabled", true}}},
              {"observers",
               {{"sample_dt", kPi / 2048},
                {"impulse_window", kPi},
                {"slice_stride", 2},
                {"slice_dq", 0.05},
                {"slice_axis", "coordinate"}}},
              {"reconnection", {{"criterion", "distance_threshold"}, {"th_x1", th_x1}}}};
}

std::optional<RunManifest>& pair_run() {
  static std::optional<RunManifest> m;
  if (!m) m = run(pair_config(1500, 3e-3, 3e-3), "pair_desk");
  return m;
}

// ---------------------------------------------------------------- criteria

Outcome circle_translation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = make_reference(CircleRef{1.0}, 256);
  const auto r = evolve(f, RhsConfig{}, StepController{}, 0.1, {}, EvolveOptions{0.01});
  double axial = 0.0, radius = 0.0;
  for (const auto& x : r.filament.nodes) {
    axial = std::max(axial, std::abs(x.x3 - 0.1) / 0.1);
    radius = std::max(radius, std::abs(std::hypot(x.x1, x.x2) - 1.0));
  }
  const double secs = seconds_since(t0);
  return verdict(axial < 1e-6 && radius < 1e-6 && secs < 1.0,
                 "axial rel err " + sci(axial) + ", radius drift " + sci(radius) + ", " + sci(secs) + " s");
}

Outcome convergence_orders() {
  const auto t0 = std::chrono::steady_clock::now();
  auto curve = [](int n, double m, double amp) {
    const ParamGrid grid(n);
    std::vector<Vec3> x(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double s = grid.s(j);
      x[static_cast<std::size_t>(j)] = {std::cos(m * s), std::sin(m * s), amp * std::sin(3 * s)};
    }
    return Filament(grid, std::move(x), PeriodicShift{});
  };
  // Spatial: first derivative of (cos 3s, sin 3s, 0), second derivative with
  // m = 5 so that n = 256 is still truncation dominated.
  auto spatial = [&](int n, double m, bool second) {
    const auto f = curve(n, m, 0.0);
    const auto d = derivative_fields(f);
    double e = 0.0;
    for (int j = 0; j < n; ++j) {
      const double s = f.grid.s(j);
      const Vec3 exact = second ? Vec3{-m * m * std::cos(m * s), -m * m * std::sin(m * s), 0}
                                : Vec3{-m * std::sin(m * s), m * std::cos(m * s), 0};
      e = std::max(e, norm((second ? d.xss : d.xs)[static_cast<std::size_t>(j)] - exact));
    }
    return e;
  };
  const double r1 = std::log2(spatial(128, 3, false) / spatial(256, 3, false));
  const double r2 = std::log2(spatial(128, 5, true) / spatial(256, 5, true));

  // Temporal: fixed-step halving on a non-planar ring; a translating circle has
  // a constant right-hand side and every Runge-Kutta step is exact on it.
  const auto ring = curve(32, 1.0, 0.3);
  auto steps = [&](int k) {
    Stepper st(ring, RhsConfig{});
    for (int i = 0; i < k; ++i) st.advance(0.2 / k);
    return st.state().nodes;
  };
  const auto ref = steps(1280);
  auto terr = [&](int k) {
    const auto x = steps(k);
    double e = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) e = std::max(e, norm(x[j] - ref[j]));
    return e;
  };
  const double rt = std::log2(terr(40) / terr(80));
  const double secs = seconds_since(t0);
  const bool ok = std::abs(r1 - 8) <= 0.5 && std::abs(r2 - 8) <= 0.5 && std::abs(rt - 5) <= 0.5 && secs < 10;
  return verdict(ok, "spatial log2 ratios " + sci(r1) + " (X_s), " + sci(r2) + " (X_ss); temporal " + sci(rt) + ", " +
                         sci(secs) + " s");
}

Outcome impulse_conservation() {
  auto cfg = eye_config(0.0, 1024);
  cfg["acceptance"] = {{"impulse_drift_max", 1e-4}};
  const auto m = run(cfg, "eye_planar_1024");
  const double drift = metric(m, "impulse_drift");
  return verdict(m.all_passed(), "relative drift of |F| " + sci(drift) + " (gate 1e-4), " + sci(m.wall_time_seconds) + " s");
}

Outcome quasi_period() {
  auto cfg = eye_config(0.0, 2048);
  cfg["acceptance"] = {{"corner_mass_half_period_min", 0.5}, {"rotated_peak_margin_min", 0.0}};
  const auto m = run(cfg, "eye_planar_2048");
  return verdict(m.all_passed(), "corner mass at pi/2 " + sci(metric(m, "corner_mass_half_period")) +
                                     " (gate 0.5); at pi/4 quarter stations " +
                                     sci(metric(m, "rotated_mass_quarter_period")) + " vs corners " +
                                     sci(metric(m, "corner_mass_quarter_period")) + "; " + note(m, "curvature") +
                                     ", " + sci(m.wall_time_seconds) + " s");
}

Outcome square_dominance_eye() {
  auto cfg = eye_config(2.0, 1024);
  cfg["acceptance"] = {{"dominance_fraction_min", 0.8}};
  const auto m = run(cfg, "eye_1024");
  auto anchor = run(json{{"scenario", "riemann_reference"}, {"acceptance", {{"dominance_fraction_min", 1.0}}}},
                    "riemann");
  const bool ok = m.all_passed() && anchor.all_passed();
  return verdict(ok, "eye fraction " + sci(metric(m, "dominance_fraction")) + " [" + note(m, "square dominance") +
                         "]; Riemann anchor " + sci(metric(anchor, "dominance_fraction")) + ", " +
                         sci(m.wall_time_seconds) + " s");
}

struct AlgebraRun {
  RunManifest manifest;
  double seconds;
};

const AlgebraRun& algebra() {
  static std::optional<AlgebraRun> a;
  if (!a) {
    const auto t0 = std::chrono::steady_clock::now();
    auto m = run(json{{"scenario", "rhombus_check"}, {"rhombus", {{"tuples", 100000}}}, {"seed", 2024}}, "rhombus");
    a = AlgebraRun{m, seconds_since(t0)};
  }
  return *a;
}

Outcome trace_identity() {
  const auto& a = algebra();
  const double tr = metric(a.manifest, "trace_residual");
  const double ht = metric(a.manifest, "half_turn_residual");
  return verdict(tr < 1e-10 && ht < 1e-10 && a.seconds < 5,
                 "1e5 tuples: closed form vs product " + sci(tr) + ", constrained |trace + 1| " + sci(ht) + ", " +
                     sci(a.seconds) + " s (shared with the next criterion)");
}

Outcome impulse_identity() {
  const auto& a = algebra();
  const double fs = metric(a.manifest, "impulse_identity_residual");
  const double af = metric(a.manifest, "impulse_angle_form_residual");
  return verdict(fs < 1e-10 && af < 1e-10 && a.seconds < 5,
                 "1e5 rhombi: |f|^2 direct vs product " + sci(fs) + ", angle form vs product " + sci(af) + ", " +
                     sci(a.seconds) + " s");
}

// Steps taken before max |X| exceeds 10x its initial value (or goes
// non-finite); -1 if that never happens within 5000 steps.
int blowup_step(const Filament& f, const RhsConfig& cfg, double tau) {
  double x0 = 0.0;
  for (const auto& x : f.nodes) x0 = std::max(x0, norm(x));
  Stepper st(f, cfg);
  for (int i = 1; i <= 5000; ++i) {
    try {
      st.advance(tau);
    } catch (const NumericalAbort&) {
      return i;
    }
    double xm = 0.0;
    for (const auto& x : st.state().nodes) xm = std::max(xm, norm(x));
    if (!std::isfinite(xm) || xm > 10 * x0) return i;
  }
  return -1;
}

Outcome stability_bound_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto eye = make_eye(EyeParams{1.0, 2.0, 512});
  const RhsConfig cfg{0.03, 1e-2, true};
  const double bound = stability_bound(eye.h(), cfg);
  const int at_08 = blowup_step(eye, cfg, 0.8 * bound);
  const int at_12 = blowup_step(eye, cfg, 1.2 * bound);

  // Context: the same test on a smooth ring with the same spacing, where the
  // corner cannot be the cause.
  const ParamGrid grid(512);
  std::vector<Vec3> x(512);
  for (int j = 0; j < 512; ++j) x[static_cast<std::size_t>(j)] = {std::cos(grid.s(j)), std::sin(grid.s(j)), 0.3 * std::sin(3 * grid.s(j))};
  const Filament ring(grid, std::move(x), PeriodicShift{});
  const int ring_08 = blowup_step(ring, cfg, 0.8 * bound);
  const int ring_03 = blowup_step(ring, cfg, 0.3 * bound);

  const double secs = seconds_since(t0);
  const bool ok = at_08 < 0 && at_12 > 0 && secs < 60;
  auto describe = [](int s) { return s < 0 ? std::string("bounded for 5000 steps") : "exceeds 10x at step " + std::to_string(s); };
  return verdict(ok, "bound " + sci(bound) + "; eye: 0.8 bound " + describe(at_08) + ", 1.2 bound " + describe(at_12) +
                         "; smooth ring: 0.8 bound " + describe(ring_08) + ", 0.3 bound " + describe(ring_03) + ", " +
                         sci(secs) + " s");
}

Outcome reconnection_desk() {
  const auto& m = *pair_run();
  if (m.events.empty()) return verdict(false, "no reconnection before t_max");
  const double dom = metric(m, "dominance_fraction");
  const bool ok = std::isfinite(dom) && dom >= 0.6;
  return verdict(ok, "t_rec " + sci(m.events[0].t_rec) + " (node " + std::to_string(m.events[0].node_index) +
                         "), post-surgery fraction " + sci(dom) + " (gate 0.6) [" + note(m, "square dominance") +
                         "], " + sci(m.wall_time_seconds) + " s");
}

Outcome reconnection_full_scale() {
  if (!env_flag("VFL_ACCEPTANCE_EXTENDED")) return {Status::Skip, "set VFL_ACCEPTANCE_EXTENDED=1 (hours of runtime)"};
  auto cfg = pair_config(6000, 7.5e-4, 1e-6);
  cfg["pair"]["t_after"] = 1e-3;  // only t_rec is checked
  cfg["acceptance"] = {{"t_rec_rel_err_max", 0.05}};
  const auto m = run(cfg, "pair_full");
  if (m.events.empty()) return verdict(false, "no reconnection before t_max");
  return verdict(m.all_passed(), "t_rec " + sci(m.events[0].t_rec) + " vs 1.397, rel err " +
                                     sci(metric(m, "t_rec_rel_err")) + ", " + sci(m.wall_time_seconds) + " s");
}

Outcome separation_rate() {
  std::vector<double> t, a, b;
  for (int i = 1; i <= 20; ++i) {
    t.push_back(1.0 + 0.1 * i);
    a.push_back(3.0 * std::sqrt(0.1 * i));
    b.push_back(2.0 * 0.1 * i);
  }
  const double ea = separation_exponent_fit(t, a, 1.0).exponent;
  const double eb = separation_exponent_fit(t, b, 1.0).exponent;
  const bool synthetic = std::abs(ea - 0.5) < 1e-6 && std::abs(eb - 1.0) < 1e-6;

  const auto& m = *pair_run();
  const double alpha = metric(m, "separation_exponent");
  const double se = metric(m, "separation_exponent_stderr");
  const bool ok = synthetic && std::isfinite(alpha) && std::abs(alpha - 0.5) <= 0.1;
  return verdict(ok, "x3-support shrink exponent " + sci(alpha) + " +/- " + sci(se) + " [" + note(m, "support") +
                         "]; synthetic fits " + sci(ea) + ", " + sci(eb));
}

Outcome grid_ring() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = run(json{{"scenario", "grid_impulse"}, {"acceptance", {{"grid_rel_err_max", 0.05}}}}, "grid_ring");
  auto zero = make_vortex_ring_grid(64, 2.0, 1.0, 1.0, 0.2);
  std::fill(zero.omega.begin(), zero.omega.end(), 0.0);
  double zmax = 0.0;
  for (double v : grid_impulse(zero, 0.5).moduli) zmax = std::max(zmax, v);
  const double secs = seconds_since(t0);
  return verdict(m.all_passed() && zmax == 0.0 && secs < 30,
                 "64^3 ring |F| rel err vs Gamma pi R^2 " + sci(metric(m, "grid_rel_err")) + ", zero field max " +
                     sci(zmax) + ", " + sci(secs) + " s");
}

Outcome theta_revival() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> Kd(1, 8), Qd(1, 500);
  std::uniform_real_distribution<double> sd(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int K = Kd(rng);
    const ThetaSeriesParams p{K, std::uniform_int_distribution<int>(0, K - 1)(rng), Qd(rng)};
    const double s = sd(rng);
    worst = std::max(worst, std::abs(theta_series_scaled(p, s, kPi / 2) - theta_series_scaled(p, s, 0.0)));
  }
  const double secs = seconds_since(t0);
  return verdict(worst < 1e-12 && secs < 1, "200 random cases, max difference " + sci(worst) + ", " + sci(secs) + " s");
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "circle translation", circle_translation},
      {2, "convergence orders", convergence_orders},
      {3, "impulse conservation", impulse_conservation},
      {4, "quasi-period curvature concentration", quasi_period},
      {5, "square-frequency dominance", square_dominance_eye},
      {6, "trace identity", trace_identity},
      {7, "rhombus impulse identity", impulse_identity},
      {8, "stability bound", stability_bound_check},
      {9, "reconnection, desk scale", reconnection_desk},
      {10, "reconnection, full scale", reconnection_full_scale},
      {11, "separation rate", separation_rate},
      {12, "grid impulse", grid_ring},
      {13, "theta revival", theta_revival},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    if (o.status == Status::Fail) ++failed;
    std::printf("[%s] criterion %2d %s: %s\n", tag, c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criterion(s) failed\n", failed);
  return failed > 0 && env_flag("VFL_ACCEPTANCE_STRICT") ? 1 : 0;
}
