#include "vfl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "vfl/error.hpp"

namespace vfl {

namespace {

constexpr int kHalf = 4;
constexpr double kD1[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
constexpr double kD2Center = -205.0 / 72.0;
constexpr double kD2[4] = {8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};

// Dormand-Prince 5(4) tableau.
constexpr double kA[7][6] = {
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0},
};
// Fifth-order weights minus fourth-order weights.
constexpr double kE[7] = {71.0 / 57600.0,      0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
                          22.0 / 525.0, -1.0 / 40.0};

}  // namespace

void validate(const RhsConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("RhsConfig: epsilon must be >= 0");
  if (cfg.interaction_enabled && !(cfg.r_c > 0.0)) {
    throw std::invalid_argument("RhsConfig: r_c must be > 0 when the interaction is enabled");
  }
  if (cfg.arclength_speed && !(*cfg.arclength_speed > 0.0)) {
    throw std::invalid_argument("RhsConfig: arclength_speed must be > 0");
  }
}

void validate(const StepController& ctrl) {
  if (!(ctrl.abs_tol > 0.0) || !(ctrl.rel_tol >= 0.0)) throw std::invalid_argument("StepController: bad tolerances");
  if (!(ctrl.safety > 0.0 && ctrl.safety < 1.0)) throw std::invalid_argument("StepController: safety must be in (0,1)");
  if (!(ctrl.stability_fraction > 0.0 && ctrl.stability_fraction <= 1.0)) {
    throw std::invalid_argument("StepController: stability_fraction must be in (0,1]");
  }
  if (!(ctrl.tau_min > 0.0) || !(ctrl.tau_min < ctrl.tau_max_user)) {
    throw std::invalid_argument("StepController: need 0 < tau_min < tau_max_user");
  }
}

RhsEvaluator::RhsEvaluator(int n_nodes, BoundaryMap boundary, RhsConfig cfg)
    : n_(n_nodes),
      h_(ParamGrid(n_nodes).h()),
      boundary_(boundary),
      cfg_(cfg),
      ext_(static_cast<std::size_t>(n_nodes + 2 * kHalf)) {
  validate(cfg_);
}

void RhsEvaluator::operator()(std::span<const Vec3> x, std::span<Vec3> velocity) {
  const std::size_t n = static_cast<std::size_t>(n_);
  std::copy(x.begin(), x.end(), ext_.begin() + kHalf);
  if (const auto* p = std::get_if<PeriodicShift>(&boundary_)) {
    for (std::size_t i = 0; i < kHalf; ++i) {
      ext_[i] = x[n - kHalf + i] - p->shift;
      ext_[n + kHalf + i] = x[i] + p->shift;
    }
  } else {
    for (std::size_t i = 0; i < kHalf; ++i) {
      ext_[i] = mirror_d(x[n - kHalf + i]);
      ext_[n + kHalf + i] = mirror_d(x[i]);
    }
  }

  const double inv_h = 1.0 / h_;
  const double inv_h2 = inv_h * inv_h;
  const double eps = cfg_.effective_epsilon();
  const double rc2 = cfg_.r_c * cfg_.r_c;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j + kHalf;
    Vec3 xs{};
    Vec3 xss = kD2Center * ext_[c];
    for (std::size_t k = 0; k < kHalf; ++k) {
      const Vec3& a = ext_[c + k + 1];
      const Vec3& b = ext_[c - k - 1];
      xs += kD1[k] * (a - b);
      xss += kD2[k] * (a + b);
    }
    xs *= inv_h;
    xss *= inv_h2;
    const double speed = cfg_.arclength_speed.value_or(norm(xs));
    if (!(speed > 0.0)) {
      throw NumericalAbort("vfe_rhs: zero tangent vector at node " + std::to_string(j));
    }
    Vec3 v = cross(xs, xss) / (speed * speed * speed);
    if (eps > 0.0) {
      const double x1 = x[j].x1;
      const double coef = eps * x1 / (x1 * x1 + rc2) / speed;
      // X_s ^ e1 = (0, x3_s, -x2_s)
      v.x2 -= coef * xs.x3;
      v.x3 += coef * xs.x2;
    }
    velocity[j] = v;
  }
}

std::vector<Vec3> vfe_rhs(const Filament& f, const RhsConfig& cfg) {
  RhsEvaluator rhs(f.size(), f.boundary, cfg);
  std::vector<Vec3> v(f.nodes.size());
  rhs(f.nodes, v);
  return v;
}

SpeedProfile speed_profile(const Filament& f, const RhsConfig& cfg) {
  validate(cfg);
  const auto d = derivative_fields(f);
  const double eps = cfg.effective_epsilon();
  SpeedProfile out;
  out.c_of_s.resize(f.nodes.size());
  for (std::size_t j = 0; j < f.nodes.size(); ++j) {
    const double x1 = f.nodes[j].x1;
    const double w = (eps > 0.0) ? std::pow(x1 * x1 + cfg.r_c * cfg.r_c, eps / 2.0) : 1.0;
    out.c_of_s[j] = norm(d.xs[j]) * w;
  }
  const auto [lo, hi] = std::minmax_element(out.c_of_s.begin(), out.c_of_s.end());
  out.min = *lo;
  out.max = *hi;
  return out;
}

double stability_bound(double h, const RhsConfig& cfg) {
  if (!(h > 0.0)) throw std::invalid_argument("stability_bound: h must be > 0");
  const double eps = cfg.effective_epsilon();
  const double extra = (eps > 0.0) ? eps * h * h / (cfg.r_c * cfg.r_c) : 0.0;
  return h * h / std::sqrt(4.0 + extra);
}

double step_ceiling(const Filament& f, const RhsConfig& cfg, const StepController& ctrl) {
  double cap = ctrl.tau_max_user;
  if (ctrl.stability_cap_enabled) cap = std::min(cap, ctrl.stability_fraction * stability_bound(f.h(), cfg));
  return cap;
}

Stepper::Stepper(Filament f, const RhsConfig& cfg) : f_(std::move(f)), rhs_(f_.size(), f_.boundary, cfg) {
  for (auto& k : k_) k.resize(f_.nodes.size());
  trial_.resize(f_.nodes.size());
}

void Stepper::stages(double tau) {
  const std::size_t n = f_.nodes.size();
  if (!fsal_valid_) {
    rhs_(f_.nodes, k_[0]);
    fsal_valid_ = true;
  }
  for (int s = 1; s < 7; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      Vec3 acc{};
      for (int q = 0; q < s; ++q) acc += kA[s][q] * k_[q][j];
      trial_[j] = f_.nodes[j] + tau * acc;
    }
    rhs_(trial_, k_[s]);
  }
  // trial_ now holds the fifth-order solution (row 7 equals the weights).
}

double Stepper::attempt(double tau, const StepController& ctrl) {
  const std::size_t n = f_.nodes.size();
  try {
    stages(tau);
  } catch (const NumericalAbort&) {
    return std::numeric_limits<double>::infinity();
  }
  double err = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    Vec3 e{};
    for (int q = 0; q < 7; ++q) e += kE[q] * k_[q][j];
    e *= tau;
    for (int c = 0; c < 3; ++c) {
      const double y = trial_[j][c];
      if (!std::isfinite(y)) return std::numeric_limits<double>::infinity();
      const double scale = ctrl.abs_tol + ctrl.rel_tol * std::max(std::abs(f_.nodes[j][c]), std::abs(y));
      err = std::max(err, std::abs(e[c]) / scale);
    }
  }
  if (!(err <= 1.0)) return std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
  std::swap(f_.nodes, trial_);
  std::swap(k_[0], k_[6]);
  f_.time += tau;
  return err;
}

void Stepper::advance(double tau) {
  stages(tau);
  std::swap(f_.nodes, trial_);
  std::swap(k_[0], k_[6]);
  f_.time += tau;
}

namespace {

double grow_factor(double err, const StepController& ctrl) {
  if (err <= 0.0) return 5.0;
  return std::clamp(ctrl.safety * std::pow(err, -0.2), 0.2, 5.0);
}

// Tries tau until a step is accepted; returns (tau_used, error, proposal, rejects).
struct Attempt {
  double tau_used;
  double error;
  double proposal;
  int rejected;
};

Attempt step_until_accepted(Stepper& st, double tau, double ceiling, const StepController& ctrl) {
  int rejected = 0;
  for (;;) {
    if (tau < ctrl.tau_min) {
      throw NumericalAbort("adaptive_step: step size " + std::to_string(tau) + " fell below tau_min " +
                           std::to_string(ctrl.tau_min) + " at t = " + std::to_string(st.state().time) +
                           " (stiffness or blow-up)");
    }
    const double err = st.attempt(tau, ctrl);
    if (err <= 1.0) return {tau, err, std::min(ceiling, tau * grow_factor(err, ctrl)), rejected};
    ++rejected;
    tau *= std::isfinite(err) ? std::max(0.2, ctrl.safety * std::pow(err, -0.2)) : 0.2;
  }
}

}  // namespace

StepResult adaptive_step(const Filament& f, const RhsConfig& cfg, const StepController& ctrl, double tau_try) {
  if (!(tau_try > 0.0)) throw std::invalid_argument("adaptive_step: tau_try must be > 0");
  validate(ctrl);
  const double ceiling = step_ceiling(f, cfg, ctrl);
  Stepper st(f, cfg);
  const auto a = step_until_accepted(st, std::min(tau_try, ceiling), ceiling, ctrl);
  return StepResult{st.state(), a.tau_used, a.proposal, a.error, a.rejected};
}

Filament fixed_step(const Filament& f, const RhsConfig& cfg, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("fixed_step: tau must be > 0");
  Stepper st(f, cfg);
  st.advance(tau);
  return st.state();
}

EvolveResult evolve(Filament f, const RhsConfig& cfg, const StepController& ctrl, double t_end,
                    std::span<const Observer> observers, const EvolveOptions& opts) {
  validate(ctrl);
  validate(cfg);
  if (!(t_end > f.time)) throw std::invalid_argument("evolve: t_end must exceed the filament time");
  if (!(opts.sample_dt > 0.0)) throw std::invalid_argument("evolve: sample_dt must be > 0");
  for (const auto& o : observers) {
    if (o.stride < 1) throw std::invalid_argument("evolve: observer '" + o.name + "' has stride < 1");
  }

  const double t0 = f.time;
  const double ceiling = step_ceiling(f, cfg, ctrl);
  const double snap = 1e-12 * std::max(1.0, std::abs(t_end));
  Stepper st(std::move(f), cfg);
  EvolveResult out{st.state(), 0, 0, false, 0.0};

  long sample = 0;
  auto fire = [&](long k) {
    for (const auto& o : observers) {
      if (k % o.stride == 0 && o.on_sample) o.on_sample(st.state());
    }
  };
  fire(0);

  double tau = opts.tau_initial > 0.0 ? std::min(opts.tau_initial, ceiling) : ceiling;
  while (st.state().time < t_end - snap) {
    const double next_sample = std::min(t0 + static_cast<double>(sample + 1) * opts.sample_dt, t_end);
    const double remaining = next_sample - st.state().time;
    const bool clipped = tau >= remaining;
    const auto a = step_until_accepted(st, clipped ? remaining : tau, ceiling, ctrl);
    ++out.steps;
    out.rejected += a.rejected;
    out.last_tau = a.tau_used;
    tau = (clipped && a.rejected == 0) ? std::max(tau, a.proposal) : a.proposal;

    const bool on_sample = clipped ? a.tau_used == remaining : std::abs(st.state().time - next_sample) <= snap;
    if (on_sample) {
      st.snap_time(next_sample);
      ++sample;
    }
    if (opts.stop_after_step && opts.stop_after_step(st.state())) {
      out.stopped_early = true;
      break;
    }
    if (on_sample) fire(sample);
  }
  out.filament = st.state();
  return out;
}

}  // namespace vfl
