#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfl/geometry.hpp"

namespace vfl {

/// Evolution-law switches. With the interaction disabled the right-hand side
/// is the binormal flow X_t = X_s ^ X_ss / |X_s|^3.
struct RhsConfig {
  double epsilon = 0.0;
  double r_c = 1.0;
  bool interaction_enabled = false;
  /// When set, |X_s| is taken to be this constant instead of the pointwise
  /// finite-difference modulus. Valid while the parametrization stays
  /// proportional to arc length, i.e. without interaction.
  std::optional<double> arclength_speed;

  double effective_epsilon() const { return interaction_enabled ? epsilon : 0.0; }
};

void validate(const RhsConfig& cfg);

struct StepController {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double safety = 0.9;
  double tau_min = 1e-14;
  double tau_max_user = 1e-2;
  bool stability_cap_enabled = true;
  /// Ceiling is stability_fraction * stability_bound. The Dormand-Prince
  /// polynomial keeps |R(iy)| <= 1 only for y <= 0.997, and the grid-scale
  /// eigenvalue of the 8th-order second difference is 6.50 / h^2, so 0.3
  /// keeps roundoff in the shortest waves from growing.
  double stability_fraction = 0.3;
};

void validate(const StepController& ctrl);

/// c(s) = |X_s| (x1^2 + r_c^2)^(eps/2); time independent under the
/// interaction model.
struct SpeedProfile {
  std::vector<double> c_of_s;
  double min = 0.0;
  double max = 0.0;
};

/// Reusable right-hand-side evaluator. Holds scratch buffers so repeated
/// evaluations during time stepping do not allocate.
class RhsEvaluator {
 public:
  RhsEvaluator(int n_nodes, BoundaryMap boundary, RhsConfig cfg);

  /// velocity[j] for node positions x (size n).
  void operator()(std::span<const Vec3> x, std::span<Vec3> velocity);

  const RhsConfig& config() const { return cfg_; }
  const BoundaryMap& boundary() const { return boundary_; }

 private:
  int n_;
  double h_;
  BoundaryMap boundary_;
  RhsConfig cfg_;
  std::vector<Vec3> ext_;
};

std::vector<Vec3> vfe_rhs(const Filament& f, const RhsConfig& cfg);

SpeedProfile speed_profile(const Filament& f, const RhsConfig& cfg);

/// Necessary time-step bound h^2 / sqrt(4 + eps h^2 / r_c^2).
double stability_bound(double h, const RhsConfig& cfg);

struct StepResult {
  Filament filament;
  double tau_used = 0.0;
  double tau_next = 0.0;
  /// Scaled max-norm error of the accepted step (accepted iff <= 1).
  double error_estimate = 0.0;
  int rejected = 0;
};

/// One accepted Dormand-Prince 5(4) step, retrying with smaller tau as needed.
/// Throws NumericalAbort when tau would drop below ctrl.tau_min.
StepResult adaptive_step(const Filament& f, const RhsConfig& cfg, const StepController& ctrl, double tau_try);

/// One uncontrolled Dormand-Prince step of size tau (5th-order solution).
Filament fixed_step(const Filament& f, const RhsConfig& cfg, double tau);

/// Largest tau admitted by the controller for this filament.
double step_ceiling(const Filament& f, const RhsConfig& cfg, const StepController& ctrl);

/// Dormand-Prince 5(4) stepper owning one filament state. Keeps the last
/// stage derivative (first-same-as-last) between accepted steps.
class Stepper {
 public:
  Stepper(Filament f, const RhsConfig& cfg);

  const Filament& state() const { return f_; }

  /// Attempts one step of size tau; commits it when the scaled error is <= 1.
  /// Returns the scaled error (infinity when the trial state is not finite).
  double attempt(double tau, const StepController& ctrl);

  /// Uncontrolled step of size tau.
  void advance(double tau);

  /// Replaces the accumulated time (used to land exactly on sample times).
  void snap_time(double t) { f_.time = t; }

 private:
  void stages(double tau);

  Filament f_;
  RhsEvaluator rhs_;
  std::vector<Vec3> k_[7];
  std::vector<Vec3> trial_;
  bool fsal_valid_ = false;
};

/// Read-only callback fired every `stride` samples of the evolve sample grid.
struct Observer {
  std::string name;
  int stride = 1;
  std::function<void(const Filament&)> on_sample;
};

struct EvolveOptions {
  /// Steps are clipped so that t_start + k * sample_dt is hit exactly.
  double sample_dt = 1e-3;
  /// Checked after every accepted step; returning true ends the run there.
  std::function<bool(const Filament&)> stop_after_step;
  /// Initial step attempt; 0 picks the controller ceiling.
  double tau_initial = 0.0;
};

struct EvolveResult {
  Filament filament;
  long steps = 0;
  long rejected = 0;
  bool stopped_early = false;
  double last_tau = 0.0;
};

/// Integrates from f.time to t_end. Observers see the state at every
/// sample-grid point (including the initial one) and cannot alter it.
EvolveResult evolve(Filament f, const RhsConfig& cfg, const StepController& ctrl, double t_end,
                    std::span<const Observer> observers, const EvolveOptions& opts);

}  // namespace vfl
