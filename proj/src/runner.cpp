#include "vfl/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "vfl/analytic.hpp"
#include "vfl/error.hpp"

#ifndef VFL_VERSION
#define VFL_VERSION "dev"
#endif

namespace vfl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kPi = std::numbers::pi;

const std::pair<Scenario, const char*> kScenarioNames[] = {
    {Scenario::Eye, "eye"},
    {Scenario::PolygonalEye, "polygonal_eye"},
    {Scenario::PairReconnection, "pair_reconnection"},
    {Scenario::RhombusCheck, "rhombus_check"},
    {Scenario::GridImpulse, "grid_impulse"},
    {Scenario::RiemannReference, "riemann_reference"},
};

// Reads the keys of one JSON object and complains about the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  // null disables, absent keeps the default.
  void get_optional(const char* key, std::optional<int>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    int v = 0;
    get(key, v);
    out = v;
  }

  void get_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_.empty() ? std::string(key) : path_ + "." + key);
  }

  const json& raw() const { return j_; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key " + where(item.key().c_str()));
    }
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "<root>" : path_;
    if (key) p = path_.empty() ? std::string(key) : path_ + "." + key;
    return "'" + p + "'";
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate_config(const RunConfig& c) {
  try {
    validate(c.rhs);
    validate(c.controller);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& o = c.observers;
  require(o.sample_dt > 0.0, "observers.sample_dt must be > 0");
  for (const auto* s : {&o.corner_stride, &o.impulse_stride, &o.slice_stride}) {
    require(!s->has_value() || **s >= 1, "observer strides must be >= 1 (null disables an observer)");
  }
  require(o.impulse_window > 0.0 && o.impulse_window <= kTwoPi, "observers.impulse_window must be in (0, 2pi]");
  require(o.slice_dq > 0.0, "observers.slice_dq must be > 0");
  require(o.spectrum_window > 0.0, "observers.spectrum_window must be > 0");
  require(o.dominance_n_max >= 2, "observers.dominance_n_max must be >= 2");
  require(c.curvature.resolution > 0.0 && c.curvature.half_width > 0.0, "curvature settings must be > 0");
  require(c.tau_initial >= 0.0, "tau_initial must be >= 0");
  require(c.th_x1 >= 0.0 && c.th_F >= 0.0, "reconnection thresholds must be >= 0");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  for (const auto& [key, value] : c.acceptance) {
    const bool suffix = key.size() > 4 && (key.ends_with("_min") || key.ends_with("_max"));
    require(suffix, "acceptance key '" + key + "' must end in _min or _max");
    require(std::isfinite(value), "acceptance threshold '" + key + "' must be finite");
  }

  switch (c.scenario) {
    case Scenario::Eye:
      require(c.eye.b > 0.0, "eye.b must be > 0");
      require(c.eye.n_nodes >= ParamGrid::kMinNodes && c.eye.n_nodes % 2 == 0, "eye.n_nodes must be even and >= 16");
      require(c.t_end > 0.0, "t_end must be > 0");
      break;
    case Scenario::PolygonalEye:
      require(c.nodes_per_side >= 2, "polygonal_eye.nodes_per_side must be >= 2");
      require(c.t_end > 0.0, "t_end must be > 0");
      break;
    case Scenario::PairReconnection:
      require(c.pair.params.b > 0.0, "pair.b must be > 0");
      require(c.pair.params.n_nodes >= ParamGrid::kMinNodes, "pair.n_nodes must be >= 16");
      require(c.pair.params.axis_period > 0.0, "pair.axis_period must be > 0");
      require(c.pair.t_max > 0.0 && c.pair.t_after > 0.0, "pair.t_max and pair.t_after must be > 0");
      require(c.pair.support_threshold > 0.0 && c.pair.support_threshold < 1.0,
              "pair.support_threshold must lie in (0, 1)");
      require(c.pair.support_fit_fraction > 0.0 && c.pair.support_fit_fraction <= 1.0,
              "pair.support_fit_fraction must lie in (0, 1]");
      require(c.rhs.interaction_enabled && c.rhs.epsilon > 0.0,
              "pair_reconnection needs the interaction enabled with epsilon > 0");
      break;
    case Scenario::RhombusCheck:
      require(c.rhombus_tuples >= 1, "rhombus.tuples must be >= 1");
      break;
    case Scenario::GridImpulse:
      require(c.grid.slab_dz >= 0.0, "grid.slab_dz must be >= 0");
      if (c.grid.header.empty()) {
        require(c.grid.n >= 2 && c.grid.half_width > 0.0 && c.grid.radius > 0.0 && c.grid.core > 0.0,
                "grid ring parameters must be positive");
      }
      break;
    case Scenario::RiemannReference:
      require(c.riemann_truncation >= 1, "riemann.truncation must be >= 1");
      require(c.riemann_samples >= kMinSpectrumSamples, "riemann.samples must be >= 64");
      break;
  }
}

// ---------------------------------------------------------------- evolution

struct Collected {
  CornerTrack corner;
  ImpulseSeries impulse;
  ImpulseSeries conserved;  // full impulse (loop impulse after surgery)
  std::vector<SliceRecord> slices;
};

Vec3 total_impulse(const Filament& f) { return is_mirror(f.boundary) ? loop_impulse(f) : fluid_impulse(f); }

SliceProfile slice(const Filament& f, const ObserverConfig& o) {
  return o.slice_axis == SliceAxis::Coordinate ? sliced_impulse_by_coordinate(f, o.slice_dq)
                                               : sliced_impulse_by_parameter(f, o.slice_dq);
}

struct Snapshot {
  double target;
  std::optional<Filament> state;
};

std::vector<Observer> make_observers(const RunConfig& cfg, Collected& c, std::vector<Snapshot>& snaps) {
  const auto& o = cfg.observers;
  std::vector<Observer> obs;
  if (o.corner_stride) {
    obs.push_back({"corner", *o.corner_stride, [&c](const Filament& f) { c.corner.push(f.time, f.nodes[0]); }});
  }
  if (o.impulse_stride) {
    const double l = o.impulse_window;
    obs.push_back({"impulse", *o.impulse_stride, [&c, l](const Filament& f) {
                     c.impulse.push(f.time, l >= kTwoPi ? fluid_impulse(f) : fluid_impulse(f, l));
                   }});
  }
  obs.push_back({"conserved", o.impulse_stride.value_or(1),
                 [&c](const Filament& f) { c.conserved.push(f.time, total_impulse(f)); }});
  if (o.slice_stride) {
    obs.push_back({"slices", *o.slice_stride, [&c, &o](const Filament& f) { c.slices.push_back({f.time, slice(f, o)}); }});
  }
  if (!snaps.empty()) {
    const double tol = 0.5 * o.sample_dt;
    obs.push_back({"snapshots", 1, [&snaps, tol](const Filament& f) {
                     for (auto& s : snaps) {
                       if (!s.state && std::abs(f.time - s.target) <= tol) s.state = f;
                     }
                   }});
  }
  return obs;
}

EvolveResult run_leg(const Filament& f, const RhsConfig& rhs, const RunConfig& cfg, double t_end,
                     std::span<const Observer> obs, std::function<bool(const Filament&)> stop = {}) {
  EvolveOptions opts;
  opts.sample_dt = cfg.observers.sample_dt;
  opts.tau_initial = cfg.tau_initial;
  opts.stop_after_step = std::move(stop);
  try {
    return evolve(f, rhs, cfg.controller, t_end, obs, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void append(Collected& into, const Collected& from) {
  for (std::size_t i = 0; i < from.corner.size(); ++i) into.corner.push(from.corner.times[i], from.corner.positions[i]);
  for (std::size_t i = 0; i < from.impulse.size(); ++i) into.impulse.push(from.impulse.times[i], from.impulse.values[i]);
  into.slices.insert(into.slices.end(), from.slices.begin(), from.slices.end());
}

// ------------------------------------------------------------------ metrics

class MetricSink {
 public:
  explicit MetricSink(const std::map<std::string, double>& acceptance) : acceptance_(acceptance) {}

  void add(const std::string& name, double value) {
    Metric m{name, value, std::nullopt, std::nullopt};
    if (auto it = acceptance_.find(name + "_min"); it != acceptance_.end()) m.min = it->second;
    if (auto it = acceptance_.find(name + "_max"); it != acceptance_.end()) m.max = it->second;
    metrics_.push_back(m);
  }

  // A configured gate whose metric never got computed counts as failed.
  std::vector<Metric> finish() {
    std::set<std::string> have;
    for (const auto& m : metrics_) have.insert(m.name);
    for (const auto& [key, value] : acceptance_) {
      const std::string name = key.substr(0, key.size() - 4);
      if (have.insert(name).second) {
        Metric m{name, std::nan(""), std::nullopt, std::nullopt};
        for (const auto& [k2, v2] : acceptance_) {
          if (k2 == name + "_min") m.min = v2;
          if (k2 == name + "_max") m.max = v2;
        }
        metrics_.push_back(m);
      }
    }
    return metrics_;
  }

 private:
  const std::map<std::string, double>& acceptance_;
  std::vector<Metric> metrics_;
};

double relative_drift(const ImpulseSeries& s) {
  if (s.size() == 0 || !(s.moduli[0] > 0.0)) return std::nan("");
  double d = 0.0;
  for (double m : s.moduli) d = std::max(d, std::abs(m - s.moduli[0]));
  return d / s.moduli[0];
}

std::string flags(const DominanceReport& r) {
  std::string out;
  for (std::size_t i = 0; i < r.n.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(r.n[i]) + (r.dominant[i] ? ":y" : ":n");
  }
  return out;
}

// Spectrum of |X(0, t)| over [t0, t0 + W).
void corner_spectrum(const CornerTrack& track, double t0, const RunConfig& cfg, SeriesBundle& out, MetricSink& sink,
                     RunManifest& m) {
  const double W = cfg.observers.spectrum_window;
  const double eps = 1e-9 * std::max(1.0, std::abs(t0 + W));
  std::vector<double> window;
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track.times[i] >= t0 - eps && track.times[i] < t0 + W - eps) window.push_back(track.moduli[i]);
  }
  if (window.size() < static_cast<std::size_t>(kMinSpectrumSamples)) {
    m.notes.push_back("spectrum skipped: window holds " + std::to_string(window.size()) + " corner samples, need " +
                      std::to_string(kMinSpectrumSamples));
    return;
  }
  out.spectrum = spectrum(window);
  try {
    const auto dom = square_dominance(*out.spectrum, cfg.observers.dominance_n_max);
    sink.add("dominance_fraction", dom.fraction);
    m.notes.push_back("square dominance over " + std::to_string(window.size()) + " samples: " + flags(dom));
  } catch (const std::invalid_argument& e) {
    m.notes.push_back(std::string("dominance skipped: ") + e.what());
  }
}

int chord_stride(int n, double h, double resolution) {
  int m = std::max(1, static_cast<int>(std::lround(resolution / h)));
  while (n % m != 0) --m;
  return m;
}

double time_eps(const RunConfig& cfg) { return 0.5 * cfg.observers.sample_dt; }

// Eye-type runs: closed curve with corners at s = 0 and s = pi.
void eye_pipeline(const Filament& f0, const RunConfig& cfg, RunResult& r, MetricSink& sink) {
  Collected c;
  std::vector<Snapshot> snaps;
  const double t0 = f0.time;
  if (t0 + 0.5 * kPi <= cfg.t_end + time_eps(cfg)) {
    snaps.push_back({t0 + 0.25 * kPi, std::nullopt});
    snaps.push_back({t0 + 0.5 * kPi, std::nullopt});
  }
  const auto obs = make_observers(cfg, c, snaps);
  const auto res = run_leg(f0, cfg.rhs, cfg, cfg.t_end, obs);
  r.manifest.notes.push_back("accepted steps " + std::to_string(res.steps) + ", rejected " +
                             std::to_string(res.rejected));

  sink.add("impulse_drift", relative_drift(c.conserved));
  if (cfg.observers.corner_stride) corner_spectrum(c.corner, t0, cfg, r.series, sink, r.manifest);

  if (snaps.size() == 2 && snaps[0].state && snaps[1].state) {
    const int m = chord_stride(f0.size(), f0.h(), cfg.curvature.resolution);
    const double hw = cfg.curvature.half_width;
    const double corners[] = {0.0, kPi};
    const double quarter[] = {0.5 * kPi, 1.5 * kPi};
    const double at_quarter_corner = curvature_mass_fraction(*snaps[0].state, corners, hw, m);
    const double at_quarter_rotated = curvature_mass_fraction(*snaps[0].state, quarter, hw, m);
    sink.add("corner_mass_half_period", curvature_mass_fraction(*snaps[1].state, corners, hw, m));
    sink.add("corner_mass_quarter_period", at_quarter_corner);
    sink.add("rotated_mass_quarter_period", at_quarter_rotated);
    sink.add("rotated_peak_margin", at_quarter_rotated - at_quarter_corner);
    r.manifest.notes.push_back("curvature mass measured on chords of " + std::to_string(m) + " nodes");
  }

  if (cfg.observers.corner_stride) r.series.corner = std::move(c.corner);
  if (cfg.observers.impulse_stride) r.series.impulse = std::move(c.impulse);
  if (cfg.observers.slice_stride) r.series.slices = std::move(c.slices);
}

struct Extent {
  double lo = 0.0;
  double hi = 0.0;
};

// Span in x3 of the bins carrying impulse above the cut.
std::optional<Extent> support_extent(const SliceProfile& p, double dq, double cut) {
  std::optional<Extent> e;
  for (std::size_t i = 0; i < p.q.size(); ++i) {
    if (p.moduli[i] <= cut) continue;
    if (!e) e = Extent{p.q[i], p.q[i] + dq};
    e->lo = std::min(e->lo, p.q[i]);
    e->hi = std::max(e->hi, p.q[i] + dq);
  }
  return e;
}

// The reconnected tips sit at the ends of the x3 support of the sliced
// impulse; the separation is how far that support has shrunk since t_rec.
void separation_fit(const std::vector<SliceRecord>& slices, double t_rec, const RunConfig& cfg, MetricSink& sink,
                    RunManifest& manifest) {
  if (cfg.observers.slice_axis != SliceAxis::Coordinate) {
    manifest.notes.push_back("support boundary fit needs slice_axis coordinate");
    return;
  }
  const double dq = cfg.observers.slice_dq;
  const auto& ref = slices.front().profile;
  const double cut = cfg.pair.support_threshold * *std::max_element(ref.moduli.begin(), ref.moduli.end());
  const auto start = support_extent(ref, dq, cut);
  if (!start) {
    manifest.notes.push_back("support boundary fit skipped: empty profile at t_rec");
    return;
  }
  const double stop = cfg.pair.support_fit_fraction * 0.5 * (start->hi - start->lo);
  std::vector<double> ts, zs;
  for (const auto& s : slices) {
    if (s.t <= t_rec) continue;
    const auto now = support_extent(s.profile, dq, cut);
    if (!now) break;
    const double z = 0.5 * ((now->lo - start->lo) + (start->hi - now->hi));
    if (z >= stop) break;
    // Below two bins the edge position is mostly quantization.
    if (z < 2.0 * dq) continue;
    ts.push_back(s.t);
    zs.push_back(z);
  }
  if (ts.size() < static_cast<std::size_t>(kMinFitPoints)) {
    manifest.notes.push_back("support boundary fit skipped: " + std::to_string(ts.size()) + " usable samples");
    return;
  }
  const auto fit = separation_exponent_fit(ts, zs, t_rec);
  sink.add("separation_exponent", fit.exponent);
  sink.add("separation_exponent_stderr", fit.stderr_exponent);
  if (cfg.pair.exponent_reference) {
    sink.add("separation_exponent_err", std::abs(fit.exponent - *cfg.pair.exponent_reference));
  }
  manifest.notes.push_back("support boundary fit over " + std::to_string(fit.points) + " slice samples");
}

void pair_pipeline(const RunConfig& cfg, RunResult& r, MetricSink& sink) {
  const Filament f0 = make_antiparallel_pair(cfg.pair.params);
  Collected pre;
  std::vector<Snapshot> none;
  auto obs = make_observers(cfg, pre, none);

  std::optional<ReconnectionEvent> event;
  std::optional<Filament> at_event;
  std::function<bool(const Filament&)> stop;
  if (cfg.criterion == ReconnectionCriterion::DistanceThreshold) {
    stop = [&](const Filament& f) {
      event = distance_trigger(f, cfg.th_x1);
      if (event) at_event = f;
      return event.has_value();
    };
  } else {
    // Flip in |F_l| found at the middle one of the last three samples; keep
    // that state so the surgery happens where the flip was seen.
    ImpulseSeries tail;
    std::optional<Filament> previous;
    const int stride = cfg.observers.impulse_stride.value_or(1);
    const double l = cfg.observers.impulse_window;
    obs.push_back({"flip", stride, [&, tail, previous, l](const Filament& f) mutable {
                     if (event) return;
                     tail.push(f.time, l >= kTwoPi ? fluid_impulse(f) : fluid_impulse(f, l));
                     if (tail.size() > 3) {
                       ImpulseSeries last;
                       for (std::size_t i = tail.size() - 3; i < tail.size(); ++i) last.push(tail.times[i], tail.values[i]);
                       tail = last;
                     }
                     if (tail.size() == 3 && previous && impulse_flip_detect(tail, cfg.th_F).t_flip) {
                       const auto sep = min_separation(*previous);
                       event = ReconnectionEvent{previous->time, sep.index, sep.x1_min, ReconnectionCriterion::ImpulseFlip};
                       at_event = previous;
                     }
                     previous = f;
                   }});
    stop = [&](const Filament&) { return event.has_value(); };
  }

  const auto first = run_leg(f0, cfg.rhs, cfg, cfg.pair.t_max, obs, stop);
  r.manifest.notes.push_back("pre-reconnection steps " + std::to_string(first.steps) + ", rejected " +
                             std::to_string(first.rejected));
  Collected all;
  append(all, pre);
  sink.add("reconnected", event ? 1.0 : 0.0);

  if (event) {
    r.manifest.events.push_back(*event);
    sink.add("t_rec", event->t_rec);
    if (cfg.pair.t_rec_reference) {
      sink.add("t_rec_rel_err", std::abs(event->t_rec - *cfg.pair.t_rec_reference) / *cfg.pair.t_rec_reference);
    }
    // Series recorded past the event (flip criterion) belong to the discarded branch.
    auto trim = [&](auto& series) {
      while (series.size() && series.times.back() > event->t_rec + 1e-12) {
        series.times.pop_back();
        if constexpr (requires { series.values; }) series.values.pop_back();
        if constexpr (requires { series.positions; }) series.positions.pop_back();
        series.moduli.pop_back();
      }
    };
    trim(all.corner);
    trim(all.impulse);
    std::erase_if(all.slices, [&](const SliceRecord& s) { return s.t > event->t_rec + 1e-12; });

    const auto surgery = perform_reconnection(*at_event, *event, cfg.rhs);
    const Filament& g = surgery.filament;
    const double t_rec = event->t_rec;

    Collected post;
    auto post_obs = make_observers(cfg, post, none);
    // The post-surgery leg starts with a sample at t_rec that duplicates the last
    // pre-surgery time stamp; keep both (before and after surgery) for the record.
    const auto second = run_leg(g, surgery.rhs, cfg, t_rec + cfg.pair.t_after, post_obs);
    r.manifest.notes.push_back("post-reconnection steps " + std::to_string(second.steps) + ", rejected " +
                               std::to_string(second.rejected));
    append(all, post);
    sink.add("impulse_drift_post", relative_drift(post.conserved));
    if (cfg.observers.corner_stride) corner_spectrum(post.corner, t_rec, cfg, r.series, sink, r.manifest);

    if (cfg.observers.slice_stride && !post.slices.empty()) separation_fit(post.slices, t_rec, cfg, sink, r.manifest);
  } else {
    r.manifest.notes.push_back("no reconnection before t_max");
  }

  if (cfg.observers.corner_stride) r.series.corner = std::move(all.corner);
  if (cfg.observers.impulse_stride) r.series.impulse = std::move(all.impulse);
  if (cfg.observers.slice_stride) r.series.slices = std::move(all.slices);
}

void rhombus_pipeline(const RunConfig& cfg, MetricSink& sink) {
  std::mt19937_64 rng(cfg.seed);
  double trace_res = 0.0, half_turn = 0.0, closure = 0.0, f_sq = 0.0, angle_form = 0.0;
  for (int i = 0; i < cfg.rhombus_tuples; ++i) {
    const auto a = random_angles(rng);
    trace_res = std::max(trace_res, std::abs(trace_closed_form(a) - trace_product(a)));

    const auto c = random_constrained_angles(rng);
    half_turn = std::max(half_turn, std::abs(trace_product(c) + 1.0));
    const auto p = build_rhombus(c);
    const auto& T = p.tangents;
    closure = std::max(closure, norm(T[0] + T[1] + T[2] + T[3]));
    const auto imp = rhombus_impulse(p, c);
    const double from_angles = 4.0 * (1.0 + std::cos(c.rho0)) * (1.0 + std::cos(c.rho1));
    f_sq = std::max({f_sq, std::abs(imp.f_sq_direct - from_angles), std::abs(imp.f_sq_direct - imp.f_sq_closed)});
    angle_form = std::max(angle_form, std::abs(*imp.F_sq_from_angles - std::pow(kPi, 4) / 64.0 * from_angles));
  }
  sink.add("trace_residual", trace_res);
  sink.add("half_turn_residual", half_turn);
  sink.add("closure_residual", closure);
  sink.add("impulse_identity_residual", f_sq);
  sink.add("impulse_angle_form_residual", angle_form);
}

void grid_pipeline(const RunConfig& cfg, RunResult& r, MetricSink& sink) {
  const auto& gc = cfg.grid;
  VorticityGrid g;
  if (gc.header.empty()) {
    g = make_vortex_ring_grid(gc.n, gc.half_width, gc.radius, gc.gamma, gc.core);
  } else {
    g = read_vorticity_grid(gc.header);
  }
  const double dz = gc.slab_dz > 0.0 ? gc.slab_dz : g.nz * g.dz;
  SliceProfile p;
  try {
    p = grid_impulse(g, dz);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Vec3 total{};
  for (const auto& v : p.vectors) total += v;
  sink.add("grid_impulse_modulus", norm(total));
  if (gc.header.empty()) {
    const double thin = kPi * gc.gamma * gc.radius * gc.radius;
    sink.add("grid_rel_err", std::abs(norm(total) - thin) / thin);
  }
  r.series.slices = std::vector<SliceRecord>{{0.0, std::move(p)}};
}

void riemann_pipeline(const RunConfig& cfg, RunResult& r, MetricSink& sink) {
  const int N = cfg.riemann_samples;
  std::vector<double> v(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) v[static_cast<std::size_t>(j)] = riemann_function(kTwoPi * j / N, cfg.riemann_truncation).real();
  r.series.spectrum = spectrum(v);
  const auto& s = *r.series.spectrum;
  double off = 0.0;
  for (std::size_t k = 1; k < s.k.size(); ++k) {
    if (!s.is_square[k]) off = std::max(off, s.coeff_modulus[k]);
  }
  sink.add("off_square_max", off);
  try {
    const auto dom = square_dominance(s, cfg.observers.dominance_n_max);
    sink.add("dominance_fraction", dom.fraction);
    r.manifest.notes.push_back("square dominance: " + flags(dom));
  } catch (const std::invalid_argument& e) {
    r.manifest.notes.push_back(std::string("dominance skipped: ") + e.what());
  }
}

// ------------------------------------------------------------------- output

class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& p) : path_(p), out_(p, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + p.string() + " for writing");
  }
  template <class... Cols>
  void row(const Cols&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

void write_text_atomically(const std::filesystem::path& p, const std::string& text) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + p.string() + ": " + ec.message());
}

}  // namespace

std::string to_string(Scenario s) {
  for (const auto& [v, name] : kScenarioNames)
    if (v == s) return name;
  return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
  for (const auto& [v, name] : kScenarioNames)
    if (s == name) return v;
  throw ConfigError("unknown scenario '" + s + "'");
}

std::string code_version() { return VFL_VERSION; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Section root(j, "");
  std::string scenario = to_string(c.scenario);
  root.get("scenario", scenario);
  c.scenario = scenario_from_string(scenario);
  root.get("t_end", c.t_end);
  root.get("seed", c.seed);
  root.get("tau_initial", c.tau_initial);
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;

  if (auto s = root.child("eye")) {
    s->get("b", c.eye.b);
    s->get("b_tilde", c.eye.b_tilde);
    s->get("n_nodes", c.eye.n_nodes);
    s->finish();
  }
  if (auto s = root.child("polygonal_eye")) {
    s->get("M", c.polygonal_eye.M);
    s->get("K", c.polygonal_eye.K);
    s->get("nodes_per_side", c.nodes_per_side);
    s->finish();
  }
  if (auto s = root.child("pair")) {
    auto& p = c.pair;
    s->get("b", p.params.b);
    s->get("n_nodes", p.params.n_nodes);
    s->get("axis_period", p.params.axis_period);
    s->get("t_max", p.t_max);
    s->get("t_after", p.t_after);
    s->get_optional("t_rec_reference", p.t_rec_reference);
    s->get("support_threshold", p.support_threshold);
    s->get("support_fit_fraction", p.support_fit_fraction);
    s->get_optional("exponent_reference", p.exponent_reference);
    if (auto q = s->child("perturbation")) {
      auto& d = p.params.perturbation;
      q->get("mode_count", d.mode_count);
      q->get("amplitude", d.amplitude);
      q->get("seed", d.seed);
      q->get("tilt", d.tilt);
      q->get("decay", d.decay);
      q->get("random_phase", d.random_phase);
      q->finish();
    }
    s->finish();
  }
  if (auto s = root.child("rhombus")) {
    s->get("tuples", c.rhombus_tuples);
    s->finish();
  }
  if (auto s = root.child("grid")) {
    s->get("header", c.grid.header);
    s->get("n", c.grid.n);
    s->get("half_width", c.grid.half_width);
    s->get("radius", c.grid.radius);
    s->get("gamma", c.grid.gamma);
    s->get("core", c.grid.core);
    s->get("slab_dz", c.grid.slab_dz);
    s->finish();
  }
  if (auto s = root.child("riemann")) {
    s->get("truncation", c.riemann_truncation);
    s->get("samples", c.riemann_samples);
    s->finish();
  }
  if (auto s = root.child("rhs")) {
    s->get("epsilon", c.rhs.epsilon);
    s->get("r_c", c.rhs.r_c);
    s->get("interaction_enabled", c.rhs.interaction_enabled);
    s->finish();
  }
  if (auto s = root.child("controller")) {
    auto& k = c.controller;
    s->get("abs_tol", k.abs_tol);
    s->get("rel_tol", k.rel_tol);
    s->get("safety", k.safety);
    s->get("tau_min", k.tau_min);
    s->get("tau_max_user", k.tau_max_user);
    s->get("stability_cap_enabled", k.stability_cap_enabled);
    s->get("stability_fraction", k.stability_fraction);
    s->finish();
  }
  if (auto s = root.child("observers")) {
    auto& o = c.observers;
    s->get("sample_dt", o.sample_dt);
    s->get_optional("corner_stride", o.corner_stride);
    s->get_optional("impulse_stride", o.impulse_stride);
    s->get("impulse_window", o.impulse_window);
    s->get_optional("slice_stride", o.slice_stride);
    s->get("slice_dq", o.slice_dq);
    std::string axis = o.slice_axis == SliceAxis::Coordinate ? "coordinate" : "parameter";
    s->get("slice_axis", axis);
    if (axis != "coordinate" && axis != "parameter") throw ConfigError("observers.slice_axis must be coordinate or parameter");
    o.slice_axis = axis == "coordinate" ? SliceAxis::Coordinate : SliceAxis::Parameter;
    s->get("spectrum_window", o.spectrum_window);
    s->get("dominance_n_max", o.dominance_n_max);
    s->finish();
  }
  if (auto s = root.child("curvature")) {
    s->get("resolution", c.curvature.resolution);
    s->get("half_width", c.curvature.half_width);
    s->finish();
  }
  if (auto s = root.child("reconnection")) {
    std::string crit = to_string(c.criterion);
    s->get("criterion", crit);
    try {
      c.criterion = criterion_from_string(crit);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    s->get("th_x1", c.th_x1);
    s->get("th_F", c.th_F);
    s->finish();
  }
  if (auto s = root.child("acceptance")) {
    for (const auto& item : s->raw().items()) {
      double v = 0.0;
      s->get(item.key().c_str(), v);
      c.acceptance[item.key()] = v;
    }
    s->finish();
  }
  root.finish();
  validate_config(c);
  return c;
}

json to_json(const RunConfig& c) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  const auto& d = c.pair.params.perturbation;
  json j;
  j["scenario"] = to_string(c.scenario);
  j["t_end"] = c.t_end;
  j["seed"] = c.seed;
  j["tau_initial"] = c.tau_initial;
  j["output_dir"] = c.output_dir.string();
  j["eye"] = {{"b", c.eye.b}, {"b_tilde", c.eye.b_tilde}, {"n_nodes", c.eye.n_nodes}};
  j["polygonal_eye"] = {{"M", c.polygonal_eye.M}, {"K", c.polygonal_eye.K}, {"nodes_per_side", c.nodes_per_side}};
  j["pair"] = {{"b", c.pair.params.b},
               {"n_nodes", c.pair.params.n_nodes},
               {"axis_period", c.pair.params.axis_period},
               {"t_max", c.pair.t_max},
               {"t_after", c.pair.t_after},
               {"t_rec_reference", opt(c.pair.t_rec_reference)},
               {"support_threshold", c.pair.support_threshold},
               {"support_fit_fraction", c.pair.support_fit_fraction},
               {"exponent_reference", opt(c.pair.exponent_reference)},
               {"perturbation",
                {{"mode_count", d.mode_count},
                 {"amplitude", d.amplitude},
                 {"seed", d.seed},
                 {"tilt", d.tilt},
                 {"decay", d.decay},
                 {"random_phase", d.random_phase}}}};
  j["rhombus"] = {{"tuples", c.rhombus_tuples}};
  j["grid"] = {{"header", c.grid.header},         {"n", c.grid.n},         {"half_width", c.grid.half_width},
               {"radius", c.grid.radius},         {"gamma", c.grid.gamma}, {"core", c.grid.core},
               {"slab_dz", c.grid.slab_dz}};
  j["riemann"] = {{"truncation", c.riemann_truncation}, {"samples", c.riemann_samples}};
  j["rhs"] = {{"epsilon", c.rhs.epsilon}, {"r_c", c.rhs.r_c}, {"interaction_enabled", c.rhs.interaction_enabled}};
  const auto& k = c.controller;
  j["controller"] = {{"abs_tol", k.abs_tol},
                     {"rel_tol", k.rel_tol},
                     {"safety", k.safety},
                     {"tau_min", k.tau_min},
                     {"tau_max_user", k.tau_max_user},
                     {"stability_cap_enabled", k.stability_cap_enabled},
                     {"stability_fraction", k.stability_fraction}};
  const auto& o = c.observers;
  j["observers"] = {{"sample_dt", o.sample_dt},
                    {"corner_stride", opt(o.corner_stride)},
                    {"impulse_stride", opt(o.impulse_stride)},
                    {"impulse_window", o.impulse_window},
                    {"slice_stride", opt(o.slice_stride)},
                    {"slice_dq", o.slice_dq},
                    {"slice_axis", o.slice_axis == SliceAxis::Coordinate ? "coordinate" : "parameter"},
                    {"spectrum_window", o.spectrum_window},
                    {"dominance_n_max", o.dominance_n_max}};
  j["curvature"] = {{"resolution", c.curvature.resolution}, {"half_width", c.curvature.half_width}};
  j["reconnection"] = {{"criterion", to_string(c.criterion)}, {"th_x1", c.th_x1}, {"th_F", c.th_F}};
  j["acceptance"] = json::object();
  for (const auto& [key, v] : c.acceptance) j["acceptance"][key] = v;
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

bool RunManifest::all_passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return !m.gated() || m.passed(); });
}

RunResult execute_scenario(const RunConfig& cfg) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.manifest.code_version = code_version();
  r.manifest.config = to_json(cfg);
  MetricSink sink(cfg.acceptance);

  switch (cfg.scenario) {
    case Scenario::Eye:
      eye_pipeline(make_eye(cfg.eye), cfg, r, sink);
      break;
    case Scenario::PolygonalEye:
      eye_pipeline(make_polygonal_eye(cfg.polygonal_eye, cfg.nodes_per_side).filament, cfg, r, sink);
      break;
    case Scenario::PairReconnection:
      pair_pipeline(cfg, r, sink);
      break;
    case Scenario::RhombusCheck:
      rhombus_pipeline(cfg, sink);
      break;
    case Scenario::GridImpulse:
      grid_pipeline(cfg, r, sink);
      break;
    case Scenario::RiemannReference:
      riemann_pipeline(cfg, r, sink);
      break;
  }
  r.manifest.metrics = sink.finish();
  r.manifest.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<std::string> write_outputs(const SeriesBundle& series, RunManifest& manifest,
                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::string> files;
  if (series.corner) {
    CsvFile f(dir / "corner_track.csv");
    f.row("t", "x1", "x2", "x3", "modulus");
    const auto& c = *series.corner;
    for (std::size_t i = 0; i < c.size(); ++i) {
      f.row(c.times[i], c.positions[i].x1, c.positions[i].x2, c.positions[i].x3, c.moduli[i]);
    }
    f.close();
    files.push_back("corner_track.csv");
  }
  if (series.impulse) {
    CsvFile f(dir / "impulse.csv");
    f.row("t", "F1", "F2", "F3", "modulus");
    const auto& s = *series.impulse;
    for (std::size_t i = 0; i < s.size(); ++i) {
      f.row(s.times[i], s.values[i].x1, s.values[i].x2, s.values[i].x3, s.moduli[i]);
    }
    f.close();
    files.push_back("impulse.csv");
  }
  if (series.spectrum) {
    CsvFile f(dir / "spectrum.csv");
    f.row("k", "coeff_modulus", "weighted", "is_square");
    const auto& s = *series.spectrum;
    for (std::size_t i = 0; i < s.k.size(); ++i) f.row(s.k[i], s.coeff_modulus[i], s.weighted[i], bool(s.is_square[i]));
    f.close();
    files.push_back("spectrum.csv");
  }
  if (series.slices) {
    CsvFile f(dir / "slices.csv");
    f.row("t", "q", "F");
    for (const auto& rec : *series.slices) {
      for (std::size_t i = 0; i < rec.profile.q.size(); ++i) f.row(rec.t, rec.profile.q[i], rec.profile.moduli[i]);
    }
    f.close();
    files.push_back("slices.csv");
  }
  files.push_back("manifest.json");
  manifest.outputs = files;
  write_text_atomically(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return files;
}

RunManifest run_scenario(const RunConfig& cfg) {
  auto r = execute_scenario(cfg);
  write_outputs(r.series, r.manifest, cfg.output_dir);
  return r.manifest;
}

ordered_json to_json(const RunManifest& m) {
  ordered_json j;
  bool gated = false;
  for (const auto& x : m.metrics) gated = gated || x.gated();
  j["code_version"] = m.code_version;
  j["scenario"] = m.config.contains("scenario") ? m.config["scenario"].get<std::string>() : std::string();
  j["status"] = !gated ? "ungated" : (m.all_passed() ? "pass" : "fail");
  j["wall_time_seconds"] = m.wall_time_seconds;
  j["events"] = ordered_json::array();
  for (const auto& e : m.events) {
    j["events"].push_back({{"t_rec", e.t_rec},
                           {"criterion", to_string(e.criterion)},
                           {"node_index", e.node_index},
                           {"x1_min", e.x1_min}});
  }
  j["metrics"] = ordered_json::array();
  for (const auto& x : m.metrics) {
    ordered_json e;
    e["name"] = x.name;
    e["value"] = x.value;
    if (x.min) e["min"] = *x.min;
    if (x.max) e["max"] = *x.max;
    if (x.gated()) e["passed"] = x.passed();
    j["metrics"].push_back(e);
  }
  j["outputs"] = m.outputs;
  j["notes"] = m.notes;
  j["config"] = ordered_json::parse(m.config.dump());
  return j;
}

}  // namespace vfl
