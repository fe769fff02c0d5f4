#pragma once

#include <optional>
#include <string>

#include "vfl/diagnostics.hpp"
#include "vfl/evolution.hpp"
#include "vfl/geometry.hpp"

namespace vfl {

enum class ReconnectionCriterion { DistanceThreshold, ImpulseFlip };

std::string to_string(ReconnectionCriterion c);
ReconnectionCriterion criterion_from_string(const std::string& s);

struct ReconnectionEvent {
  double t_rec = 0.0;
  int node_index = 0;
  double x1_min = 0.0;
  ReconnectionCriterion criterion = ReconnectionCriterion::DistanceThreshold;
};

inline constexpr double kDefaultThX1 = 1e-6;

struct Separation {
  int index = 0;
  double x1_min = 0.0;
};

/// Node with the smallest x1 (first one on ties).
Separation min_separation(const Filament& f);

/// Event when min x1 has reached th_x1.
std::optional<ReconnectionEvent> distance_trigger(const Filament& f, double th_x1);

struct FlipResult {
  std::optional<double> t_flip;
  std::string diagnostic;
};

/// Earliest sample t with D(t) D(t - tau) <= -th_F, where
/// D(t) = (|F|(t + tau) - |F|(t)) / tau on the uniform sample stride tau.
FlipResult impulse_flip_detect(const ImpulseSeries& series, double th_F);

struct SurgeryResult {
  Filament filament;
  RhsConfig rhs;
};

/// Reindexes so the touching node is node 0, projects it onto x1 = 0 (and,
/// for a PeriodicShift along x3, translates x3 so that the shift becomes the
/// D-image), switches to MirrorAntisymmetric, disables the interaction and
/// reparametrizes by arc length to total length 2pi. x2 is not touched.
SurgeryResult perform_reconnection(const Filament& f, const ReconnectionEvent& event, const RhsConfig& cfg);

}  // namespace vfl
