#include "vfl/reconnection.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vfl {

std::string to_string(ReconnectionCriterion c) {
  return c == ReconnectionCriterion::DistanceThreshold ? "distance_threshold" : "impulse_flip";
}

ReconnectionCriterion criterion_from_string(const std::string& s) {
  if (s == "distance_threshold") return ReconnectionCriterion::DistanceThreshold;
  if (s == "impulse_flip") return ReconnectionCriterion::ImpulseFlip;
  throw std::invalid_argument("unknown reconnection criterion '" + s + "'");
}

Separation min_separation(const Filament& f) {
  Separation best{0, f.nodes[0].x1};
  for (int j = 1; j < f.size(); ++j) {
    const double x1 = f.nodes[static_cast<std::size_t>(j)].x1;
    if (x1 < best.x1_min) best = {j, x1};
  }
  return best;
}

std::optional<ReconnectionEvent> distance_trigger(const Filament& f, double th_x1) {
  const auto sep = min_separation(f);
  if (sep.x1_min > th_x1) return std::nullopt;
  return ReconnectionEvent{f.time, sep.index, sep.x1_min, ReconnectionCriterion::DistanceThreshold};
}

FlipResult impulse_flip_detect(const ImpulseSeries& series, double th_F) {
  const auto& t = series.times;
  const auto& m = series.moduli;
  if (t.size() < 3) return {std::nullopt, "impulse_flip_detect: need at least 3 samples"};
  const double tau = t[1] - t[0];
  if (!(tau > 0.0)) return {std::nullopt, "impulse_flip_detect: times must increase"};
  for (std::size_t i = 2; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - tau) > 1e-9 * std::max(1.0, std::abs(t[i]))) {
      return {std::nullopt, "impulse_flip_detect: samples are not uniformly spaced"};
    }
  }
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double ahead = (m[i + 1] - m[i]) / tau;
    const double behind = (m[i] - m[i - 1]) / tau;
    if (ahead * behind <= -th_F) return {t[i], {}};
  }
  return {std::nullopt, {}};
}

SurgeryResult perform_reconnection(const Filament& f, const ReconnectionEvent& event, const RhsConfig& cfg) {
  if (std::abs(f.time - event.t_rec) > 1e-12 * std::max(1.0, std::abs(event.t_rec))) {
    std::ostringstream msg;
    msg << "perform_reconnection: stale event (t_rec " << event.t_rec << ", filament at t " << f.time << ")";
    throw std::invalid_argument(msg.str());
  }
  const int n = f.size();
  if (event.node_index < 0 || event.node_index >= n) {
    throw std::invalid_argument("perform_reconnection: touching node index out of range");
  }

  std::vector<Vec3> nodes(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) nodes[static_cast<std::size_t>(j)] = node_at(f, event.node_index + j);

  if (const auto* shift = std::get_if<PeriodicShift>(&f.boundary)) {
    const Vec3 S = shift->shift;
    if (std::abs(S.x1) > 1e-12 || std::abs(S.x2) > 1e-12) {
      throw std::invalid_argument("perform_reconnection: periodic shift must point along x3");
    }
    // X(2pi) = X(0) + S must equal D X(0): x1(0) = 0 and x3(0) = -S3/2.
    const double dz = -0.5 * S.x3 - nodes[0].x3;
    for (auto& v : nodes) v.x3 += dz;
  }
  nodes[0].x1 = 0.0;

  Filament mirrored(f.grid, std::move(nodes), MirrorAntisymmetric{}, f.time);
  SurgeryResult out{arclength_reparametrize(mirrored, kTwoPi), cfg};
  out.rhs.epsilon = 0.0;
  out.rhs.interaction_enabled = false;
  // The fold at the touching node has a near-zero finite-difference tangent;
  // arc length is conserved from here on, so use the exact modulus instead.
  out.rhs.arclength_speed = 1.0;
  return out;
}

}  // namespace vfl
