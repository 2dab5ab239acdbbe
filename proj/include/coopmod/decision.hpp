#pragma once

// Zone-of-Danger crossing prediction and the SAFE/DANGER moderation state
// machine stepped once per decision tick.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <vector>

#include "coopmod/fusion.hpp"
#include "coopmod/geometry.hpp"

namespace coopmod::decision {

/// The zone is the road-axis interval [center - half_extent, center + half_extent].
struct ZodConfig {
  double half_extent_m = 25.0;
  double tau_th_s = 5.0;
  double center_offset_m = 0.0;

  void validate() const {
    if (!(half_extent_m > 0.0)) throw std::invalid_argument("zod half_extent_m must be > 0");
    if (!(tau_th_s > 0.0)) throw std::invalid_argument("zod tau_th_s must be > 0");
  }
  [[nodiscard]] double lower() const { return center_offset_m - half_extent_m; }
  [[nodiscard]] double upper() const { return center_offset_m + half_extent_m; }
  [[nodiscard]] bool contains(double x) const { return x >= lower() && x <= upper(); }
};

/// Predicted absolute entry/exit times; +inf when it never happens.
struct ZodCrossing {
  double t_enter_s = kInfinity;
  double t_exit_s = kInfinity;
  fusion::ObjectRef object;

  [[nodiscard]] bool enters() const { return std::isfinite(t_enter_s); }
};

/// Constant-velocity extrapolation of the object's current road position.
inline ZodCrossing predict_crossing(const fusion::FusedObject& obj, double now,
                                    const ZodConfig& zod) {
  ZodCrossing c;
  c.object = obj.ref();
  const double x = obj.road_x_m;
  const double v = obj.speed_ms;
  const double lo = zod.lower();
  const double hi = zod.upper();
  if (x >= lo && x <= hi) {
    c.t_enter_s = now;
    if (v > 0.0) {
      c.t_exit_s = now + (hi - x) / v;
    } else if (v < 0.0) {
      c.t_exit_s = now + (x - lo) / -v;
    }
  } else if (x < lo && v > 0.0) {
    c.t_enter_s = now + (lo - x) / v;
    c.t_exit_s = now + (hi - x) / v;
  } else if (x > hi && v < 0.0) {
    c.t_enter_s = now + (x - hi) / -v;
    c.t_exit_s = now + (x - lo) / -v;
  }
  return c;
}

enum class Mode { safe, danger };
enum class Action { stop, pass, hold };

inline std::string_view to_string(Mode m) { return m == Mode::safe ? "SAFE" : "DANGER"; }

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::stop: return "STOP";
    case Action::pass: return "PASS";
    case Action::hold: return "HOLD";
  }
  return "?";
}

struct DecisionState {
  Mode mode = Mode::safe;
  std::optional<fusion::ObjectRef> blocking_object;  // set iff DANGER
  double since_s = 0.0;
  // First tick at which the blocking object was missing from the fused input.
  std::optional<double> blocking_missing_since;
  // The blocking object has been observed inside the zone.
  bool blocking_entered = false;
};

struct StepResult {
  DecisionState state;
  Action action = Action::pass;
  std::vector<ZodCrossing> crossings;  // one per fused object, input order
};

namespace detail {

/// Inside the zone or predicted to enter within tau_th, and not yet out.
inline bool is_hazard(const ZodCrossing& c, double now, const ZodConfig& zod) {
  return c.enters() && c.t_enter_s - now <= zod.tau_th_s && c.t_exit_s > now;
}

/// The blocking object has not yet cleared the zone. Outside the zone it has
/// cleared once it was seen inside, or when it moves away without entering;
/// a standstill short of the zone never exits under constant velocity.
inline bool is_pending(const fusion::FusedObject& obj, bool entered, const ZodConfig& zod) {
  const double x = obj.road_x_m;
  if (zod.contains(x)) return true;
  if (entered) return false;
  const bool moving_away = (x < zod.lower() && obj.speed_ms < 0.0) || (x > zod.upper() && obj.speed_ms > 0.0);
  return !moving_away;
}

inline std::optional<ZodCrossing> earliest_hazard(const std::vector<ZodCrossing>& crossings,
                                                  double now, const ZodConfig& zod) {
  std::optional<ZodCrossing> best;
  for (const auto& c : crossings) {
    if (!is_hazard(c, now, zod)) continue;
    if (!best || std::tie(c.t_enter_s, c.object) < std::tie(best->t_enter_s, best->object)) best = c;
  }
  return best;
}

}  // namespace detail

/// One tick of the moderation state machine.
///
/// SAFE -> DANGER (STOP) needs a hazard and a merging road user at the same
/// tick. DANGER holds until the blocking object has cleared the zone; then
/// another current hazard takes over, otherwise the robot returns to SAFE
/// (PASS). A blocking object missing from the fused input gets a further
/// tau_th of grace before release.
inline StepResult step(DecisionState state, const std::vector<fusion::FusedObject>& fused,
                       bool merging_seen, double now, const ZodConfig& zod) {
  StepResult r;
  r.crossings.reserve(fused.size());
  for (const auto& o : fused) r.crossings.push_back(predict_crossing(o, now, zod));

  auto enter_danger = [&](const ZodCrossing& hazard, Action action) {
    if (state.mode == Mode::safe) state.since_s = now;
    state.mode = Mode::danger;
    state.blocking_object = hazard.object;
    state.blocking_missing_since.reset();
    state.blocking_entered = hazard.t_enter_s <= now;
    r.action = action;
  };
  auto release = [&] {
    state.mode = Mode::safe;
    state.blocking_object.reset();
    state.blocking_missing_since.reset();
    state.blocking_entered = false;
    state.since_s = now;
    r.action = Action::pass;
  };

  if (state.mode == Mode::safe) {
    const auto hazard = detail::earliest_hazard(r.crossings, now, zod);
    if (hazard && merging_seen) {
      enter_danger(*hazard, Action::stop);
    } else {
      r.action = Action::pass;
    }
    r.state = state;
    return r;
  }

  const fusion::FusedObject* blocking = nullptr;
  for (const auto& o : fused) {
    if (state.blocking_object && o.ref() == *state.blocking_object) blocking = &o;
  }

  if (blocking) {
    state.blocking_missing_since.reset();
    if (detail::is_pending(*blocking, state.blocking_entered, zod)) {
      state.blocking_entered = state.blocking_entered || zod.contains(blocking->road_x_m);
      r.action = Action::hold;
    } else if (const auto next = detail::earliest_hazard(r.crossings, now, zod)) {
      enter_danger(*next, Action::hold);
    } else {
      release();
    }
  } else {
    if (!state.blocking_missing_since) state.blocking_missing_since = now;
    if (now - *state.blocking_missing_since < zod.tau_th_s) {
      r.action = Action::hold;
    } else if (const auto next = detail::earliest_hazard(r.crossings, now, zod)) {
      enter_danger(*next, Action::hold);
    } else {
      release();
    }
  }
  r.state = state;
  return r;
}

}  // namespace coopmod::decision
