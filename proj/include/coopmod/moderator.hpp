#pragma once

// Robot agent pieces: CAM generation rules, DENM relaying and the
// STOP/PASS actuation timeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "coopmod/decision.hpp"
#include "coopmod/geometry.hpp"
#include "coopmod/messages.hpp"
#include "coopmod/random.hpp"

namespace coopmod::moderator {

/// CAM generation rules. Trigger thresholds default to the ETSI vehicle
/// profile (4 m, 0.5 m/s, 4 deg).
struct CamRules {
  double max_interval_s = 1.0;
  double min_interval_s = 0.1;
  double check_interval_s = 0.1;
  bool triggers = true;
  double pos_delta_m = 4.0;
  double speed_delta_ms = 0.5;
  double heading_delta_deg = 4.0;
  // Standard deviation of the (half-normal) processing delay added to each
  // generation; 0 disables it.
  double jitter_sigma_s = 0.0;

  void validate() const {
    if (!(min_interval_s > 0.0) || !(max_interval_s >= min_interval_s)) {
      throw std::invalid_argument("CAM intervals must satisfy 0 < min <= max");
    }
    if (!(check_interval_s > 0.0)) throw std::invalid_argument("CAM check interval must be > 0");
    if (!(jitter_sigma_s >= 0.0)) throw std::invalid_argument("CAM jitter sigma must be >= 0");
  }
};

struct Kinematics {
  Vec2 position;
  double speed_ms = 0.0;     // magnitude
  double heading_deg = 0.0;  // direction of travel, 0 = +x, counter-clockwise
};

struct CamSnapshot {
  double time_s = 0.0;
  Kinematics state;
};

inline double heading_difference_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

inline msg::CamPayload make_cam(msg::StationType type, const Kinematics& k) {
  msg::CamPayload cam;
  cam.station_type = type;
  cam.pos_x_cm = static_cast<std::int32_t>(std::llround(k.position.x * 100.0));
  cam.pos_y_cm = static_cast<std::int32_t>(std::llround(k.position.y * 100.0));
  cam.speed_cms = static_cast<std::uint16_t>(
      std::clamp(std::llround(std::abs(k.speed_ms) * 100.0), 0LL, 65535LL));
  double heading = std::fmod(k.heading_deg, 360.0);
  if (heading < 0.0) heading += 360.0;
  cam.heading_cdeg = static_cast<std::uint16_t>(std::llround(heading * 100.0) % 36000);
  return cam;
}

/// Small slack for comparing tick-derived times against interval thresholds.
inline constexpr double kTimeSlack = 1e-9;

/// A CAM is due after max_interval, or after min_interval when a kinematic
/// trigger fires. The first CAM (no previous one) is due immediately.
inline bool cam_due(const Kinematics& self, const std::optional<CamSnapshot>& last, double now,
                    const CamRules& rules) {
  if (!last) return true;
  const double elapsed = now - last->time_s;
  if (elapsed + kTimeSlack >= rules.max_interval_s) return true;
  if (!rules.triggers || elapsed + kTimeSlack < rules.min_interval_s) return false;
  const auto& prev = last->state;
  return distance(self.position, prev.position) > rules.pos_delta_m ||
         std::abs(self.speed_ms - prev.speed_ms) > rules.speed_delta_ms ||
         heading_difference_deg(self.heading_deg, prev.heading_deg) > rules.heading_delta_deg;
}

inline std::optional<msg::CamPayload> cam_tick(const Kinematics& self,
                                               const std::optional<CamSnapshot>& last, double now,
                                               const CamRules& rules, msg::StationType type) {
  if (!cam_due(self, last, now, rules)) return std::nullopt;
  return make_cam(type, self);
}

struct CamEmission {
  msg::CamPayload payload;
  double generation_time_s = 0.0;
};

/// Stateful CAM source for one station. With jitter enabled the generation
/// time trails the check time by |N(0, sigma)|, and the next interval is
/// measured from that delayed time.
class CamGenerator {
 public:
  CamGenerator(CamRules rules, msg::StationType type, std::uint64_t jitter_seed = 0,
               std::optional<CamSnapshot> last = std::nullopt)
      : rules_(rules), type_(type), rng_(jitter_seed), last_(std::move(last)) {
    rules_.validate();
  }

  std::optional<CamEmission> tick(const Kinematics& self, double now) {
    auto cam = cam_tick(self, last_, now, rules_, type_);
    if (!cam) return std::nullopt;
    double generated = now;
    if (rules_.jitter_sigma_s > 0.0) generated += std::abs(rng_.normal(0.0, rules_.jitter_sigma_s));
    last_ = CamSnapshot{generated, self};
    return CamEmission{*cam, generated};
  }

  [[nodiscard]] const std::optional<CamSnapshot>& last() const { return last_; }
  [[nodiscard]] const CamRules& rules() const { return rules_; }

 private:
  CamRules rules_;
  msg::StationType type_;
  Rng rng_;
  std::optional<CamSnapshot> last_;
};

struct ModeratorConfig {
  CamRules cam;
  double actuation_move_s = 4.0;
  double gesture_raise_s = 1.0;
  std::uint8_t denm_max_hops = 1;

  void validate() const {
    cam.validate();
    if (!(actuation_move_s >= 0.0) || !(gesture_raise_s >= 0.0)) {
      throw std::invalid_argument("actuation times must be >= 0");
    }
  }
};

// ---------------------------------------------------------------------------

enum class RelayVerdict { relayed, duplicate, hop_limit, own_message, not_denm };

inline std::string_view to_string(RelayVerdict v) {
  switch (v) {
    case RelayVerdict::relayed: return "relayed";
    case RelayVerdict::duplicate: return "duplicate";
    case RelayVerdict::hop_limit: return "hop_limit";
    case RelayVerdict::own_message: return "own_message";
    case RelayVerdict::not_denm: return "not_denm";
  }
  return "?";
}

struct RelayOutcome {
  RelayVerdict verdict = RelayVerdict::not_denm;
  std::optional<msg::Message> rebroadcast;
};

/// DENM repeater with (origin station, sequence number) de-duplication.
class DenmRelay {
 public:
  DenmRelay(std::uint32_t self_id, std::uint8_t max_hops) : self_id_(self_id), max_hops_(max_hops) {}

  /// The origin timestamp is kept in the header; the relay writes its own
  /// station id and increments hop_count.
  RelayOutcome relay(const msg::Message& incoming) {
    const auto* denm = incoming.denm();
    if (!denm) return {};
    if (incoming.station_id == self_id_ || denm->origin_station_id == self_id_) {
      return {RelayVerdict::own_message, std::nullopt};
    }
    const auto key = std::pair{denm->origin_station_id, denm->sequence_number};
    if (!seen_.insert(key).second) return {RelayVerdict::duplicate, std::nullopt};
    if (denm->hop_count >= max_hops_) return {RelayVerdict::hop_limit, std::nullopt};
    msg::Message out = incoming;
    out.station_id = self_id_;
    auto& payload = std::get<msg::DenmPayload>(out.payload);
    payload.hop_count = static_cast<std::uint8_t>(denm->hop_count + 1);
    return {RelayVerdict::relayed, std::move(out)};
  }

  [[nodiscard]] bool seen(std::uint32_t origin, std::uint16_t sequence) const {
    return seen_.contains({origin, sequence});
  }

 private:
  std::uint32_t self_id_;
  std::uint8_t max_hops_;
  std::set<std::pair<std::uint32_t, std::uint16_t>> seen_;
};

// ---------------------------------------------------------------------------

enum class Posture { standby, moving_to_stop, stop_posture, clearing };

enum class ActuationKind { posture_complete, lane_clear };

inline std::string_view to_string(ActuationKind k) {
  return k == ActuationKind::posture_complete ? "posture_complete" : "lane_clear";
}

struct ActuationEvent {
  double time_s = 0.0;
  ActuationKind kind = ActuationKind::posture_complete;

  friend bool operator==(const ActuationEvent&, const ActuationEvent&) = default;
};

/// Timeline of the robot body. STOP: move to lane centre and raise the
/// gesture; PASS: step back; HOLD: nothing. A new command cancels a pending
/// event of the opposite kind. Repeated PASS while already clear is a no-op.
class Actuator {
 public:
  explicit Actuator(ModeratorConfig cfg) : cfg_(cfg) {}

  std::vector<ActuationEvent> actuate(decision::Action action, double now) {
    switch (action) {
      case decision::Action::hold:
        return {};
      case decision::Action::stop: {
        if (posture_ == Posture::moving_to_stop || posture_ == Posture::stop_posture) return {};
        pending_ = ActuationEvent{now + cfg_.actuation_move_s + cfg_.gesture_raise_s,
                                  ActuationKind::posture_complete};
        posture_ = Posture::moving_to_stop;
        return {*pending_};
      }
      case decision::Action::pass: {
        if (posture_ == Posture::standby || posture_ == Posture::clearing) return {};
        pending_ = ActuationEvent{now + cfg_.actuation_move_s, ActuationKind::lane_clear};
        posture_ = Posture::clearing;
        return {*pending_};
      }
    }
    return {};
  }

  /// Pops the pending event if it has fired by `now`.
  std::optional<ActuationEvent> due(double now) {
    if (!pending_ || pending_->time_s > now + kTimeSlack) return std::nullopt;
    auto fired = *pending_;
    pending_.reset();
    posture_ = fired.kind == ActuationKind::posture_complete ? Posture::stop_posture
                                                             : Posture::standby;
    return fired;
  }

  [[nodiscard]] Posture posture() const { return posture_; }
  [[nodiscard]] const std::optional<ActuationEvent>& pending() const { return pending_; }

 private:
  ModeratorConfig cfg_;
  Posture posture_ = Posture::standby;
  std::optional<ActuationEvent> pending_;
};

}  // namespace coopmod::moderator
