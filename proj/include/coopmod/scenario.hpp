#pragma once

// Declarative scenario description, its JSON schema (schema_version 1),
// load-time validation and piecewise-constant-acceleration trajectories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopmod/calibration.hpp"
#include "coopmod/channel.hpp"
#include "coopmod/decision.hpp"
#include "coopmod/fusion.hpp"
#include "coopmod/geometry.hpp"
#include "coopmod/moderator.hpp"
#include "coopmod/perception.hpp"
#include "coopmod/random.hpp"

namespace coopmod::sim {

inline constexpr int kSchemaVersion = 1;

/// Malformed file: bad JSON, missing field, wrong type.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed file describing an impossible scenario.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A referenced file could not be read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectorySegment {
  double start_time = 0.0;
  double start_x = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
};

struct Vehicle {
  std::uint32_t id = 0;
  std::uint32_t station_id = 0;  // 0: not V2X equipped
  ObjectClass object_class = ObjectClass::car;
  std::vector<TrajectorySegment> trajectory;
  std::optional<double> end_time;
  moderator::CamRules cam{.max_interval_s = 1.0};
  double lane_y = 0.0;

  [[nodiscard]] bool v2x_equipped() const { return station_id != 0; }
  [[nodiscard]] double appear_time() const { return trajectory.front().start_time; }
  [[nodiscard]] bool present(double t) const {
    return t >= appear_time() && (!end_time || t <= *end_time);
  }
};

struct KinematicState {
  double road_x = 0.0;
  double speed = 0.0;
};

/// x(t) = x0 + v0*dt + a*dt^2/2 inside the active segment (the last one
/// starting at or before t).
inline KinematicState eval_trajectory(const Vehicle& v, double t) {
  const auto& segs = v.trajectory;
  auto it = std::upper_bound(segs.begin(), segs.end(), t,
                             [](double time, const TrajectorySegment& s) { return time < s.start_time; });
  const TrajectorySegment& s = it == segs.begin() ? segs.front() : *std::prev(it);
  const double dt = std::max(0.0, t - s.start_time);
  return {s.start_x + s.speed * dt + 0.5 * s.acceleration * dt * dt, s.speed + s.acceleration * dt};
}

/// Direction of travel used for CAM headings, including while stopped.
inline double nominal_heading_deg(const Vehicle& v) {
  for (const auto& s : v.trajectory) {
    if (s.speed != 0.0) return s.speed > 0.0 ? 0.0 : 180.0;
    if (s.acceleration != 0.0) return s.acceleration > 0.0 ? 0.0 : 180.0;
  }
  return 0.0;
}

struct TrajectoryStats {
  double start_s = 0.0;
  double stop_s = 0.0;  // first standstill after moving, or the horizon
  bool stopped = false;
  double duration_s = 0.0;
  double path_length_m = 0.0;
  double mean_speed_ms = 0.0;
};

namespace detail {

/// Integral of |v0 + a t| over [0, T].
inline double abs_speed_integral(double v0, double a, double T) {
  auto signed_dist = [&](double t) { return v0 * t + 0.5 * a * t * t; };
  if (a != 0.0) {
    const double t0 = -v0 / a;
    if (t0 > 0.0 && t0 < T) return std::abs(signed_dist(t0)) + std::abs(signed_dist(T) - signed_dist(t0));
  }
  return std::abs(signed_dist(T));
}

}  // namespace detail

/// Ground-truth tracking summary of one vehicle up to `horizon`.
inline TrajectoryStats trajectory_stats(const Vehicle& v, double horizon) {
  TrajectoryStats st;
  st.start_s = v.appear_time();
  double end = v.end_time ? std::min(*v.end_time, horizon) : horizon;
  bool moved = false;
  for (std::size_t i = 0; i < v.trajectory.size(); ++i) {
    const auto& s = v.trajectory[i];
    if (s.start_time >= end) break;
    if (s.speed == 0.0 && s.acceleration == 0.0 && moved) {
      end = s.start_time;
      st.stopped = true;
      break;
    }
    moved = moved || s.speed != 0.0 || s.acceleration != 0.0;
    const double seg_end = i + 1 < v.trajectory.size() ? std::min(v.trajectory[i + 1].start_time, end) : end;
    st.path_length_m += detail::abs_speed_integral(s.speed, s.acceleration, seg_end - s.start_time);
  }
  st.stop_s = end;
  st.duration_s = std::max(0.0, end - st.start_s);
  st.mean_speed_ms = st.duration_s > 0.0 ? st.path_length_m / st.duration_s : 0.0;
  return st;
}

struct RobotConfig {
  std::uint32_t id = 100;
  Vec2 position;
  moderator::ModeratorConfig moderator;
  decision::ZodConfig zod;
  fusion::FusionConfig fusion;
};

/// Simulated camera detection model.
struct SensorModelConfig {
  double max_detect_mean_m = 110.1;
  double max_detect_std_m = 6.5;
  double max_detect_min_m = 80.0;   // truncation bounds of the per-vehicle draw
  double max_detect_max_m = 130.0;
  double pixel_noise_px = 2.0;      // along-line noise sigma
  double lateral_jitter_px = 10.0;  // uniform offset across the line
};

struct InfraConfig {
  std::uint32_t id = 200;
  Vec2 position;
  double processing_delay_s = 0.0;  // CPM assembly to transmission
  double frame_period_s = 0.1;
  perception::PerceptionConfig perception;
  SensorModelConfig sensor;
};

struct RsuConfig {
  std::uint32_t id = 300;
  Vec2 position;
  std::uint8_t cause_code = msg::kCauseRoadworks;
  double period_s = 0.5;
  double start_s = 0.0;
  double end_s = 0.0;
  std::uint16_t validity_s = 60;
};

struct MergingWindow {
  double start_s = 0.0;
  double end_s = 0.0;
  double distance_m = 5.0;  // distance of the waiting road user from the robot
};

/// Ground-truth merging road users at the gate, seen by the robot's own
/// camera when within detect_range_m.
struct MergingConfig {
  double detect_range_m = 15.0;
  std::vector<MergingWindow> windows;

  [[nodiscard]] bool seen(double t) const {
    return std::any_of(windows.begin(), windows.end(), [&](const MergingWindow& w) {
      return t >= w.start_s && t <= w.end_s && w.distance_m <= detect_range_m;
    });
  }
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  double duration_s = 0.0;
  double tick_s = 0.05;
  std::uint64_t rng_seed = 0;
  std::optional<double> decision_period_s;  // default: the CPM period
  channel::ChannelConfig channel;
  RobotConfig robot;
  std::optional<InfraConfig> infra;
  std::optional<RsuConfig> rsu;
  std::vector<Vehicle> entities;
  MergingConfig merging;

  [[nodiscard]] double decision_period() const {
    if (decision_period_s) return *decision_period_s;
    return infra ? infra->perception.cpm_period_s : 0.2;
  }
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool divides(double tick, double period) {
  const double ratio = period / tick;
  return ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) < 1e-6;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

template <typename Fn>
void rethrow_as_validation(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

}  // namespace detail

/// Throws ValidationError naming the violated invariant.
inline void validate(const Scenario& sc) {
  using detail::require;
  require(sc.schema_version == kSchemaVersion,
          "schema_version must be " + std::to_string(kSchemaVersion));
  require(sc.duration_s > 0.0 && std::isfinite(sc.duration_s), "duration_s must be > 0");
  require(sc.tick_s > 0.0 && std::isfinite(sc.tick_s), "tick_s must be > 0");
  detail::rethrow_as_validation("channel", [&] { sc.channel.validate(); });
  detail::rethrow_as_validation("robot", [&] {
    sc.robot.moderator.validate();
    sc.robot.zod.validate();
    sc.robot.fusion.validate();
  });

  auto period = [&](double p, const std::string& what) {
    require(detail::divides(sc.tick_s, p), what + " (" + std::to_string(p) +
                                               " s) must be a positive multiple of tick_s");
  };
  period(sc.decision_period(), "decision period");
  period(sc.robot.moderator.cam.check_interval_s, "robot.moderator.cam_check_interval_s");

  std::set<std::uint32_t> actors{sc.robot.id};
  auto unique_actor = [&](std::uint32_t id, const std::string& what) {
    require(actors.insert(id).second, what + ": actor id " + std::to_string(id) + " is not unique");
  };

  if (sc.infra) {
    const auto& in = *sc.infra;
    unique_actor(in.id, "infra");
    detail::rethrow_as_validation("infra.perception", [&] { in.perception.validate(); });
    period(in.perception.cpm_period_s, "infra.perception.cpm_period_s");
    period(in.frame_period_s, "infra.frame_period_s");
    require(in.processing_delay_s >= 0.0, "infra.processing_delay_s must be >= 0");
    const auto& sm = in.sensor;
    require(sm.pixel_noise_px >= 0.0 && sm.lateral_jitter_px >= 0.0, "sensor noise must be >= 0");
    require(sm.max_detect_std_m >= 0.0, "sensor.max_detect_std_m must be >= 0");
    require(sm.max_detect_min_m > 0.0 && sm.max_detect_min_m <= sm.max_detect_mean_m &&
                sm.max_detect_mean_m <= sm.max_detect_max_m,
            "sensor truncation bounds must satisfy 0 < min <= mean <= max");
    std::set<std::uint8_t> sensor_ids;
    for (const auto& cam : in.perception.cameras) {
      require(sensor_ids.insert(cam.sensor_id).second, "camera sensor_id values must be unique");
      // The sensor model inverts the distance polynomial along the line.
      double prev = cam.model.evaluate(0.0);
      for (int i = 1; i <= 256; ++i) {
        const double d = cam.model.evaluate(cam.line.s_max() * i / 256.0);
        require(d > prev, "camera " + std::to_string(cam.sensor_id) +
                              ": calibration must increase along the reference line");
        prev = d;
      }
    }
  }
  if (sc.rsu) {
    unique_actor(sc.rsu->id, "rsu");
    period(sc.rsu->period_s, "rsu.period_s");
    require(sc.rsu->end_s >= sc.rsu->start_s, "rsu.end_s must be >= rsu.start_s");
  }

  std::set<std::uint32_t> stations{sc.robot.id};
  if (sc.infra) stations.insert(sc.infra->id);
  if (sc.rsu) stations.insert(sc.rsu->id);
  for (std::size_t i = 0; i < sc.entities.size(); ++i) {
    const auto& v = sc.entities[i];
    const std::string where = "entities[" + std::to_string(i) + "]";
    unique_actor(v.id, where);
    if (v.v2x_equipped()) {
      require(v.station_id == v.id, where + ": station_id must equal id for V2X vehicles");
      require(stations.insert(v.station_id).second, where + ": station_id is not unique");
      detail::rethrow_as_validation(where + ".cam", [&] { v.cam.validate(); });
      period(v.cam.check_interval_s, where + ".cam.check_interval_s");
    }
    require(!v.trajectory.empty(), where + ": trajectory must have at least one segment");
    for (std::size_t k = 0; k < v.trajectory.size(); ++k) {
      const auto& s = v.trajectory[k];
      require(std::isfinite(s.start_time) && std::isfinite(s.start_x) && std::isfinite(s.speed) &&
                  std::isfinite(s.acceleration),
              where + ".trajectory[" + std::to_string(k) + "]: values must be finite");
      if (k == 0) continue;
      const auto& p = v.trajectory[k - 1];
      require(s.start_time > p.start_time,
              where + ".trajectory[" + std::to_string(k) + "]: segments overlap in time");
      const double dt = s.start_time - p.start_time;
      const double x_end = p.start_x + p.speed * dt + 0.5 * p.acceleration * dt * dt;
      const double v_end = p.speed + p.acceleration * dt;
      require(std::abs(x_end - s.start_x) <= 1e-3,
              where + ".trajectory[" + std::to_string(k) + "]: position discontinuous at joint");
      require(std::abs(v_end - s.speed) <= 1e-3,
              where + ".trajectory[" + std::to_string(k) + "]: speed discontinuous at joint");
    }
    if (v.end_time) require(*v.end_time >= v.appear_time(), where + ": end_time before first segment");
  }
  for (std::size_t i = 0; i < sc.merging.windows.size(); ++i) {
    const auto& w = sc.merging.windows[i];
    require(w.end_s >= w.start_s, "merging_vehicle.windows[" + std::to_string(i) + "]: end before start");
  }
}

// ---------------------------------------------------------------------------
// JSON loading

namespace detail {

using nlohmann::json;

inline const json& field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) throw ParseError(ctx + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(ctx + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& v, const std::string& ctx) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParseError(ctx + ": wrong type (" + std::string(v.type_name()) + ")");
  }
}

template <typename T>
T req(const json& obj, const char* key, const std::string& ctx) {
  return get_as<T>(field(obj, key, ctx), ctx + "." + key);
}

template <typename T>
T opt(const json& obj, const char* key, T fallback, const std::string& ctx) {
  if (!obj.is_object()) throw ParseError(ctx + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return get_as<T>(*it, ctx + "." + key);
}

inline Vec2 point(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 2) throw ParseError(ctx + ": expected [x, y]");
  return {get_as<double>(v[0], ctx + "[0]"), get_as<double>(v[1], ctx + "[1]")};
}

inline Vec2 opt_point(const json& obj, const char* key, Vec2 fallback, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return point(*it, ctx + "." + key);
}

inline ObjectClass object_class(const std::string& name, const std::string& ctx) {
  if (name == "car") return ObjectClass::car;
  if (name == "truck_bus") return ObjectClass::truck_bus;
  if (name == "cyclist") return ObjectClass::cyclist;
  throw ParseError(ctx + ": unknown object_class '" + name + "'");
}

inline moderator::CamRules cam_rules(const json& j, moderator::CamRules r, const std::string& ctx) {
  r.max_interval_s = opt(j, "max_interval_s", r.max_interval_s, ctx);
  r.min_interval_s = opt(j, "min_interval_s", r.min_interval_s, ctx);
  r.check_interval_s = opt(j, "check_interval_s", r.check_interval_s, ctx);
  r.triggers = opt(j, "triggers", r.triggers, ctx);
  r.pos_delta_m = opt(j, "pos_delta_m", r.pos_delta_m, ctx);
  r.speed_delta_ms = opt(j, "speed_delta_ms", r.speed_delta_ms, ctx);
  r.heading_delta_deg = opt(j, "heading_delta_deg", r.heading_delta_deg, ctx);
  r.jitter_sigma_s = opt(j, "jitter_sigma_s", r.jitter_sigma_s, ctx);
  return r;
}

inline calib::CalibrationModel calibration(const json& j, const std::filesystem::path& base,
                                           const std::string& ctx) {
  if (j.contains("weights")) {
    auto w = req<std::vector<double>>(j, "weights", ctx);
    try {
      return calib::CalibrationModel(std::move(w));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
  }
  const auto csv = req<std::string>(j, "csv", ctx);
  const int order = opt(j, "order", 2, ctx);
  const auto path = std::filesystem::path(csv).is_absolute() ? std::filesystem::path(csv) : base / csv;
  try {
    return calib::fit(calib::load_calibration_csv(path.string()), order);
  } catch (const std::ios_base::failure& e) {
    throw IoError(ctx + ": " + e.what());
  } catch (const std::exception& e) {
    throw ValidationError(ctx + ": calibration " + path.string() + ": " + e.what());
  }
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  using detail::opt;
  using detail::req;
  Scenario sc;
  sc.schema_version = req<int>(j, "schema_version", "scenario");
  sc.name = opt<std::string>(j, "name", sc.name, "scenario");
  sc.duration_s = req<double>(j, "duration_s", "scenario");
  sc.tick_s = opt(j, "tick_s", sc.tick_s, "scenario");
  sc.rng_seed = opt<std::uint64_t>(j, "rng_seed", 0, "scenario");
  if (j.contains("decision_period_s")) sc.decision_period_s = req<double>(j, "decision_period_s", "scenario");

  if (auto it = j.find("channel"); it != j.end()) {
    const std::string ctx = "channel";
    sc.channel.comm_range_m = opt(*it, "comm_range_m", sc.channel.comm_range_m, ctx);
    sc.channel.loss_prob = opt(*it, "loss_prob", sc.channel.loss_prob, ctx);
    sc.channel.latency_base_s = opt(*it, "latency_base_s", sc.channel.latency_base_s, ctx);
    sc.channel.latency_jitter_s = opt(*it, "latency_jitter_s", sc.channel.latency_jitter_s, ctx);
  }

  const auto& robot = detail::field(j, "robot", "scenario");
  sc.robot.id = opt<std::uint32_t>(robot, "id", sc.robot.id, "robot");
  sc.robot.position = detail::opt_point(robot, "position", {}, "robot");
  if (auto it = robot.find("moderator"); it != robot.end()) {
    const std::string ctx = "robot.moderator";
    auto& m = sc.robot.moderator;
    m.cam = detail::cam_rules(it->value("cam", nlohmann::json::object()), m.cam, ctx + ".cam");
    m.actuation_move_s = opt(*it, "actuation_move_s", m.actuation_move_s, ctx);
    m.gesture_raise_s = opt(*it, "gesture_raise_s", m.gesture_raise_s, ctx);
    m.denm_max_hops = opt<std::uint8_t>(*it, "denm_max_hops", m.denm_max_hops, ctx);
  }
  if (auto it = robot.find("zod"); it != robot.end()) {
    auto& z = sc.robot.zod;
    z.half_extent_m = opt(*it, "half_extent_m", z.half_extent_m, "robot.zod");
    z.tau_th_s = opt(*it, "tau_th_s", z.tau_th_s, "robot.zod");
    z.center_offset_m = opt(*it, "center_offset_m", z.center_offset_m, "robot.zod");
  }
  if (auto it = robot.find("fusion"); it != robot.end()) {
    sc.robot.fusion.epsilon = opt(*it, "epsilon", sc.robot.fusion.epsilon, "robot.fusion");
    sc.robot.fusion.staleness_s = opt(*it, "staleness_s", sc.robot.fusion.staleness_s, "robot.fusion");
  }

  if (auto it = j.find("infra"); it != j.end() && !it->is_null()) {
    const std::string ctx = "infra";
    InfraConfig in;
    in.id = opt<std::uint32_t>(*it, "id", in.id, ctx);
    in.position = detail::opt_point(*it, "position", {}, ctx);
    in.processing_delay_s = opt(*it, "processing_delay_s", in.processing_delay_s, ctx);
    in.frame_period_s = opt(*it, "frame_period_s", in.frame_period_s, ctx);
    if (auto p = it->find("perception"); p != it->end()) {
      in.perception.moving_threshold_ms =
          opt(*p, "moving_threshold_ms", in.perception.moving_threshold_ms, ctx + ".perception");
      in.perception.cpm_period_s = opt(*p, "cpm_period_s", in.perception.cpm_period_s, ctx + ".perception");
      in.perception.track_expiry_s =
          opt(*p, "track_expiry_s", in.perception.track_expiry_s, ctx + ".perception");
    }
    if (auto s = it->find("sensor"); s != it->end()) {
      auto& sm = in.sensor;
      const std::string sctx = ctx + ".sensor";
      sm.max_detect_mean_m = opt(*s, "max_detect_mean_m", sm.max_detect_mean_m, sctx);
      sm.max_detect_std_m = opt(*s, "max_detect_std_m", sm.max_detect_std_m, sctx);
      sm.max_detect_min_m = opt(*s, "max_detect_min_m", sm.max_detect_min_m, sctx);
      sm.max_detect_max_m = opt(*s, "max_detect_max_m", sm.max_detect_max_m, sctx);
      sm.pixel_noise_px = opt(*s, "pixel_noise_px", sm.pixel_noise_px, sctx);
      sm.lateral_jitter_px = opt(*s, "lateral_jitter_px", sm.lateral_jitter_px, sctx);
    }
    const auto& cams = detail::field(*it, "cameras", ctx);
    if (!cams.is_array()) throw ParseError(ctx + ".cameras: expected an array");
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const std::string cctx = ctx + ".cameras[" + std::to_string(i) + "]";
      const auto& c = cams[i];
      perception::CameraConfig cam;
      cam.sensor_id = req<std::uint8_t>(c, "sensor_id", cctx);
      cam.range_dm = opt<std::uint16_t>(c, "range_dm", cam.range_dm, cctx);
      cam.road_offset_m = req<double>(c, "road_offset_m", cctx);
      cam.direction = req<int>(c, "direction", cctx);
      const auto& line = detail::field(c, "line", cctx);
      try {
        cam.line = calib::ReferenceLine(detail::point(detail::field(line, "p0", cctx + ".line"), cctx + ".line.p0"),
                                        detail::point(detail::field(line, "p1", cctx + ".line"), cctx + ".line.p1"));
      } catch (const std::invalid_argument& e) {
        throw ValidationError(cctx + ".line: " + e.what());
      }
      cam.model = detail::calibration(detail::field(c, "calibration", cctx), base_dir, cctx + ".calibration");
      in.perception.cameras.push_back(std::move(cam));
    }
    sc.infra = std::move(in);
  }

  if (auto it = j.find("rsu"); it != j.end() && !it->is_null()) {
    const std::string ctx = "rsu";
    RsuConfig r;
    r.id = opt<std::uint32_t>(*it, "id", r.id, ctx);
    r.position = detail::opt_point(*it, "position", {}, ctx);
    r.cause_code = opt<std::uint8_t>(*it, "cause_code", r.cause_code, ctx);
    r.period_s = req<double>(*it, "period_s", ctx);
    r.start_s = opt(*it, "start_s", 0.0, ctx);
    r.end_s = opt(*it, "end_s", sc.duration_s, ctx);
    r.validity_s = opt<std::uint16_t>(*it, "validity_s", r.validity_s, ctx);
    sc.rsu = r;
  }

  const auto& entities = detail::field(j, "entities", "scenario");
  if (!entities.is_array()) throw ParseError("entities: expected an array");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const std::string ctx = "entities[" + std::to_string(i) + "]";
    const auto& e = entities[i];
    Vehicle v;
    v.id = req<std::uint32_t>(e, "id", ctx);
    v.station_id = opt<std::uint32_t>(e, "station_id", 0, ctx);
    if (auto eq = e.find("v2x_equipped"); eq != e.end()) {
      const bool equipped = detail::get_as<bool>(*eq, ctx + ".v2x_equipped");
      if (equipped != v.v2x_equipped()) {
        throw ValidationError(ctx + ": v2x_equipped must match station_id != 0");
      }
    }
    v.object_class = detail::object_class(opt<std::string>(e, "object_class", "car", ctx), ctx);
    v.lane_y = opt(e, "lane_y", 0.0, ctx);
    if (e.contains("end_time")) v.end_time = req<double>(e, "end_time", ctx);
    v.cam = detail::cam_rules(e.value("cam", nlohmann::json::object()), v.cam, ctx + ".cam");
    const auto& traj = detail::field(e, "trajectory", ctx);
    if (!traj.is_array()) throw ParseError(ctx + ".trajectory: expected an array");
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const std::string tctx = ctx + ".trajectory[" + std::to_string(k) + "]";
      v.trajectory.push_back({req<double>(traj[k], "start_time", tctx), req<double>(traj[k], "start_x", tctx),
                              req<double>(traj[k], "speed", tctx),
                              opt(traj[k], "acceleration", 0.0, tctx)});
    }
    sc.entities.push_back(std::move(v));
  }

  if (auto it = j.find("merging_vehicle"); it != j.end() && !it->is_null()) {
    const std::string ctx = "merging_vehicle";
    sc.merging.detect_range_m = opt(*it, "detect_range_m", sc.merging.detect_range_m, ctx);
    if (auto w = it->find("windows"); w != it->end()) {
      if (!w->is_array()) throw ParseError(ctx + ".windows: expected an array");
      for (std::size_t i = 0; i < w->size(); ++i) {
        const std::string wctx = ctx + ".windows[" + std::to_string(i) + "]";
        sc.merging.windows.push_back({req<double>((*w)[i], "start_s", wctx), req<double>((*w)[i], "end_s", wctx),
                                      opt((*w)[i], "distance_m", 5.0, wctx)});
      }
    }
  }

  validate(sc);
  return sc;
}

inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  return scenario_from_json(j, base_dir);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Built-in geometry shared by the generators.

/// Default image reference line (pixels) and its distance polynomial; the
/// far end of the line sits about 134 m from the camera.
inline calib::ReferenceLine default_reference_line() { return {{640.0, 800.0}, {660.0, 200.0}}; }
inline calib::CalibrationModel default_calibration() { return calib::CalibrationModel({2.0, 0.07, 0.00025}); }

/// Two cameras on one pole at `pole_x`, looking in opposite directions.
inline InfraConfig default_infra(double pole_x) {
  InfraConfig in;
  in.position = {pole_x, 0.0};
  for (int dir : {-1, 1}) {
    perception::CameraConfig cam;
    cam.sensor_id = static_cast<std::uint8_t>(dir < 0 ? 1 : 2);
    cam.line = default_reference_line();
    cam.model = default_calibration();
    cam.road_offset_m = pole_x;
    cam.direction = dir;
    in.perception.cameras.push_back(cam);
  }
  return in;
}

/// Constant-speed passes of non-V2X cars for detection-range statistics:
/// speeds uniform in [8, 18] m/s, random direction, one vehicle every
/// `spacing_s`. Each vehicle starts 250 m from the pole and leaves 250 m
/// past it.
inline Scenario make_pass_batch(std::size_t passes, std::uint64_t seed, double spacing_s = 3.0) {
  Scenario sc;
  sc.name = "pass_batch";
  sc.rng_seed = seed;
  const double pole_x = -24.0;
  sc.infra = default_infra(pole_x);
  Rng rng(derive_seed(seed, 0xBA7C4));
  double last_exit = 0.0;
  for (std::size_t i = 0; i < passes; ++i) {
    Vehicle v;
    v.id = static_cast<std::uint32_t>(1000 + i);
    const double speed = std::round(rng.uniform(8.0, 18.0) * 100.0) / 100.0;
    const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
    const double t0 = static_cast<double>(i) * spacing_s;
    v.trajectory.push_back({t0, pole_x - dir * 250.0, dir * speed, 0.0});
    v.end_time = t0 + 500.0 / speed;
    last_exit = std::max(last_exit, *v.end_time);
    sc.entities.push_back(std::move(v));
  }
  sc.duration_s = std::ceil(last_exit) + 1.0;
  validate(sc);
  return sc;
}

}  // namespace coopmod::sim
