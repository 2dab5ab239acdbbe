#pragma once

// Fixed-tick simulation engine and its JSON-lines event log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopmod/channel.hpp"
#include "coopmod/decision.hpp"
#include "coopmod/fusion.hpp"
#include "coopmod/messages.hpp"
#include "coopmod/moderator.hpp"
#include "coopmod/perception.hpp"
#include "coopmod/random.hpp"
#include "coopmod/scenario.hpp"

namespace coopmod::sim {

enum class EventType {
  msg_tx,
  msg_rx,
  detection,
  cpm_gen,
  cam_gen,
  denm_relay,
  fusion_out,
  decision,
  actuation,
  zod_enter,
  zod_exit,
};

inline constexpr std::string_view kEventTypeNames[] = {
    "msg_tx",     "msg_rx",   "detection", "cpm_gen",   "cam_gen", "denm_relay",
    "fusion_out", "decision", "actuation", "zod_enter", "zod_exit"};

inline std::string_view to_string(EventType t) { return kEventTypeNames[static_cast<int>(t)]; }

inline std::optional<EventType> event_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kEventTypeNames); ++i) {
    if (kEventTypeNames[i] == s) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

struct EventRecord {
  double time_s = 0.0;
  EventType type = EventType::msg_tx;
  std::uint32_t actor_id = 0;
  nlohmann::json payload = nlohmann::json::object();
};

/// Header line first, then one record per line. Non-finite numbers are
/// written as null.
class EventLog {
 public:
  nlohmann::json header = nlohmann::json::object();
  std::vector<EventRecord> records;

  void append(double t, EventType type, std::uint32_t actor, nlohmann::json payload) {
    records.push_back({t, type, actor, std::move(payload)});
  }

  void write_jsonl(std::ostream& out) const {
    out << nlohmann::json{{"log_header", header}}.dump() << '\n';
    for (const auto& r : records) {
      nlohmann::json line = {{"time_s", r.time_s},
                             {"event_type", to_string(r.type)},
                             {"actor_id", r.actor_id},
                             {"payload", r.payload}};
      out << line.dump() << '\n';
    }
  }

  [[nodiscard]] std::string to_jsonl() const {
    std::ostringstream out;
    write_jsonl(out);
    return out.str();
  }

  /// Throws ParseError with the offending line number.
  static EventLog read_jsonl(std::istream& in) {
    EventLog log;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = "log line " + std::to_string(line_no);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(where + ": " + e.what());
      }
      if (!have_header) {
        if (!j.contains("log_header")) throw ParseError(where + ": missing log_header");
        log.header = j["log_header"];
        have_header = true;
        continue;
      }
      EventRecord r;
      try {
        r.time_s = j.at("time_s").get<double>();
        const auto name = j.at("event_type").get<std::string>();
        const auto type = event_type_from_string(name);
        if (!type) throw ParseError(where + ": unknown event_type '" + name + "'");
        r.type = *type;
        r.actor_id = j.at("actor_id").get<std::uint32_t>();
        r.payload = j.at("payload");
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
      }
      log.records.push_back(std::move(r));
    }
    if (!have_header) throw ParseError("event log is empty");
    return log;
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario's rng_seed
  bool collect_series = false;
};

/// One row per present vehicle per decision tick, for plotting.
struct SeriesRow {
  double time_s = 0.0;
  std::uint32_t vehicle_id = 0;
  double road_x_m = 0.0;
  double speed_ms = 0.0;
  decision::Mode mode = decision::Mode::safe;
  decision::Action action = decision::Action::pass;
};

inline void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows) {
  out << "time_s,vehicle_id,road_x_m,speed_ms,mode,action\n";
  for (const auto& r : rows) {
    out << r.time_s << ',' << r.vehicle_id << ',' << r.road_x_m << ',' << r.speed_ms << ','
        << decision::to_string(r.mode) << ',' << decision::to_string(r.action) << '\n';
  }
}

struct RunResult {
  EventLog log;
  std::vector<SeriesRow> series;
};

namespace detail {

inline std::uint64_t to_ms(double t) { return static_cast<std::uint64_t>(std::llround(std::max(0.0, t) * 1000.0)); }

inline std::int32_t to_cm(double m) { return static_cast<std::int32_t>(std::llround(m * 100.0)); }

inline long ticks_of(double period, double tick) { return std::max(1L, std::lround(period / tick)); }

inline nlohmann::json ref_json(const fusion::ObjectRef& r) {
  return {{"source", fusion::to_string(r.source)}, {"id", r.id}};
}

/// Inverse of an increasing calibration polynomial on [0, s_max].
inline std::optional<double> invert_model(const calib::CalibrationModel& m, double s_max, double d) {
  if (d < m.evaluate(0.0)) return 0.0;
  if (d > m.evaluate(s_max)) return std::nullopt;
  double lo = 0.0;
  double hi = s_max;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (m.evaluate(mid) < d ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Single-threaded engine. Each tick: ground-truth zone crossings, queued
/// deliveries and deferred transmissions up to now, camera frames, CPM
/// assembly, CAM checks, RSU DENMs, the robot decision, actuator timeline.
class Engine {
 public:
  Engine(Scenario sc, RunOptions opts = {})
      : sc_(std::move(sc)),
        opts_(opts),
        seed_(opts.seed.value_or(sc_.rng_seed)),
        channel_(channel_config()),
        sensor_rng_(derive_seed(seed_, 2)),
        table_(camera_poses()),
        relay_(sc_.robot.id, sc_.robot.moderator.denm_max_hops),
        actuator_(sc_.robot.moderator),
        robot_cam_(sc_.robot.moderator.cam, msg::StationType::pedestrian, derive_seed(seed_, 3)) {
    validate(sc_);
    for (const auto& v : sc_.entities) {
      VehicleState st;
      st.heading_deg = nominal_heading_deg(v);
      if (v.v2x_equipped()) {
        st.cam.emplace(v.cam, msg::StationType::passenger_car, derive_seed(seed_, 100 + v.id));
      }
      if (sc_.infra) {
        const auto& sm = sc_.infra->sensor;
        double r = 0.0;
        do {
          r = sensor_rng_.normal(sm.max_detect_mean_m, sm.max_detect_std_m);
        } while (r < sm.max_detect_min_m || r > sm.max_detect_max_m);
        st.detect_range_m = r;
      }
      vehicles_.push_back(std::move(st));
    }
  }

  RunResult run() {
    write_header();
    const long n_ticks = std::lround(std::floor(sc_.duration_s / sc_.tick_s + 1e-9));
    const double tick = sc_.tick_s;
    const long decision_every = detail::ticks_of(sc_.decision_period(), tick);
    const long robot_cam_every = detail::ticks_of(sc_.robot.moderator.cam.check_interval_s, tick);
    long frame_every = 1;
    long cpm_every = 1;
    if (sc_.infra) {
      frame_every = detail::ticks_of(sc_.infra->frame_period_s, tick);
      cpm_every = detail::ticks_of(sc_.infra->perception.cpm_period_s, tick);
    }
    long rsu_first = 0;
    long rsu_every = 1;
    if (sc_.rsu) {
      rsu_first = std::lround(std::ceil(sc_.rsu->start_s / tick - 1e-9));
      rsu_every = detail::ticks_of(sc_.rsu->period_s, tick);
    }

    double prev = 0.0;
    for (long i = 0; i <= n_ticks; ++i) {
      const double now = static_cast<double>(i) * tick;
      track_zone(prev, now, i == 0);
      drain(now);
      if (sc_.infra && i % frame_every == 0) camera_frame(now);
      if (sc_.infra && i % cpm_every == 0) perception_cycle(now);
      if (i % robot_cam_every == 0) {
        if (auto e = robot_cam_.tick({sc_.robot.position, 0.0, 0.0}, now)) {
          schedule_cam(sc_.robot.id, *e, now);
        }
      }
      vehicle_cams(i, now);
      if (sc_.rsu && i >= rsu_first && (i - rsu_first) % rsu_every == 0 &&
          now <= sc_.rsu->end_s + moderator::kTimeSlack) {
        rsu_broadcast(now);
      }
      if (i % decision_every == 0) decide(now);
      if (auto fired = actuator_.due(now)) {
        log_.append(now, EventType::actuation, sc_.robot.id,
                    {{"phase", "complete"},
                     {"kind", moderator::to_string(fired->kind)},
                     {"scheduled_time_s", fired->time_s}});
      }
      prev = now;
    }
    return {std::move(log_), std::move(series_)};
  }

 private:
  struct VehicleState {
    bool inside = false;
    bool detected = false;
    double detect_range_m = 0.0;
    double heading_deg = 0.0;
    std::map<std::uint8_t, std::uint32_t> tracks;  // camera id -> track id
    std::optional<moderator::CamGenerator> cam;
    std::set<std::pair<std::uint32_t, std::uint16_t>> denm_seen;
  };

  struct Delivery {
    std::uint32_t receiver = 0;
    std::uint64_t tx_id = 0;
    std::vector<std::uint8_t> bytes;
  };
  struct DeferredTx {
    std::uint32_t actor = 0;
    msg::Message message;
  };
  struct DeferredCam {
    std::uint32_t actor = 0;
    moderator::CamEmission emission;
  };
  using Action = std::variant<Delivery, DeferredTx, DeferredCam, EventRecord>;

  struct Pending {
    double time = 0.0;
    std::uint64_t seq = 0;
    Action action;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
    }
  };

  [[nodiscard]] channel::ChannelConfig channel_config() const {
    auto cfg = sc_.channel;
    cfg.rng_seed = derive_seed(seed_, 1);
    return cfg;
  }

  [[nodiscard]] std::vector<fusion::CameraPose> camera_poses() const {
    std::vector<fusion::CameraPose> poses;
    if (sc_.infra) {
      for (const auto& c : sc_.infra->perception.cameras) poses.push_back({c.road_offset_m, c.direction});
    }
    return poses;
  }

  void push(double t, Action a) { queue_.push({t, next_seq_++, std::move(a)}); }

  [[nodiscard]] Vec2 vehicle_position(const Vehicle& v, double t) const {
    return {eval_trajectory(v, t).road_x, v.lane_y};
  }

  [[nodiscard]] std::optional<Vec2> station_position(std::uint32_t actor, double t) const {
    if (actor == sc_.robot.id) return sc_.robot.position;
    if (sc_.infra && actor == sc_.infra->id) return sc_.infra->position;
    if (sc_.rsu && actor == sc_.rsu->id) return sc_.rsu->position;
    for (const auto& v : sc_.entities) {
      if (v.id == actor) return vehicle_position(v, t);
    }
    return std::nullopt;
  }

  void write_header() {
    nlohmann::json entities = nlohmann::json::array();
    for (const auto& v : sc_.entities) {
      const auto st = trajectory_stats(v, sc_.duration_s);
      entities.push_back({{"id", v.id},
                          {"station_id", v.station_id},
                          {"v2x_equipped", v.v2x_equipped()},
                          {"object_class", to_string(v.object_class)},
                          {"start_s", st.start_s},
                          {"stop_s", st.stop_s},
                          {"stopped", st.stopped},
                          {"tracked_duration_s", st.duration_s},
                          {"path_length_m", st.path_length_m},
                          {"mean_speed_ms", st.mean_speed_ms}});
    }
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : sc_.merging.windows) {
      windows.push_back({{"start_s", w.start_s}, {"end_s", w.end_s}, {"distance_m", w.distance_m}});
    }
    const auto& z = sc_.robot.zod;
    log_.header = {{"schema_version", kSchemaVersion},
                   {"scenario", sc_.name},
                   {"seed", seed_},
                   {"duration_s", sc_.duration_s},
                   {"tick_s", sc_.tick_s},
                   {"robot_id", sc_.robot.id},
                   {"infra_id", sc_.infra ? nlohmann::json(sc_.infra->id) : nlohmann::json(nullptr)},
                   {"rsu_id", sc_.rsu ? nlohmann::json(sc_.rsu->id) : nlohmann::json(nullptr)},
                   {"zod", {{"lower_m", z.lower()}, {"upper_m", z.upper()}, {"tau_th_s", z.tau_th_s}}},
                   {"merging_windows", windows},
                   {"entities", entities}};
  }

  // Ground-truth zone occupancy, timed by bisection inside the tick.
  void track_zone(double prev, double now, bool first) {
    const auto& zod = sc_.robot.zod;
    for (std::size_t k = 0; k < sc_.entities.size(); ++k) {
      const auto& v = sc_.entities[k];
      auto& st = vehicles_[k];
      auto inside_at = [&](double t) { return v.present(t) && zod.contains(eval_trajectory(v, t).road_x); };
      const bool in = inside_at(now);
      if (in == st.inside) continue;
      double t = now;
      if (!first) {
        double lo = prev;
        double hi = now;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (inside_at(mid) == in ? hi : lo) = mid;
        }
        t = hi;
      }
      st.inside = in;
      const auto x = eval_trajectory(v, t);
      push(t, EventRecord{t, in ? EventType::zod_enter : EventType::zod_exit, v.id,
                          {{"road_x_m", x.road_x}, {"speed_ms", x.speed}}});
    }
  }

  void drain(double now) {
    while (!queue_.empty() && queue_.top().time <= now + moderator::kTimeSlack) {
      Pending p = queue_.top();
      queue_.pop();
      std::visit([&](auto& a) { handle(p.time, a); }, p.action);
    }
  }

  void handle(double, EventRecord& r) { log_.records.push_back(std::move(r)); }

  void handle(double t, DeferredTx& tx) { transmit(tx.actor, tx.message, t); }

  void handle(double t, DeferredCam& c) { emit_cam(c.actor, c.emission, t); }

  void handle(double t, Delivery& d) {
    const auto decoded = msg::try_decode_message(d.bytes, msg::CodecLimits{255});
    if (const auto* err = std::get_if<msg::DecodeError>(&decoded)) {
      log_.append(t, EventType::msg_rx, d.receiver,
                  {{"tx_id", d.tx_id}, {"error", msg::to_string(*err)}, {"bytes", d.bytes.size()}});
      return;
    }
    const auto& m = std::get<msg::Message>(decoded);
    nlohmann::json payload = {{"tx_id", d.tx_id},
                              {"from", m.station_id},
                              {"msg_type", msg::to_string(m.type())},
                              {"timestamp_ms", m.timestamp_ms},
                              {"bytes", d.bytes.size()}};
    if (const auto* cpm = m.cpm()) {
      payload["cpm_id"] = m.timestamp_ms;
      payload["objects"] = cpm->objects.size();
    }
    const auto* denm = m.denm();
    if (denm) {
      payload["origin_station_id"] = denm->origin_station_id;
      payload["sequence_number"] = denm->sequence_number;
      payload["hop_count"] = denm->hop_count;
    }

    if (d.receiver == sc_.robot.id) {
      log_.append(t, EventType::msg_rx, d.receiver, std::move(payload));
      if (m.cam()) table_.on_cam(m, t);
      if (m.cpm()) table_.on_cpm(m, t);
      if (denm) {
        auto outcome = relay_.relay(m);
        log_.append(t, EventType::denm_relay, sc_.robot.id,
                    {{"verdict", moderator::to_string(outcome.verdict)},
                     {"origin_station_id", denm->origin_station_id},
                     {"sequence_number", denm->sequence_number},
                     {"hop_count", denm->hop_count}});
        if (outcome.rebroadcast) transmit(sc_.robot.id, *outcome.rebroadcast, t);
      }
      return;
    }
    for (std::size_t k = 0; k < sc_.entities.size(); ++k) {
      if (sc_.entities[k].station_id != d.receiver) continue;
      if (denm) {
        payload["duplicate"] =
            !vehicles_[k].denm_seen.insert({denm->origin_station_id, denm->sequence_number}).second;
      }
      break;
    }
    log_.append(t, EventType::msg_rx, d.receiver, std::move(payload));
  }

  void transmit(std::uint32_t actor, const msg::Message& m, double t) {
    const auto pos = station_position(actor, t);
    auto bytes = msg::encode_message(m, msg::CodecLimits{255});
    std::vector<channel::Receiver> receivers;
    if (actor != sc_.robot.id) receivers.push_back({sc_.robot.id, sc_.robot.position});
    for (const auto& v : sc_.entities) {
      if (v.v2x_equipped() && v.station_id != actor && v.present(t)) {
        receivers.push_back({v.station_id, vehicle_position(v, t)});
      }
    }
    const std::uint64_t tx_id = next_tx_id_++;
    const auto deliveries = channel_.broadcast(bytes, *pos, t, receivers);
    log_.append(t, EventType::msg_tx, actor,
                {{"tx_id", tx_id},
                 {"msg_type", msg::to_string(m.type())},
                 {"bytes", bytes.size()},
                 {"receivers", receivers.size()},
                 {"message", msg::to_json(m)}});
    for (const auto& d : deliveries) push(d.time_s, Delivery{d.receiver_id, tx_id, bytes});
  }

  void schedule_cam(std::uint32_t actor, const moderator::CamEmission& e, double now) {
    if (e.generation_time_s > now + moderator::kTimeSlack) {
      push(e.generation_time_s, DeferredCam{actor, e});
    } else {
      emit_cam(actor, e, now);
    }
  }

  void emit_cam(std::uint32_t actor, const moderator::CamEmission& e, double t) {
    msg::Message m{actor, detail::to_ms(t), e.payload};
    log_.append(t, EventType::cam_gen, actor,
                {{"timestamp_ms", m.timestamp_ms},
                 {"pos_x_cm", e.payload.pos_x_cm},
                 {"speed_cms", e.payload.speed_cms},
                 {"heading_cdeg", e.payload.heading_cdeg}});
    transmit(actor, m, t);
  }

  void vehicle_cams(long i, double now) {
    for (std::size_t k = 0; k < sc_.entities.size(); ++k) {
      const auto& v = sc_.entities[k];
      auto& st = vehicles_[k];
      if (!st.cam || !v.present(now)) continue;
      if (i % detail::ticks_of(v.cam.check_interval_s, sc_.tick_s) != 0) continue;
      const auto s = eval_trajectory(v, now);
      double heading = st.heading_deg;
      if (s.speed > 0.0) heading = 0.0;
      if (s.speed < 0.0) heading = 180.0;
      if (auto e = st.cam->tick({{s.road_x, v.lane_y}, std::abs(s.speed), heading}, now)) {
        schedule_cam(v.station_id, *e, now);
      }
    }
  }

  void camera_frame(double now) {
    const auto& in = *sc_.infra;
    const auto& sm = in.sensor;
    for (std::size_t k = 0; k < sc_.entities.size(); ++k) {
      const auto& v = sc_.entities[k];
      if (!v.present(now)) continue;
      auto& st = vehicles_[k];
      const double x = eval_trajectory(v, now).road_x;
      for (const auto& cam : in.perception.cameras) {
        const double along = cam.direction * (x - cam.road_offset_m);
        if (along < 0.0 || along > st.detect_range_m) continue;
        const auto s = detail::invert_model(cam.model, cam.line.s_max(), along);
        if (!s) continue;
        const double s_noisy = *s + (sm.pixel_noise_px > 0.0 ? sensor_rng_.normal(0.0, sm.pixel_noise_px) : 0.0);
        const double lateral = sm.lateral_jitter_px > 0.0 ? sensor_rng_.uniform(-sm.lateral_jitter_px, sm.lateral_jitter_px) : 0.0;
        const Vec2 dir = cam.line.direction();
        const Vec2 normal{-dir.y, dir.x};
        auto [slot, fresh] = st.tracks.try_emplace(cam.sensor_id, next_track_id_);
        if (fresh) ++next_track_id_;
        perception::Detection det{slot->second, cam.line.point_at(s_noisy) + lateral * normal, v.object_class,
                                  cam.sensor_id, now};
        const auto& window = tracks_.ingest(det, in.perception);
        const bool first = !st.detected;
        st.detected = true;
        log_.append(now, EventType::detection, in.id,
                    {{"camera_id", cam.sensor_id},
                     {"track_id", det.track_id},
                     {"vehicle_id", v.id},
                     {"true_distance_m", along},
                     {"est_distance_m", window.newest().distance_m},
                     {"first", first}});
      }
    }
  }

  void perception_cycle(double now) {
    const auto& in = *sc_.infra;
    tracks_.expire(now, in.perception);
    msg::Message m{in.id, detail::to_ms(now), perception::assemble_cpm(tracks_, now, in.perception)};
    log_.append(now, EventType::cpm_gen, in.id,
                {{"cpm_id", m.timestamp_ms}, {"objects", m.cpm()->objects.size()}});
    if (in.processing_delay_s > 0.0) {
      push(now + in.processing_delay_s, DeferredTx{in.id, std::move(m)});
    } else {
      transmit(in.id, m, now);
    }
  }

  void rsu_broadcast(double now) {
    const auto& r = *sc_.rsu;
    msg::DenmPayload denm;
    denm.cause_code = r.cause_code;
    denm.sequence_number = denm_seq_++;
    denm.event_pos_x_cm = detail::to_cm(r.position.x);
    denm.event_pos_y_cm = detail::to_cm(r.position.y);
    denm.validity_s = r.validity_s;
    denm.hop_count = 0;
    denm.origin_station_id = r.id;
    transmit(r.id, msg::Message{r.id, detail::to_ms(now), denm}, now);
  }

  void decide(double now) {
    const auto snap = table_.snapshot(now, sc_.robot.fusion);
    const auto fused = fusion::fuse(snap.v2x, snap.camera, sc_.robot.fusion);
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : fused) {
      objects.push_back({{"source", fusion::to_string(o.source)},
                         {"id", o.id},
                         {"road_x_m", o.road_x_m},
                         {"speed_ms", o.speed_ms},
                         {"object_class", to_string(o.object_class)}});
    }
    log_.append(now, EventType::fusion_out, sc_.robot.id,
                {{"objects", objects}, {"v2x_in", snap.v2x.size()}, {"camera_in", snap.camera.size()}});

    const bool merging = sc_.merging.seen(now);
    const auto result = decision::step(state_, fused, merging, now, sc_.robot.zod);
    state_ = result.state;
    nlohmann::json crossings = nlohmann::json::array();
    for (const auto& c : result.crossings) {
      crossings.push_back({{"object", detail::ref_json(c.object)}, {"t_enter_s", c.t_enter_s}, {"t_exit_s", c.t_exit_s}});
    }
    log_.append(now, EventType::decision, sc_.robot.id,
                {{"mode", decision::to_string(state_.mode)},
                 {"action", decision::to_string(result.action)},
                 {"merging_seen", merging},
                 {"blocking_object", state_.blocking_object ? detail::ref_json(*state_.blocking_object)
                                                            : nlohmann::json(nullptr)},
                 {"crossings", crossings}});
    for (const auto& e : actuator_.actuate(result.action, now)) {
      log_.append(now, EventType::actuation, sc_.robot.id,
                  {{"phase", "scheduled"},
                   {"command", decision::to_string(result.action)},
                   {"kind", moderator::to_string(e.kind)},
                   {"scheduled_time_s", e.time_s}});
    }
    if (opts_.collect_series) {
      for (const auto& v : sc_.entities) {
        if (!v.present(now)) continue;
        const auto s = eval_trajectory(v, now);
        series_.push_back({now, v.id, s.road_x, s.speed, state_.mode, result.action});
      }
    }
  }

  Scenario sc_;
  RunOptions opts_;
  std::uint64_t seed_;
  channel::Channel channel_;
  Rng sensor_rng_;
  fusion::RoadObjectTable table_;
  moderator::DenmRelay relay_;
  moderator::Actuator actuator_;
  moderator::CamGenerator robot_cam_;
  perception::TrackStore tracks_;
  decision::DecisionState state_;
  std::vector<VehicleState> vehicles_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_tx_id_ = 0;
  std::uint32_t next_track_id_ = 1;
  std::uint16_t denm_seq_ = 0;
  EventLog log_;
  std::vector<SeriesRow> series_;
};

inline RunResult run(const Scenario& sc, RunOptions opts = {}) { return Engine(sc, opts).run(); }

}  // namespace coopmod::sim
