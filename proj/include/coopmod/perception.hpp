#pragma once

// Infrastructure perception: per-track distance windows, three-sample
// velocity estimate, motion labelling and periodic CPM assembly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopmod/calibration.hpp"
#include "coopmod/geometry.hpp"
#include "coopmod/messages.hpp"

namespace coopmod::perception {

class StaleDetection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Detection {
  std::uint32_t track_id = 0;
  Vec2 bottom_center;
  ObjectClass object_class = ObjectClass::car;
  std::uint8_t camera_id = 0;
  double time_s = 0.0;
};

/// One infrastructure camera: its image-side calibration and its pose on
/// the signed road axis (robot gate at x = 0).
struct CameraConfig {
  std::uint8_t sensor_id = 0;
  std::uint16_t range_dm = 1300;
  calib::ReferenceLine line{{0.0, 0.0}, {1.0, 0.0}};
  calib::CalibrationModel model{std::vector<double>{0.0, 1.0}};
  double road_offset_m = 0.0;
  int direction = 1;  // +1: looks toward +x, -1: toward -x

  [[nodiscard]] double road_x(double distance_m) const {
    return road_offset_m + direction * distance_m;
  }
};

struct PerceptionConfig {
  double moving_threshold_ms = 3.0;
  double cpm_period_s = 0.2;
  double track_expiry_s = 1.0;
  std::vector<CameraConfig> cameras;

  void validate() const {
    if (!(moving_threshold_ms > 0.0)) throw std::invalid_argument("moving_threshold_ms must be > 0");
    if (!(cpm_period_s > 0.0)) throw std::invalid_argument("cpm_period_s must be > 0");
    if (!(track_expiry_s > 0.0)) throw std::invalid_argument("track_expiry_s must be > 0");
    for (const auto& c : cameras) {
      if (c.direction != 1 && c.direction != -1) {
        throw std::invalid_argument("camera direction must be +1 or -1");
      }
    }
  }

  [[nodiscard]] const CameraConfig& camera(std::uint8_t id) const {
    for (const auto& c : cameras) {
      if (c.sensor_id == id) return c;
    }
    throw std::invalid_argument("unknown camera id " + std::to_string(id));
  }
};

struct Sample {
  double time_s = 0.0;
  double distance_m = 0.0;
};

/// The last three (time, distance) samples of one track, oldest first.
class TrackWindow {
 public:
  static constexpr std::size_t kCapacity = 3;

  TrackWindow(std::uint32_t track_id, ObjectClass cls, std::uint8_t camera_id)
      : track_id_(track_id), object_class_(cls), camera_id_(camera_id) {}

  /// Appends, evicting the oldest sample when full. A sample at the same
  /// time as the newest one replaces it.
  void push(Sample s) {
    if (size_ > 0 && s.time_s < newest().time_s) {
      throw StaleDetection("track " + std::to_string(track_id_) + ": time regressed");
    }
    if (size_ > 0 && s.time_s == newest().time_s) {
      samples_[size_ - 1] = s;
      return;
    }
    if (size_ == kCapacity) {
      samples_[0] = samples_[1];
      samples_[1] = samples_[2];
      samples_[2] = s;
    } else {
      samples_[size_++] = s;
    }
  }

  [[nodiscard]] std::uint32_t track_id() const { return track_id_; }
  [[nodiscard]] ObjectClass object_class() const { return object_class_; }
  [[nodiscard]] std::uint8_t camera_id() const { return camera_id_; }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] bool full() const { return size_ == kCapacity; }
  [[nodiscard]] const Sample& operator[](std::size_t i) const { return samples_.at(i); }
  [[nodiscard]] const Sample& newest() const { return samples_[size_ - 1]; }

  bool extrapolated = false;  // newest distance came from a clamped projection

 private:
  std::uint32_t track_id_;
  ObjectClass object_class_;
  std::uint8_t camera_id_;
  std::array<Sample, kCapacity> samples_{};
  std::size_t size_ = 0;
};

/// Mean of the two consecutive slopes over the window. Negative when the
/// distance to the camera shrinks (approaching).
inline double estimate_velocity(const TrackWindow& w) {
  if (!w.full()) {
    throw InsufficientSamples("track " + std::to_string(w.track_id()) + " has " +
                              std::to_string(w.size()) + " of 3 samples");
  }
  const Sample& a = w[0];
  const Sample& b = w[1];
  const Sample& c = w[2];
  return 0.5 * ((b.distance_m - a.distance_m) / (b.time_s - a.time_s) +
                (c.distance_m - b.distance_m) / (c.time_s - b.time_s));
}

enum class Motion { moving_approaching, moving_receding, stationary };

inline std::string_view to_string(Motion m) {
  switch (m) {
    case Motion::moving_approaching: return "moving_approaching";
    case Motion::moving_receding: return "moving_receding";
    case Motion::stationary: return "stationary";
  }
  return "?";
}

inline Motion classify_motion(double v, const PerceptionConfig& cfg) {
  if (!(std::abs(v) > cfg.moving_threshold_ms)) return Motion::stationary;
  return v < 0.0 ? Motion::moving_approaching : Motion::moving_receding;
}

/// Camera distance for one detection: projection onto the reference line,
/// then the calibrated polynomial.
struct Ranging {
  double distance_m = 0.0;
  bool extrapolated = false;
};

inline Ranging range_detection(const Detection& det, const CameraConfig& cam) {
  const double raw = cam.line.coordinate(det.bottom_center);
  const double s = calib::project_to_line(det.bottom_center, cam.line);
  const auto est = calib::estimate_distance(cam.model, s);
  return {est.meters, est.extrapolated || raw < 0.0 || raw > cam.line.s_max()};
}

/// Per-track store. Single writer; callers serialize ingest/expire/assemble.
class TrackStore {
 public:
  const TrackWindow& ingest(const Detection& det, const PerceptionConfig& cfg) {
    const CameraConfig& cam = cfg.camera(det.camera_id);
    auto last = last_time_.find(det.camera_id);
    if (last != last_time_.end() && det.time_s < last->second) {
      throw StaleDetection("camera " + std::to_string(det.camera_id) + ": detection time regressed");
    }
    auto it = tracks_.find(det.track_id);
    if (it == tracks_.end()) {
      it = tracks_.emplace(det.track_id, TrackWindow(det.track_id, det.object_class, det.camera_id))
               .first;
    } else if (it->second.camera_id() != det.camera_id) {
      throw std::invalid_argument("track " + std::to_string(det.track_id) +
                                  " reported by two cameras");
    }
    const Ranging r = range_detection(det, cam);
    it->second.push({det.time_s, r.distance_m});
    it->second.extrapolated = r.extrapolated;
    last_time_[det.camera_id] = det.time_s;
    return it->second;
  }

  /// Drops tracks whose newest sample is older than track_expiry_s.
  void expire(double now, const PerceptionConfig& cfg) {
    std::erase_if(tracks_, [&](const auto& kv) {
      return now - kv.second.newest().time_s > cfg.track_expiry_s;
    });
  }

  [[nodiscard]] const std::map<std::uint32_t, TrackWindow>& tracks() const { return tracks_; }

 private:
  std::map<std::uint32_t, TrackWindow> tracks_;
  std::map<std::uint8_t, double> last_time_;
};

namespace detail {

inline std::int32_t to_cm(double meters) {
  const double cm = std::round(meters * 100.0);
  return static_cast<std::int32_t>(std::clamp(cm, -2147483648.0, 2147483647.0));
}

}  // namespace detail

/// One perceivedObject per track with at least one sample. Position is the
/// newest camera distance mapped onto the road axis; speed stays
/// camera-relative (negative = approaching that camera) and is 0 for tracks
/// without three samples or labelled stationary.
inline msg::CpmPayload assemble_cpm(const TrackStore& store, double now,
                                    const PerceptionConfig& cfg) {
  msg::CpmPayload cpm;
  for (const auto& cam : cfg.cameras) {
    cpm.sensors.push_back({cam.sensor_id, msg::kSensorTypeCamera, cam.range_dm});
  }
  for (const auto& [id, window] : store.tracks()) {
    if (window.size() == 0) continue;
    if (cpm.objects.size() == msg::kMaxListLength) break;
    const CameraConfig& cam = cfg.camera(window.camera_id());
    msg::PerceivedObject o;
    o.object_id = static_cast<std::uint16_t>(id);
    o.object_class = static_cast<std::uint8_t>(window.object_class());
    o.pos_x_cm = detail::to_cm(cam.road_x(window.newest().distance_m));
    o.pos_y_cm = 0;
    if (window.full()) {
      const double v = estimate_velocity(window);
      if (classify_motion(v, cfg) != Motion::stationary) {
        o.speed_cms = static_cast<std::int16_t>(std::clamp(std::round(v * 100.0), -32768.0, 32767.0));
      }
    }
    const double age_ms = std::round((now - window.newest().time_s) * 1000.0);
    o.meas_delta_ms = static_cast<std::uint16_t>(std::clamp(age_ms, 0.0, 65535.0));
    cpm.objects.push_back(o);
  }
  return cpm;
}

// ---------------------------------------------------------------------------
// Offline replay: one Detection per JSON line.

inline nlohmann::json to_json(const Detection& d) {
  return {{"track_id", d.track_id},
          {"bottom_center", {d.bottom_center.x, d.bottom_center.y}},
          {"object_class", static_cast<int>(d.object_class)},
          {"camera_id", d.camera_id},
          {"time_s", d.time_s}};
}

inline Detection detection_from_json(const nlohmann::json& j) {
  Detection d;
  d.track_id = j.at("track_id").get<std::uint32_t>();
  const auto& bc = j.at("bottom_center");
  d.bottom_center = {bc.at(0).get<double>(), bc.at(1).get<double>()};
  const auto cls = j.at("object_class").get<int>();
  if (!is_valid_object_class(static_cast<std::uint8_t>(cls)) || cls > 255) {
    throw std::invalid_argument("object_class must be 1, 2 or 3");
  }
  d.object_class = static_cast<ObjectClass>(cls);
  d.camera_id = j.at("camera_id").get<std::uint8_t>();
  d.time_s = j.at("time_s").get<double>();
  return d;
}

inline std::vector<Detection> read_detections_jsonl(std::istream& in) {
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(detection_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("detection line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct TimedCpm {
  double time_s = 0.0;
  msg::CpmPayload cpm;
};

/// Replays a time-ordered detection stream through a fresh store, emitting
/// a CPM every cpm_period_s from t = 0 until the last detection.
inline std::vector<TimedCpm> replay_detections(const std::vector<Detection>& detections,
                                               const PerceptionConfig& cfg) {
  std::vector<TimedCpm> out;
  if (detections.empty()) return out;
  TrackStore store;
  std::size_t next = 0;
  const double end = detections.back().time_s;
  for (long k = 0;; ++k) {
    const double now = static_cast<double>(k) * cfg.cpm_period_s;
    while (next < detections.size() && detections[next].time_s <= now) {
      store.ingest(detections[next++], cfg);
    }
    store.expire(now, cfg);
    out.push_back({now, assemble_cpm(store, now, cfg)});
    if (now >= end) break;
  }
  return out;
}

}  // namespace coopmod::perception
