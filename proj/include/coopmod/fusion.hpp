#pragma once

// V2X-priority fusion of CAM-derived and CPM-derived road objects, plus the
// robot-side table that turns received messages into road-axis objects.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <vector>

#include "coopmod/geometry.hpp"
#include "coopmod/messages.hpp"

namespace coopmod::fusion {

enum class Source : std::uint8_t { v2x, camera };

inline std::string_view to_string(Source s) { return s == Source::v2x ? "v2x" : "camera"; }

/// Identity of an object across ticks: V2X station id or camera track id.
struct ObjectRef {
  Source source = Source::v2x;
  std::uint32_t id = 0;

  friend auto operator<=>(const ObjectRef&, const ObjectRef&) = default;
};

struct FusedObject {
  Source source = Source::v2x;
  double road_x_m = 0.0;
  double speed_ms = 0.0;  // signed along the road axis (+x positive)
  ObjectClass object_class = ObjectClass::car;
  std::uint32_t id = 0;  // station id (v2x) or track id (camera)
  double last_update_s = 0.0;

  [[nodiscard]] ObjectRef ref() const { return {source, id}; }

  friend bool operator==(const FusedObject&, const FusedObject&) = default;
};

struct FusionConfig {
  double epsilon = 5.0;  // joint (m, m/s) gating distance
  double staleness_s = 1.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("fusion epsilon must be > 0");
    if (!(staleness_s > 0.0)) throw std::invalid_argument("fusion staleness_s must be > 0");
  }
};

inline double joint_distance(const FusedObject& a, const FusedObject& b) {
  return std::hypot(a.road_x_m - b.road_x_m, a.speed_ms - b.speed_ms);
}

/// Every V2X object is kept; a camera object survives only if it is at least
/// epsilon away (joint position/velocity norm) from all V2X objects. Output:
/// V2X by station id, then surviving camera objects by track id.
inline std::vector<FusedObject> fuse(std::vector<FusedObject> v2x, std::vector<FusedObject> cam,
                                     const FusionConfig& cfg) {
  auto by_id = [](const FusedObject& a, const FusedObject& b) { return a.id < b.id; };
  std::stable_sort(v2x.begin(), v2x.end(), by_id);
  std::stable_sort(cam.begin(), cam.end(), by_id);

  std::vector<FusedObject> out = v2x;
  for (auto& o : out) o.source = Source::v2x;
  for (auto& c : cam) {
    double nearest = kInfinity;
    for (const auto& v : v2x) nearest = std::min(nearest, joint_distance(c, v));
    if (nearest >= cfg.epsilon) {
      c.source = Source::camera;
      out.push_back(c);
    }
  }
  return out;
}

/// Road-axis velocity from a CAM's unsigned speed and heading (0 cdeg = +x).
inline double cam_road_speed(const msg::CamPayload& cam) {
  const double heading = static_cast<double>(cam.heading_cdeg) / 100.0 * std::numbers::pi / 180.0;
  return static_cast<double>(cam.speed_cms) / 100.0 * std::cos(heading);
}

/// Where an infrastructure camera sits on the road axis and which way it looks.
struct CameraPose {
  double road_offset_m = 0.0;
  int direction = 1;
};

/// Direction of the camera that can see road position x: the nearest camera
/// whose viewing half-line contains x, falling back to the nearest camera.
inline int viewing_direction(double x, const std::vector<CameraPose>& poses) {
  const CameraPose* best = nullptr;
  double best_gap = kInfinity;
  for (const auto& p : poses) {
    const double ahead = p.direction * (x - p.road_offset_m);
    if (ahead >= 0.0 && ahead < best_gap) {
      best = &p;
      best_gap = ahead;
    }
  }
  if (best) return best->direction;
  for (const auto& p : poses) {
    const double gap = std::abs(x - p.road_offset_m);
    if (gap < best_gap) {
      best = &p;
      best_gap = gap;
    }
  }
  return best ? best->direction : (x < 0.0 ? -1 : 1);
}

/// Latest road-axis view built from received CAMs and CPMs.
///
/// Objects are stored as measured; `snapshot` extrapolates them at constant
/// velocity to the query time and drops those not refreshed by a message
/// within staleness_s.
class RoadObjectTable {
 public:
  explicit RoadObjectTable(std::vector<CameraPose> poses = {}) : poses_(std::move(poses)) {}

  /// Vehicles only: pedestrian-profile (robot) and RSU CAMs are ignored.
  void on_cam(const msg::Message& m, double rx_time) {
    const auto* cam = m.cam();
    if (!cam || cam->station_type != msg::StationType::passenger_car) return;
    Entry e;
    e.object = {Source::v2x,
                static_cast<double>(cam->pos_x_cm) / 100.0,
                cam_road_speed(*cam),
                ObjectClass::car,
                m.station_id,
                static_cast<double>(m.timestamp_ms) / 1000.0};
    e.rx_time = rx_time;
    auto [slot, inserted] = v2x_.try_emplace(m.station_id, e);
    if (!inserted && slot->second.object.last_update_s <= e.object.last_update_s) slot->second = e;
  }

  /// A CPM replaces every object previously reported by the same station.
  void on_cpm(const msg::Message& m, double rx_time) {
    const auto* cpm = m.cpm();
    if (!cpm) return;
    const double gen = static_cast<double>(m.timestamp_ms) / 1000.0;
    auto& latest = cpm_generated_[m.station_id];
    if (latest > gen) return;  // reordered, older snapshot
    latest = gen;
    auto& objects = cameras_[m.station_id];
    objects.clear();
    for (const auto& o : cpm->objects) {
      const double x = static_cast<double>(o.pos_x_cm) / 100.0;
      Entry e;
      e.object = {Source::camera,
                  x,
                  viewing_direction(x, poses_) * static_cast<double>(o.speed_cms) / 100.0,
                  static_cast<ObjectClass>(o.object_class),
                  o.object_id,
                  gen - static_cast<double>(o.meas_delta_ms) / 1000.0};
      e.rx_time = rx_time;
      objects[o.object_id] = e;
    }
  }

  struct Snapshot {
    std::vector<FusedObject> v2x;
    std::vector<FusedObject> camera;
  };

  [[nodiscard]] Snapshot snapshot(double now, const FusionConfig& cfg) const {
    Snapshot out;
    auto project = [&](const Entry& e) {
      FusedObject o = e.object;
      o.road_x_m += o.speed_ms * (now - o.last_update_s);
      return o;
    };
    for (const auto& [id, e] : v2x_) {
      if (now - e.rx_time <= cfg.staleness_s) out.v2x.push_back(project(e));
    }
    for (const auto& [station, objects] : cameras_) {
      for (const auto& [id, e] : objects) {
        if (now - e.rx_time <= cfg.staleness_s) out.camera.push_back(project(e));
      }
    }
    return out;
  }

 private:
  struct Entry {
    FusedObject object;
    double rx_time = -kInfinity;
  };

  std::vector<CameraPose> poses_;
  std::map<std::uint32_t, Entry> v2x_;
  std::map<std::uint32_t, std::map<std::uint16_t, Entry>> cameras_;
  std::map<std::uint32_t, double> cpm_generated_;
};

}  // namespace coopmod::fusion
