#include <catch_amalgamated.hpp>

#include <sstream>

#include "coopmod/perception.hpp"
#include "coopmod/random.hpp"

using namespace coopmod;
using namespace coopmod::perception;
using Catch::Matchers::WithinAbs;

namespace {

TrackWindow window_of(std::initializer_list<Sample> samples) {
  TrackWindow w(1, ObjectClass::car, 1);
  for (const auto& s : samples) w.push(s);
  return w;
}

/// Identity calibration (d = s) on a horizontal 200 px line, so image
/// position x = camera distance in meters.
CameraConfig identity_camera(std::uint8_t id, double offset, int direction) {
  CameraConfig c;
  c.sensor_id = id;
  c.line = calib::ReferenceLine({0.0, 0.0}, {200.0, 0.0});
  c.model = calib::CalibrationModel({0.0, 1.0});
  c.road_offset_m = offset;
  c.direction = direction;
  return c;
}

PerceptionConfig two_cameras() {
  PerceptionConfig cfg;
  cfg.cameras = {identity_camera(1, -24.0, -1), identity_camera(2, -24.0, 1)};
  return cfg;
}

Detection det(std::uint32_t track, double s, std::uint8_t cam, double t) {
  return {track, {s, 3.0}, ObjectClass::car, cam, t};
}

}  // namespace

TEST_CASE("track window keeps the newest three samples") {
  TrackWindow w(4, ObjectClass::car, 1);
  w.push({0.0, 100.0});
  w.push({0.1, 99.0});
  w.push({0.2, 98.0});
  CHECK(w.size() == 3);
  w.push({0.3, 97.0});
  CHECK(w.size() == 3);
  CHECK(w[0].time_s == 0.1);
  CHECK(w[2].distance_m == 97.0);
  CHECK_THROWS_AS(w.push({0.25, 1.0}), StaleDetection);
}

TEST_CASE("ingest rejects detections older than the window") {
  const auto cfg = two_cameras();
  TrackStore store;
  store.ingest(det(4, 50.0, 1, 1.0), cfg);
  CHECK_THROWS_AS(store.ingest(det(4, 49.0, 1, 0.9), cfg), StaleDetection);
  store.ingest(det(4, 49.0, 1, 1.1), cfg);
  store.ingest(det(4, 48.0, 1, 1.2), cfg);
  store.ingest(det(4, 47.0, 1, 1.3), cfg);
  CHECK(store.tracks().at(4).size() == 3);
  CHECK(store.tracks().at(4)[0].distance_m == 49.0);
}

TEST_CASE("detections beyond the line end are clamped and flagged") {
  const auto cfg = two_cameras();
  TrackStore store;
  const auto& w = store.ingest(det(9, 250.0, 2, 0.0), cfg);
  CHECK(w.newest().distance_m == 200.0);
  CHECK(w.extrapolated);
  const auto& w2 = store.ingest(det(9, 150.0, 2, 0.1), cfg);
  CHECK_FALSE(w2.extrapolated);
}

TEST_CASE("three-sample velocity estimate") {
  CHECK_THAT(estimate_velocity(window_of({{0, 100}, {1, 90}, {2, 80}})), WithinAbs(-10.0, 1e-12));
  CHECK_THAT(estimate_velocity(window_of({{0, 50}, {0.2, 50.5}, {0.4, 49.8}})), WithinAbs(-0.5, 1e-12));
  CHECK(estimate_velocity(window_of({{0, 7}, {0.1, 7}, {0.2, 7}})) == 0.0);
  CHECK_THROWS_AS(estimate_velocity(window_of({{0, 7}, {0.1, 7}})), InsufficientSamples);
}

TEST_CASE("velocity estimate matches a direct two-slope recomputation") {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const double t0 = rng.uniform(0.0, 100.0);
    const double t1 = t0 + rng.uniform(0.01, 1.0);
    const double t2 = t1 + rng.uniform(0.01, 1.0);
    const double d0 = rng.uniform(0.0, 150.0);
    const double d1 = rng.uniform(0.0, 150.0);
    const double d2 = rng.uniform(0.0, 150.0);
    const double slope_a = (d1 - d0) / (t1 - t0);
    const double slope_b = (d2 - d1) / (t2 - t1);
    REQUIRE_THAT(estimate_velocity(window_of({{t0, d0}, {t1, d1}, {t2, d2}})),
                 WithinAbs((slope_a + slope_b) / 2.0, 1e-12));
  }
}

TEST_CASE("motion labels use a strict threshold") {
  const PerceptionConfig cfg;
  CHECK(classify_motion(-10.0, cfg) == Motion::moving_approaching);
  CHECK(classify_motion(10.0, cfg) == Motion::moving_receding);
  CHECK(classify_motion(-0.5, cfg) == Motion::stationary);
  CHECK(classify_motion(3.0, cfg) == Motion::stationary);
  CHECK(classify_motion(-3.0, cfg) == Motion::stationary);
  CHECK(classify_motion(std::nextafter(3.0, 4.0), cfg) == Motion::moving_receding);
}

TEST_CASE("CPM assembly") {
  const auto cfg = two_cameras();

  SECTION("no tracks") {
    const auto cpm = assemble_cpm(TrackStore{}, 0.0, cfg);
    CHECK(cpm.sensors.size() == 2);
    CHECK(cpm.objects.empty());
  }
  SECTION("left camera distance maps to the negative road axis") {
    TrackStore store;
    store.ingest(det(1, 60.0, 1, 0.0), cfg);
    const auto cpm = assemble_cpm(store, 0.2, cfg);
    REQUIRE(cpm.objects.size() == 1);
    CHECK(cpm.objects[0].pos_x_cm == -8400);
    CHECK(cpm.objects[0].speed_cms == 0);
    CHECK(cpm.objects[0].meas_delta_ms == 200);
  }
  SECTION("one vehicle seen by both cameras stays two objects") {
    TrackStore store;
    store.ingest(det(1, 0.5, 1, 0.0), cfg);
    store.ingest(det(2, 0.5, 2, 0.0), cfg);
    const auto cpm = assemble_cpm(store, 0.0, cfg);
    REQUIRE(cpm.objects.size() == 2);
    CHECK(cpm.objects[0].pos_x_cm == -2450);
    CHECK(cpm.objects[1].pos_x_cm == -2350);
  }
  SECTION("speed only for moving tracks with a full window") {
    TrackStore store;
    store.ingest(det(3, 100.0, 1, 0.0), cfg);
    store.ingest(det(3, 99.0, 1, 0.1), cfg);
    CHECK(assemble_cpm(store, 0.1, cfg).objects[0].speed_cms == 0);
    store.ingest(det(3, 98.0, 1, 0.2), cfg);
    CHECK(assemble_cpm(store, 0.2, cfg).objects[0].speed_cms == -1000);
    store.ingest(det(3, 97.9, 1, 0.3), cfg);
    store.ingest(det(3, 97.8, 1, 0.4), cfg);
    CHECK(assemble_cpm(store, 0.4, cfg).objects[0].speed_cms == 0);
  }
  SECTION("expired tracks are dropped") {
    TrackStore store;
    store.ingest(det(5, 10.0, 2, 0.0), cfg);
    store.expire(1.0, cfg);
    CHECK(store.tracks().size() == 1);
    store.expire(1.2, cfg);
    CHECK(store.tracks().empty());
  }
}

TEST_CASE("replay emits CPMs on a fixed clock") {
  const auto cfg = two_cameras();
  std::ostringstream jsonl;
  for (int i = 0; i < 10; ++i) jsonl << to_json(det(1, 100.0 - i, 1, 0.1 * i)).dump() << '\n';
  std::istringstream in(jsonl.str());
  const auto detections = read_detections_jsonl(in);
  REQUIRE(detections.size() == 10);
  const auto cpms = replay_detections(detections, cfg);
  REQUIRE(cpms.size() >= 5);
  for (std::size_t i = 1; i < cpms.size(); ++i) {
    CHECK_THAT(cpms[i].time_s - cpms[i - 1].time_s, WithinAbs(cfg.cpm_period_s, 1e-12));
  }
  std::istringstream bad("{\"track_id\": 1}\n");
  CHECK_THROWS_AS(read_detections_jsonl(bad), std::invalid_argument);
}
