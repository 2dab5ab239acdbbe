#include <catch_amalgamated.hpp>

#include <algorithm>

#include "coopmod/fusion.hpp"
#include "coopmod/random.hpp"

using namespace coopmod;
using namespace coopmod::fusion;

namespace {

FusedObject obj(Source src, std::uint32_t id, double x, double v) {
  FusedObject o;
  o.source = src;
  o.id = id;
  o.road_x_m = x;
  o.speed_ms = v;
  return o;
}

std::vector<FusedObject> random_objects(Rng& rng, Source src, std::size_t n) {
  std::vector<FusedObject> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(obj(src, static_cast<std::uint32_t>(rng.next() % 1000), rng.uniform(-150, 150),
                      rng.uniform(-20, 20)));
  }
  return out;
}

}  // namespace

TEST_CASE("camera duplicates of a V2X object are dropped") {
  const auto fused = fuse({obj(Source::v2x, 7, 50.0, -9.0)},
                          {obj(Source::camera, 1, 49.0, -8.5), obj(Source::camera, 2, 120.0, -8.0)}, {});
  REQUIRE(fused.size() == 2);
  CHECK(fused[0].source == Source::v2x);
  CHECK(fused[0].road_x_m == 50.0);
  CHECK(fused[1].id == 2);
  CHECK(fused[1].road_x_m == 120.0);
}

TEST_CASE("one-sided inputs pass through") {
  const std::vector<FusedObject> cams{obj(Source::camera, 3, 1.0, 0.0), obj(Source::camera, 1, 2.0, 0.0)};
  const auto only_cam = fuse({}, cams, {});
  REQUIRE(only_cam.size() == 2);
  CHECK(only_cam[0].id == 1);
  const std::vector<FusedObject> v2x{obj(Source::v2x, 9, 1.0, 0.0)};
  CHECK(fuse(v2x, {}, {}) == v2x);
}

TEST_CASE("a camera object exactly epsilon away is kept") {
  const auto fused = fuse({obj(Source::v2x, 7, 0.0, 0.0)}, {obj(Source::camera, 1, 3.0, 4.0)}, {.epsilon = 5.0});
  CHECK(fused.size() == 2);
}

TEST_CASE("fusion properties on randomized inputs") {
  Rng rng(4242);
  for (int trial = 0; trial < 2000; ++trial) {
    const FusionConfig cfg{.epsilon = rng.uniform(0.5, 20.0)};
    const auto v2x = random_objects(rng, Source::v2x, rng.next() % 6);
    const auto cam = random_objects(rng, Source::camera, rng.next() % 10);
    const auto out = fuse(v2x, cam, cfg);

    std::vector<FusedObject> out_v2x;
    std::vector<FusedObject> out_cam;
    for (const auto& o : out) (o.source == Source::v2x ? out_v2x : out_cam).push_back(o);

    // Every V2X input is present, in station-id order, ahead of camera objects.
    REQUIRE(out_v2x.size() == v2x.size());
    for (const auto& v : v2x) REQUIRE(std::count(out_v2x.begin(), out_v2x.end(), v) >= 1);
    REQUIRE(std::is_sorted(out_v2x.begin(), out_v2x.end(), [](auto& a, auto& b) { return a.id < b.id; }));
    REQUIRE(std::is_sorted(out_cam.begin(), out_cam.end(), [](auto& a, auto& b) { return a.id < b.id; }));
    REQUIRE(std::equal(out_v2x.begin(), out_v2x.end(), out.begin()));

    // No surviving camera object lies within epsilon of a V2X object, and
    // every dropped one does.
    for (const auto& c : out_cam) {
      for (const auto& v : out_v2x) REQUIRE(joint_distance(c, v) >= cfg.epsilon);
    }
    for (const auto& c : cam) {
      const bool kept = std::count(out_cam.begin(), out_cam.end(), c) > 0;
      double nearest = kInfinity;
      for (const auto& v : v2x) nearest = std::min(nearest, joint_distance(c, v));
      REQUIRE(kept == (nearest >= cfg.epsilon));
    }

    // Re-fusing the split output is a fixed point.
    REQUIRE(fuse(out_v2x, out_cam, cfg) == out);
  }
}

TEST_CASE("road object table") {
  RoadObjectTable table({{-24.0, -1}, {-24.0, 1}});
  const FusionConfig cfg{};

  msg::CamPayload cam;
  cam.station_type = msg::StationType::passenger_car;
  cam.pos_x_cm = -5000;
  cam.speed_cms = 1000;
  cam.heading_cdeg = 0;
  table.on_cam(msg::Message{7, 1000, cam}, 1.01);

  msg::CamPayload robot = cam;
  robot.station_type = msg::StationType::pedestrian;
  table.on_cam(msg::Message{100, 1000, robot}, 1.01);

  msg::CpmPayload cpm;
  cpm.objects.push_back({1, 1, -8400, 0, -900, 200});  // left camera, approaching it
  cpm.objects.push_back({2, 1, 1000, 0, 500, 0});      // right camera, receding
  table.on_cpm(msg::Message{200, 2000, cpm}, 2.5);

  auto snap = table.snapshot(2.0, cfg);
  REQUIRE(snap.v2x.size() == 1);
  CHECK(snap.v2x[0].id == 7);
  CHECK_THAT(snap.v2x[0].road_x_m, Catch::Matchers::WithinAbs(-40.0, 1e-9));
  REQUIRE(snap.camera.size() == 2);
  CHECK(snap.camera[0].speed_ms == 9.0);  // toward +x when approaching a -x facing camera
  CHECK_THAT(snap.camera[0].road_x_m, Catch::Matchers::WithinAbs(-84.0 + 9.0 * 0.2, 1e-9));
  CHECK(snap.camera[1].speed_ms == 5.0);

  // Older CAMs and CPMs do not overwrite newer state.
  cam.pos_x_cm = 0;
  table.on_cam(msg::Message{7, 500, cam}, 2.1);
  table.on_cpm(msg::Message{200, 1800, msg::CpmPayload{}}, 2.6);
  snap = table.snapshot(1.9, cfg);
  REQUIRE(snap.v2x.size() == 1);
  CHECK_THAT(snap.v2x[0].road_x_m, Catch::Matchers::WithinAbs(-41.0, 1e-9));
  CHECK(snap.camera.size() == 2);

  // Staleness counts from reception.
  CHECK(table.snapshot(2.0, cfg).v2x.size() == 1);
  CHECK(table.snapshot(2.02, cfg).v2x.empty());
  CHECK(table.snapshot(3.5, cfg).camera.size() == 2);
  CHECK(table.snapshot(3.51, cfg).camera.empty());
}

TEST_CASE("CAM heading maps to road velocity") {
  msg::CamPayload cam;
  cam.speed_cms = 935;
  cam.heading_cdeg = 18000;
  CHECK_THAT(cam_road_speed(cam), Catch::Matchers::WithinAbs(-9.35, 1e-12));
  cam.heading_cdeg = 9000;
  CHECK_THAT(cam_road_speed(cam), Catch::Matchers::WithinAbs(0.0, 1e-12));
}
