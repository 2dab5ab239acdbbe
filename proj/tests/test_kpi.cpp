#include <catch_amalgamated.hpp>

#include <sstream>

#include "coopmod/kpi.hpp"

using namespace coopmod;
using namespace coopmod::sim;
using Catch::Matchers::WithinAbs;

namespace {

EventLog base_log(double duration) {
  EventLog log;
  log.header = {{"robot_id", 100}, {"infra_id", 200}, {"duration_s", duration}};
  return log;
}

nlohmann::json rx(const char* type, std::uint32_t from) { return {{"msg_type", type}, {"from", from}}; }

}  // namespace

TEST_CASE("inter-generation gap is the mean CAM spacing") {
  auto log = base_log(4.0);
  for (double t : {0.0, 1.1, 2.2, 3.3}) log.append(t, EventType::cam_gen, 100, {});
  log.append(0.5, EventType::cam_gen, 7, {});
  const auto rep = kpi::compute(log);
  REQUIRE(rep.ari_igg_s.value);
  CHECK_THAT(*rep.ari_igg_s.value, WithinAbs(1.1, 1e-12));
  CHECK(rep.ari_igg_s.samples == 3);
}

TEST_CASE("packet gaps, latency and zone time") {
  auto log = base_log(10.0);
  for (double t : {1.0, 1.5, 2.0}) log.append(t, EventType::msg_rx, 100, rx("CAM", 7));
  log.append(1.2, EventType::msg_rx, 100, rx("CAM", 8));
  log.append(1.0, EventType::cpm_gen, 200, {{"cpm_id", 1000}});
  auto cpm = rx("CPM", 200);
  cpm["cpm_id"] = 1000;
  log.append(2.3, EventType::msg_rx, 100, cpm);
  log.append(3.0, EventType::zod_enter, 7, {});
  log.append(5.5, EventType::zod_exit, 7, {});
  log.append(8.0, EventType::zod_enter, 7, {});

  const auto rep = kpi::compute(log, {.vehicle_id = 7});
  CHECK_THAT(*rep.vw_ipg_s.value, WithinAbs(0.5, 1e-12));
  CHECK_THAT(*rep.cpm_latency_s.value, WithinAbs(1.3, 1e-12));
  CHECK_THAT(*rep.vw_zod_time_s.value, WithinAbs(4.5, 1e-12));
  CHECK(rep.vw_zod_time_s.open_interval);
  CHECK(*rep.ari_stop_time_s.value == 0.0);
}

TEST_CASE("STOP time sums DANGER intervals") {
  auto log = base_log(20.0);
  log.append(1.0, EventType::decision, 100, {{"mode", "SAFE"}, {"action", "PASS"}});
  log.append(2.0, EventType::decision, 100, {{"mode", "DANGER"}, {"action", "STOP"}});
  log.append(3.0, EventType::decision, 100, {{"mode", "DANGER"}, {"action", "HOLD"}});
  log.append(6.0, EventType::decision, 100, {{"mode", "SAFE"}, {"action", "PASS"}});
  log.append(18.0, EventType::decision, 100, {{"mode", "DANGER"}, {"action", "STOP"}});
  const auto rep = kpi::compute(log);
  CHECK_THAT(*rep.ari_stop_time_s.value, WithinAbs(6.0, 1e-12));
  CHECK(rep.ari_stop_time_s.open_interval);
  CHECK(kpi::stop_commands(log, 100) == std::vector<double>{2.0, 18.0});
}

TEST_CASE("metrics without data are empty") {
  const auto rep = kpi::compute(base_log(5.0), {.vehicle_id = 7});
  CHECK(rep.ari_igg_s.empty());
  CHECK(rep.vw_ipg_s.empty());
  CHECK(rep.cpm_latency_s.empty());
  CHECK(rep.vw_zod_time_s.empty());
  CHECK(rep.rsu_ipg_s.empty());
  CHECK(kpi::to_csv(rep) ==
        "Metric,Value\nARI IGG,n/a\nVW IPG,n/a\nCPM Latency,n/a\nVW ZoD Time,n/a\nARI STOP Time,0.00\n");
}

TEST_CASE("RSU gap counts only direct copies") {
  auto log = base_log(5.0);
  log.header["rsu_id"] = 300;
  for (double t : {0.0, 0.5, 1.0}) {
    auto m = rx("DENM", 300);
    m["hop_count"] = 0;
    log.append(t + 0.01, EventType::msg_rx, 100, m);
  }
  auto relayed = rx("DENM", 300);
  relayed["hop_count"] = 1;
  log.append(0.2, EventType::msg_rx, 100, relayed);
  const auto rep = kpi::compute(log);
  CHECK_THAT(*rep.rsu_ipg_s.value, WithinAbs(0.5, 1e-12));
  CHECK(kpi::to_csv(rep).find("RSU IPG,0.50\n") != std::string::npos);
}

TEST_CASE("first detection statistics") {
  auto log = base_log(5.0);
  for (double d : {100.0, 110.0, 120.0}) {
    log.append(0.0, EventType::detection, 200, {{"first", true}, {"est_distance_m", d}});
  }
  log.append(0.1, EventType::detection, 200, {{"first", false}, {"est_distance_m", 5.0}});
  const auto rep = kpi::compute(log);
  CHECK_THAT(*rep.first_detection_mean_m.value, WithinAbs(110.0, 1e-12));
  CHECK_THAT(*rep.first_detection_std_m.value, WithinAbs(10.0, 1e-12));
}

TEST_CASE("JSON report and log round trip") {
  auto log = base_log(5.0);
  log.header["entities"] = {{{"id", 7}, {"tracked_duration_s", 19.82}, {"path_length_m", 185.5},
                             {"mean_speed_ms", 9.36}}};
  log.append(1.0, EventType::zod_enter, 7, {{"x", std::numeric_limits<double>::infinity()}});
  std::ostringstream out;
  log.write_jsonl(out);
  std::istringstream in(out.str());
  const auto back = EventLog::read_jsonl(in);
  REQUIRE(back.records.size() == 1);
  CHECK(back.records[0].payload["x"].is_null());

  const auto j = kpi::to_json(kpi::compute(back, {.vehicle_id = 7}));
  CHECK(j["subject"]["path_length_m"] == 185.5);
  CHECK(j["vw_zod_time_s"]["open_interval"] == true);
  CHECK(j["ari_igg_s"]["value"].is_null());

  std::istringstream bad("{\"log_header\": {}}\n{\"time_s\": 1}\n");
  CHECK_THROWS_AS(EventLog::read_jsonl(bad), ParseError);
}
